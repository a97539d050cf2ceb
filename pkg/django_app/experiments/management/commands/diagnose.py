from django.core.management.base import BaseCommand, CommandError

from bgdeconv.exceptions import DeconvError
from django_app.experiments.config import EXIT_CONFIG
from django_app.services.experiment_service import ExperimentService


class Command(BaseCommand):
    help = 'Recompute the MPSRF trace of a run directory from its stored q traces'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Run directory')
        parser.add_argument('--batch', type=int, help='Batch size, defaults to the run value')

    def handle(self, *args, **options):
        try:
            report = ExperimentService.diagnose(options['out'], options.get('batch'))
        except DeconvError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG)

        final = report['final_mpsrf']
        self.stdout.write(f"Batch size: {report['batch']}, points: {len(report['points'])}")
        if final is not None:
            self.stdout.write(f"Final MPSRF: {final:.6f}")
        crossing = report['iterations_to_threshold']
        if crossing is None:
            self.stdout.write(self.style.WARNING("⚠️ MPSRF never dropped below the threshold"))
        else:
            self.stdout.write(self.style.SUCCESS(f"✅ Threshold crossed at iteration {crossing}"))
        if report['max_abs_difference'] is not None:
            self.stdout.write(f"Max difference to stored trace: {report['max_abs_difference']:.3e}")
