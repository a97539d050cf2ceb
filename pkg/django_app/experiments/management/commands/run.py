from django.core.management.base import BaseCommand, CommandError

from bgdeconv.exceptions import DeconvError
from django_app.experiments.config import (
    EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, build_config, default_out,
)
from django_app.services.experiment_service import (
    STATUS_FAILED, STATUS_NO_DIAGNOSTIC, STATUS_NOT_CONVERGED, ExperimentService,
)


def add_run_arguments(parser):
    """Flags shared by run and compare"""
    parser.add_argument('--preset', choices=['mendel', 'toy-single-spike'])
    parser.add_argument('--data', help='Directory written by the generate command')
    parser.add_argument('--iters', type=int, help='Iterations per chain')
    parser.add_argument('--chains', type=int, help='Number of chains m')
    parser.add_argument('--batch', type=int, help='MPSRF batch size b')
    parser.add_argument('--burn-in', type=int, dest='burn_in', help='Burn-in J')
    parser.add_argument('--eta', type=float, help='Shift proposal probability per direction')
    parser.add_argument('--seed', type=int, help='Master seed; chain j uses seed + j')
    parser.add_argument('--jobs', type=int, help='Worker processes')
    parser.add_argument('--out', help='Output directory')


class Command(BaseCommand):
    help = 'Run m parallel chains of one sampler and write traces, MPSRF and estimates'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON experiment config')
        parser.add_argument('--sampler', help='hybrid, ktuple:K or pm')
        add_run_arguments(parser)

    def handle(self, *args, **options):
        config = build_config(options, options.get('config'))
        out_dir = default_out(config, 'run')

        self.stdout.write(f"Running {config['chains']} x {config['kind'].label} "
                          f"for {config['iterations']} iterations -> {out_dir}")
        try:
            summary = ExperimentService.run(config, out_dir, options.get('jobs'))
        except DeconvError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG)

        if summary['failed_chains']:
            self.stdout.write(self.style.WARNING(
                f"⚠️ {summary['failed_chains']} chain(s) aborted, see run.json"))

        status = summary['status']
        if status == STATUS_FAILED:
            raise CommandError("Every chain failed numerically", returncode=EXIT_NUMERICAL)
        if status == STATUS_NO_DIAGNOSTIC:
            self.stdout.write(self.style.WARNING("⚠️ MPSRF needs at least two chains; skipped"))
        elif status == STATUS_NOT_CONVERGED:
            raise CommandError(f"MPSRF did not drop below the threshold; artifacts in {out_dir}",
                               returncode=EXIT_NOT_CONVERGED)
        else:
            self.stdout.write(self.style.SUCCESS(
                f"✅ MPSRF below threshold at iteration {summary['iterations_to_threshold']}"))
        self.stdout.write(self.style.SUCCESS(f"✅ Artifacts written to {out_dir}"))
