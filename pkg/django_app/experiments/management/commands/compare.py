from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from bgdeconv.exceptions import ConfigError, DeconvError
from bgdeconv.samplers.kernel import DEFAULT_ETA, SamplerKind
from django_app.experiments.config import EXIT_CONFIG, build_config, output_root
from django_app.services.compare_service import CompareService

from .run import add_run_arguments


class Command(BaseCommand):
    help = 'Compare samplers on shared data; optionally run the scaling and escape studies'

    def add_arguments(self, parser):
        parser.add_argument('--config', nargs='+', help='Two or more JSON experiment configs')
        parser.add_argument('--sampler', action='append',
                            help='Sampler to compare (repeatable): hybrid, ktuple:K or pm')
        add_run_arguments(parser)
        parser.add_argument('--lengths', nargs='+', type=int,
                            help='Spike-train lengths M of the cost-vs-M study')
        parser.add_argument('--scaling-iters', type=int, default=200, dest='scaling_iters',
                            help='Iterations per chain in the cost-vs-M study')
        parser.add_argument('--escape-seeds', type=int, dest='escape_seeds',
                            help='Chains per sampler in the escape study')
        parser.add_argument('--escape-iters', type=int, default=5000, dest='escape_iters',
                            help='Iteration cap of each escape chain')

    def _configs(self, options):
        flags = dict(options, sampler=None)
        if options.get('config'):
            return [build_config(flags, path) for path in options['config']]
        if options.get('sampler') and (options.get('preset') or options.get('data')):
            return [build_config(dict(flags, sampler=s)) for s in options['sampler']]
        return []

    def _kinds(self, options, configs):
        if configs:
            return [config['kind'] for config in configs]
        eta = options.get('eta') or DEFAULT_ETA
        try:
            return [SamplerKind.parse(s, eta) for s in options.get('sampler') or []]
        except ConfigError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG)

    def handle(self, *args, **options):
        configs = self._configs(options)
        kinds = self._kinds(options, configs)
        out_dir = Path(options['out']) if options.get('out') else output_root() / 'compare'
        seed = options.get('seed') or 0
        report = {}

        try:
            if configs:
                report['runs'] = CompareService.compare(configs, out_dir, options.get('jobs'))
            if options.get('lengths'):
                report['scaling'] = CompareService.scaling(
                    kinds, options['lengths'], options['scaling_iters'], seed,
                    out_dir / 'scaling', options.get('jobs'))
            if options.get('escape_seeds'):
                report['escape'] = CompareService.escape(
                    kinds, options['escape_seeds'], options['escape_iters'], seed,
                    out_dir / 'escape')
        except DeconvError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG)
        if 'runs' in report and 'scaling' in report:
            iterations = {row['sampler']: row['iterations_to_threshold']
                          for row in report['runs']['rows']}
            report['scaling']['crossover'] = CompareService.crossover(report['scaling'],
                                                                      iterations)

        if not report:
            raise CommandError("Nothing to compare: give --config files, --sampler with "
                               "--preset/--data, --lengths or --escape-seeds",
                               returncode=EXIT_CONFIG)
        CompareService.write_report(out_dir, report)

        for row in report.get('runs', {}).get('rows', []):
            crossing = row['iterations_to_threshold']
            self.stdout.write(f"{row['index']:>3} {row['sampler']:<10} "
                              f"{'-' if crossing is None else crossing:>8} {row['status']}")
        for label, fit in report.get('scaling', {}).get('fits', {}).items():
            self.stdout.write(f"{label}: R2 linear {fit['linear']['r2']:.3f}, "
                              f"quadratic {fit['quadratic']['r2']:.3f}")
        if report.get('scaling', {}).get('crossover') is not None:
            self.stdout.write(f"ktuple:2 overtakes pm at M = {report['scaling']['crossover']:.0f}")
        for label, median in report.get('escape', {}).get('median_first_visit', {}).items():
            self.stdout.write(f"{label}: median first visit {median:g}")
        self.stdout.write(self.style.SUCCESS(f"✅ Comparison written to {out_dir}"))
