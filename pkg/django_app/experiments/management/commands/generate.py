from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from bgdeconv.exceptions import DeconvError
from django_app.experiments.config import EXIT_CONFIG, load_config_file, output_root
from django_app.experiments.serializers import DataSourceSerializer
from django_app.services.data_service import DataService


class Command(BaseCommand):
    help = 'Generate synthetic Bernoulli-Gaussian data (z.csv, truth.json, meta.json)'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON experiment config; its "data" block is used')
        parser.add_argument('--preset', choices=['mendel', 'toy-single-spike'])
        parser.add_argument('--seed', type=int, help='Override the generation seed')
        parser.add_argument('--out', help='Output directory')

    def handle(self, *args, **options):
        source = load_config_file(options.get('config')).get('data', {})
        if options.get('preset'):
            source = {'preset': options['preset']}
        if options.get('seed') is not None:
            if source.get('generate'):
                source = {'generate': dict(source['generate'], seed=options['seed'])}
            elif source.get('preset'):
                self.stdout.write(self.style.WARNING("--seed ignored: presets carry fixed seeds"))

        serializer = DataSourceSerializer(data=source)
        if not serializer.is_valid():
            raise CommandError(f"Invalid data source: {serializer.errors}", returncode=EXIT_CONFIG)
        source = serializer.validated_data
        if source.get('path'):
            raise CommandError("generate needs a preset or a generation recipe, not a path",
                               returncode=EXIT_CONFIG)

        name = source.get('preset') or 'generated'
        out_dir = Path(options['out']) if options.get('out') else output_root() / 'data' / name
        try:
            bundle = DataService.build(source)
            DataService.write(bundle, out_dir)
        except DeconvError as e:
            raise CommandError(str(e), returncode=EXIT_CONFIG)

        snr = bundle.meta.get('snr_db')
        snr_text = f"{snr:.2f} dB" if snr is not None else "noiseless"
        self.stdout.write(self.style.SUCCESS(
            f"✅ Wrote {name} data to {out_dir} (M={bundle.dims.M}, "
            f"spikes={int(bundle.q_true.sum())}, SNR {snr_text})"))
