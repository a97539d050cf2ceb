"""
BG Deconvolution Experiment Config Loading
Merges a JSON config file with command-line flags and validates the result
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional

from django.conf import settings
from django.core.management.base import CommandError

from .serializers import ExperimentConfigSerializer

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NOT_CONVERGED = 4

# CLI flag -> config key
FLAG_KEYS = {
    'seed': 'seed',
    'jobs': 'jobs',
    'out': 'out',
    'sampler': 'sampler',
    'iters': 'iterations',
    'chains': 'chains',
    'batch': 'batch',
    'burn_in': 'burn_in',
    'eta': 'eta',
}


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Read a JSON config file; a missing or malformed file is a config error"""
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise CommandError(f"Config file not found: {config_path}", returncode=EXIT_CONFIG)
    try:
        data = json.loads(config_path.read_text())
    except json.JSONDecodeError as e:
        raise CommandError(f"{config_path}: invalid JSON ({e})", returncode=EXIT_CONFIG)
    if not isinstance(data, dict):
        raise CommandError(f"{config_path}: top level must be an object", returncode=EXIT_CONFIG)
    return data


def merge_flags(data: Dict[str, Any], options: Dict[str, Any]) -> Dict[str, Any]:
    """Flags given on the command line override the file values"""
    merged = dict(data)
    for flag, key in FLAG_KEYS.items():
        value = options.get(flag)
        if value is not None:
            merged[key] = value
    if options.get('preset'):
        merged['data'] = {'preset': options['preset']}
    if options.get('data'):
        merged['data'] = {'path': options['data']}
    return merged


def validate_config(data: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate an ExperimentConfig document.

    Raises:
        CommandError: with exit code 2 listing every validation problem
    """
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        raise CommandError(f"Invalid experiment config: {json.dumps(serializer.errors)}",
                           returncode=EXIT_CONFIG)
    return dict(serializer.validated_data)


def build_config(options: Dict[str, Any], path: Optional[str] = None) -> Dict[str, Any]:
    return validate_config(merge_flags(load_config_file(path), options))


def output_root() -> Path:
    return Path(getattr(settings, 'BGDECONV', {}).get('OUTPUT_ROOT', 'runs'))


def default_out(config: Dict[str, Any], prefix: str) -> Path:
    """Run directory used when neither the flags nor the file name one"""
    if config.get('out'):
        return Path(config['out'])
    label = config['kind'].label.replace(':', '-')
    return output_root() / f"{prefix}-{label}-seed{config['seed']}"
