"""
Unit tests for experiment config validation and flag merging
"""
import json

import pytest
from django.conf import settings as django_settings
from django.core.management.base import CommandError
from django.test import override_settings

from django_app.experiments.config import (
    EXIT_CONFIG, build_config, default_out, load_config_file, merge_flags, validate_config,
)
from django_app.experiments.serializers import ExperimentConfigSerializer


def test_defaults_are_derived():
    """Test burn-in, batch and sampler defaults"""
    config = validate_config({'data': {'preset': 'mendel'}, 'iterations': 400})
    assert config['burn_in'] == 300
    assert config['batch'] == 20
    assert config['kind'].label == 'pm'
    assert config['chains'] == 10
    print("✓ Config defaults test passed")


def test_small_run_batch_floor():
    """Test that the batch size never drops below one"""
    config = validate_config({'data': {'preset': 'mendel'}, 'iterations': 10})
    assert config['batch'] == 1


def test_sampler_labels():
    """Test sampler parsing inside the config"""
    config = validate_config({'data': {'preset': 'toy-single-spike'}, 'sampler': 'ktuple:3',
                              'eta': 0.1})
    assert (config['kind'].K, config['kind'].eta) == (3, 0.1)

    serializer = ExperimentConfigSerializer(data={'data': {'preset': 'mendel'},
                                                  'sampler': 'ktuple:9'})
    assert not serializer.is_valid()
    assert 'sampler' in serializer.errors


def test_data_source_needs_exactly_one():
    """Test the data source exclusivity rule"""
    for data in ({}, {'preset': 'mendel', 'path': '/tmp/x'}):
        serializer = ExperimentConfigSerializer(data={'data': data})
        assert not serializer.is_valid(), f"Expected invalid for {data}"
    assert not ExperimentConfigSerializer(data={'data': {'preset': 'nope'}}).is_valid()


def test_generation_recipe_rules():
    """Test recipe checks on rate, IR and SNR"""
    recipe = {'M': 50, 'lam': 0.1, 'sigma_eps2': 1e-3}
    assert ExperimentConfigSerializer(data={'data': {'generate': recipe}}).is_valid()

    for bad in ({'lam': 0.0}, {'lam': 1.0}, {'P': 5}, {'ir': 'file'},
                {'sigma_eps2': 0.0, 'target_snr_db': 10.0}):
        serializer = ExperimentConfigSerializer(data={'data': {'generate': {**recipe, **bad}}})
        assert not serializer.is_valid(), f"Expected invalid for {bad}"


def test_burn_in_must_be_below_iterations():
    """Test the burn-in bound"""
    with pytest.raises(CommandError) as excinfo:
        validate_config({'data': {'preset': 'mendel'}, 'iterations': 10, 'burn_in': 10})
    assert excinfo.value.returncode == EXIT_CONFIG


def test_hyperpriors_validated():
    """Test that non-positive prior parameters are rejected"""
    serializer = ExperimentConfigSerializer(data={'data': {'preset': 'mendel'},
                                                  'priors': {'beta_a': 0.0}})
    assert not serializer.is_valid()
    config = validate_config({'data': {'preset': 'mendel'}, 'priors': {'beta_a': 2.0}})
    assert config['priors']['beta_a'] == 2.0 and config['priors']['beta_b'] == 1.0


def test_flags_override_file(tmp_path):
    """Test file loading and flag precedence"""
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'data': {'preset': 'mendel'}, 'seed': 3, 'iterations': 100}))
    config = build_config({'seed': 7, 'iters': None, 'preset': 'toy-single-spike'}, str(path))
    assert config['seed'] == 7
    assert config['iterations'] == 100
    assert dict(config['data']) == {'preset': 'toy-single-spike'}

    merged = merge_flags({}, {'data': str(tmp_path)})
    assert merged['data'] == {'path': str(tmp_path)}


def test_bad_config_files(tmp_path):
    """Test missing and malformed config files"""
    assert load_config_file(None) == {}
    with pytest.raises(CommandError) as excinfo:
        load_config_file(str(tmp_path / 'missing.json'))
    assert excinfo.value.returncode == EXIT_CONFIG

    path = tmp_path / 'bad.json'
    path.write_text('[1, 2]')
    with pytest.raises(CommandError):
        load_config_file(str(path))


def test_default_out(tmp_path):
    """Test the run directory naming"""
    with override_settings(BGDECONV={**django_settings.BGDECONV, 'OUTPUT_ROOT': str(tmp_path)}):
        config = validate_config({'data': {'preset': 'mendel'}, 'sampler': 'ktuple:2',
                                  'seed': 4})
        assert default_out(config, 'run') == tmp_path / 'run-ktuple-2-seed4'
    config['out'] = str(tmp_path / 'elsewhere')
    assert default_out(config, 'run') == tmp_path / 'elsewhere'
