"""
End-to-end tests of the generate, run, diagnose and compare commands
"""
import json
from io import StringIO
from pathlib import Path

import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from bgdeconv.model import ConvOperator, ModelDims
from django_app.experiments.config import EXIT_CONFIG, EXIT_NOT_CONVERGED
from django_app.utils.trace_io import read_bits, read_json, read_rows, read_vector

RECIPE = {'M': 40, 'P': 20, 'lam': 0.15, 'sigma_eps2': 1e-2, 'ir': 'benchmark', 'seed': 5}


def _config(tmp_path: Path, name: str, **overrides) -> str:
    path = tmp_path / name
    document = {'data': {'generate': RECIPE}, 'sampler': 'hybrid', 'chains': 2,
                'iterations': 40, 'batch': 5, 'seed': 3, 'jobs': 1}
    document.update(overrides)
    path.write_text(json.dumps(document))
    return str(path)


def _run(**options) -> StringIO:
    """Run the run command, accepting the not-converged exit of short runs"""
    stdout = StringIO()
    try:
        call_command('run', stdout=stdout, **options)
    except CommandError as e:
        assert e.returncode == EXIT_NOT_CONVERGED, str(e)
    return stdout


def test_generate_mendel_preset(tmp_path):
    """Test that the benchmark preset is written at its target SNR"""
    out = tmp_path / 'mendel'
    call_command('generate', preset='mendel', out=str(out), stdout=StringIO())
    meta = read_json(out / 'meta.json')
    truth = read_json(out / 'truth.json')
    assert meta['dims'] == {'N': 320, 'M': 300, 'P': 20}
    assert meta['snr_db'] == pytest.approx(12.80, abs=1e-9)
    assert read_vector(out / 'z.csv').size == 320
    assert len(truth['q_true']) == 300
    print("✓ Mendel preset generation test passed")


def test_generate_noiseless_recipe(tmp_path):
    """Test that sigma_eps2 = 0 gives z = Hx"""
    config = tmp_path / 'noiseless.json'
    config.write_text(json.dumps({'data': {'generate': dict(RECIPE, sigma_eps2=0.0)}}))
    out = tmp_path / 'data'
    call_command('generate', config=str(config), out=str(out), stdout=StringIO())

    truth = read_json(out / 'truth.json')
    op = ConvOperator(ModelDims.from_signal(40, 20), np.array(truth['h_true']))
    np.testing.assert_allclose(read_vector(out / 'z.csv'), op.matvec(np.array(truth['x_true'])),
                               atol=1e-15)
    assert read_json(out / 'meta.json')['snr_db'] is None


def test_generate_rejects_bad_source(tmp_path):
    """Test the config error exit of generate"""
    config = tmp_path / 'bad.json'
    config.write_text(json.dumps({'data': {'generate': dict(RECIPE, lam=1.5)}}))
    with pytest.raises(CommandError) as excinfo:
        call_command('generate', config=str(config), out=str(tmp_path / 'x'), stdout=StringIO())
    assert excinfo.value.returncode == EXIT_CONFIG


def test_run_writes_artifacts_and_is_reproducible(tmp_path):
    """Test the run artifacts and that a rerun gives the same estimate"""
    config = _config(tmp_path, 'run.json')
    first, second = tmp_path / 'a', tmp_path / 'b'
    _run(config=config, out=str(first))
    _run(config=config, out=str(second))

    for name in ('run.json', 'estimate.json', 'timing.json', 'mpsrf_trace.csv',
                 'chain_0_q.txt', 'chain_1_params.csv', 'data/z.csv'):
        assert (first / name).exists(), f"Missing {name}"
    assert (first / 'estimate.json').read_text() == (second / 'estimate.json').read_text()
    assert np.array_equal(read_bits(first / 'chain_1_q.txt'), read_bits(second / 'chain_1_q.txt'))

    q = read_bits(first / 'chain_0_q.txt')
    params = read_rows(first / 'chain_0_params.csv')
    assert q.shape == (40, 40)
    assert params.shape == (40, 3 + 21)

    run = read_json(first / 'run.json')
    assert [c['seed'] for c in run['chains']] == [3, 4]
    estimate = read_json(first / 'estimate.json')
    assert len(estimate['q']) == 40 and estimate['burn_in'] == 30
    assert 'support_errors' in estimate
    print("✓ Run reproducibility test passed")


def test_diagnose_reproduces_stored_trace(tmp_path):
    """Test that recomputing MPSRF from the q traces matches the run"""
    config = _config(tmp_path, 'run.json', sampler='ktuple:2')
    out = tmp_path / 'run'
    _run(config=config, out=str(out))
    call_command('diagnose', out=str(out), stdout=StringIO())

    report = read_json(out / 'diagnose.json')
    stored = read_rows(out / 'mpsrf_trace.csv')
    assert len(report['points']) == stored.shape[0]
    if report['points']:
        assert report['max_abs_difference'] <= 1e-12


def test_diagnose_rejects_missing_run(tmp_path):
    """Test the config error exit of diagnose"""
    with pytest.raises(CommandError) as excinfo:
        call_command('diagnose', out=str(tmp_path / 'nothing'), stdout=StringIO())
    assert excinfo.value.returncode == EXIT_CONFIG


def test_single_chain_skips_mpsrf(tmp_path):
    """Test that m = 1 warns and writes no MPSRF trace"""
    out = tmp_path / 'single'
    stdout = _run(config=_config(tmp_path, 'one.json'), chains=1, sampler='pm', out=str(out))
    assert 'at least two chains' in stdout.getvalue()
    assert not (out / 'mpsrf_trace.csv').exists()
    assert (out / 'estimate.json').exists()


def test_run_rejects_unknown_sampler(tmp_path):
    """Test the config error exit of run"""
    with pytest.raises(CommandError) as excinfo:
        call_command('run', preset='toy-single-spike', sampler='gibbs',
                     out=str(tmp_path / 'x'), stdout=StringIO())
    assert excinfo.value.returncode == EXIT_CONFIG


def test_compare_identical_configs(tmp_path):
    """Test that identical configurations give identical rows"""
    a = _config(tmp_path, 'a.json')
    b = _config(tmp_path, 'b.json')
    out = tmp_path / 'compare'
    call_command('compare', config=[a, b], out=str(out), stdout=StringIO())

    report = read_json(out / 'comparison.json')
    rows = report['runs']['rows']
    assert rows[0]['iterations_to_threshold'] == rows[1]['iterations_to_threshold']
    assert (out / 'comparison.csv').read_text().startswith('index,sampler,status')
    assert (out / 'mpsrf_vs_time.csv').exists()
    assert (read_json(out / '0_hybrid' / 'estimate.json')['q']
            == read_json(out / '1_hybrid' / 'estimate.json')['q'])


def test_compare_rejects_mismatched_data(tmp_path):
    """Test that configurations on different data are refused"""
    a = _config(tmp_path, 'a.json')
    b = _config(tmp_path, 'b.json', data={'generate': dict(RECIPE, seed=6)})
    with pytest.raises(CommandError) as excinfo:
        call_command('compare', config=[a, b], out=str(tmp_path / 'c'), stdout=StringIO())
    assert excinfo.value.returncode == EXIT_CONFIG


def test_compare_scaling_and_escape(tmp_path):
    """Test the cost-vs-M and escape studies on tiny budgets"""
    out = tmp_path / 'studies'
    call_command('compare', sampler=['hybrid', 'pm'], lengths=[60, 80, 100], scaling_iters=4,
                 escape_seeds=2, escape_iters=10, jobs=1, out=str(out), stdout=StringIO())

    report = read_json(out / 'comparison.json')
    fits = report['scaling']['fits']
    assert set(fits) == {'hybrid', 'pm'}
    assert fits['pm']['quadratic']['r2'] == pytest.approx(1.0)
    assert read_rows(out / 'scaling' / 'cost_vs_m.csv').shape == (6, 3)

    escape = report['escape']
    assert escape['spike_position'] == 9
    assert set(escape['median_first_visit']) == {'hybrid', 'pm'}
    assert read_rows(out / 'escape' / 'escape.csv').shape == (4, 3)
    print("✓ Scaling and escape study test passed")


def test_compare_needs_work(tmp_path):
    """Test that an empty comparison is a config error"""
    with pytest.raises(CommandError) as excinfo:
        call_command('compare', out=str(tmp_path / 'c'), stdout=StringIO())
    assert excinfo.value.returncode == EXIT_CONFIG
