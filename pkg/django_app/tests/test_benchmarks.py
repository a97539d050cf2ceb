"""
Mendel benchmark convergence and the cost-vs-M scaling study
"""
import pytest

from bgdeconv.samplers import SamplerKind
from django_app.experiments.config import validate_config
from django_app.services.compare_service import CompareService
from django_app.services.experiment_service import STATUS_CONVERGED

# iterations to MPSRF < 1.2 on the Mendel sequence
REFERENCE_ITERATIONS = {'hybrid': 4600, 'ktuple:2': 900, 'ktuple:3': 700, 'ktuple:4': 600,
                        'pm': 300}
SCALING_LENGTHS = [100, 200, 400, 800, 1600]


def _scaling_report(kt_cost, pm_cost):
    return {
        'lengths': SCALING_LENGTHS,
        'fits': {
            'ktuple:2': {'linear': {'coefficients': kt_cost}},
            'pm': {'quadratic': {'coefficients': pm_cost}},
        },
    }


def test_crossover_inside_range():
    """Test the length where the linear sampler starts converging sooner"""
    # 900 * 1e-5 M against 300 * 3e-8 M^2 meet at M = 1000
    report = _scaling_report([1e-5, 0.0], [3e-8, 0.0, 0.0])
    crossing = CompareService.crossover(report, {'ktuple:2': 900, 'pm': 300})
    assert crossing == pytest.approx(1000.0, abs=2.0)
    print("✓ Crossover test passed")


def test_crossover_missing_or_outside_range():
    """Test that no crossing is reported without data or inside-range change"""
    report = _scaling_report([1e-5, 0.0], [3e-8, 0.0, 0.0])
    assert CompareService.crossover(report, {'ktuple:2': None, 'pm': 300}) is None
    assert CompareService.crossover(report, {'ktuple:2': 9, 'pm': 300}) is None
    assert CompareService.crossover(report, {'ktuple:2': 900, 'pm': 1}) is None
    assert CompareService.crossover({'lengths': SCALING_LENGTHS, 'fits': {}},
                                    {'ktuple:2': 900, 'pm': 300}) is None


@pytest.mark.slow
def test_mendel_convergence_ordering(tmp_path):
    """Test iterations to threshold and estimate agreement on the Mendel sequence"""
    configs = [
        validate_config({'data': {'preset': 'mendel'}, 'sampler': label, 'chains': 10,
                         'iterations': 2 * reference, 'seed': 0})
        for label, reference in REFERENCE_ITERATIONS.items()
    ]
    report = CompareService.compare(configs, tmp_path / 'mendel')
    rows = {row['sampler']: row for row in report['rows']}
    iterations = {label: row['iterations_to_threshold'] for label, row in rows.items()}
    print(f"iterations to threshold: {iterations}")

    for label, row in rows.items():
        assert row['status'] == STATUS_CONVERGED, f"{label} did not converge"
        assert row['chains_agree'], f"{label} chains disagree on the support"
    for label, reference in REFERENCE_ITERATIONS.items():
        assert reference / 2 <= iterations[label] <= 2 * reference, \
            f"{label}: {iterations[label]} against {reference}"

    assert iterations['hybrid'] > 2 * iterations['ktuple:2']
    assert iterations['ktuple:2'] >= iterations['ktuple:3'] >= iterations['ktuple:4']
    assert iterations['pm'] < iterations['ktuple:2']
    assert report['ordering'][0] == 'hybrid'


@pytest.mark.slow
def test_cost_scaling_fits(tmp_path):
    """Test the degree of per-iteration cost growth and the crossover"""
    kinds = [SamplerKind.parse('ktuple:2'), SamplerKind.parse('pm')]
    report = CompareService.scaling(kinds, SCALING_LENGTHS, 300, 0, tmp_path / 'scaling', jobs=1)
    fits = report['fits']
    print(f"R2 ktuple:2 linear {fits['ktuple:2']['linear']['r2']:.3f}, "
          f"pm quadratic {fits['pm']['quadratic']['r2']:.3f}")
    assert fits['ktuple:2']['linear']['r2'] > 0.95
    assert fits['pm']['quadratic']['r2'] > 0.95

    crossing = CompareService.crossover(
        report, {label: REFERENCE_ITERATIONS[label] for label in ('ktuple:2', 'pm')})
    assert crossing is not None, "No crossover inside the tested lengths"
    assert min(SCALING_LENGTHS) < crossing < max(SCALING_LENGTHS)


def run_all_tests():
    """Run the fast tests"""
    test_crossover_inside_range()
    test_crossover_missing_or_outside_range()
    print("\n✅ All benchmark helper tests passed!")


if __name__ == '__main__':
    run_all_tests()
