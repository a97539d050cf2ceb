"""
BG Deconvolution Compare Service
Side-by-side sampler runs on shared data, the cost-vs-M scaling study and
the escape study from a two-spike local optimum.
"""
import csv
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from bgdeconv.diagnostics import first_visit
from bgdeconv.exceptions import ConfigError
from bgdeconv.samplers.chain import ChainJob, run_chains
from bgdeconv.samplers.kernel import SamplerKind, SamplerSettings
from django_app.utils.trace_io import read_rows, write_json, write_rows

from .data_service import PRESETS, DataService
from .experiment_service import ExperimentService, bgdeconv_settings

logger = logging.getLogger(__name__)

SCALING_RECIPE = {'P': 20, 'lam': 0.1, 'sigma_eps2': 4e-6, 'ir': 'benchmark', 'target_snr_db': 12.80}
TABLE_COLUMNS = ['index', 'sampler', 'status', 'iterations_to_threshold',
                 'wall_time_to_threshold', 'per_iteration_mean_cost', 'chains_agree']


def polynomial_fit(x: np.ndarray, y: np.ndarray, degree: int) -> Dict[str, Any]:
    """Least-squares polynomial fit with its coefficient of determination"""
    coefficients = np.polyfit(x, y, degree)
    residual = y - np.polyval(coefficients, x)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(residual @ residual) / total if total > 0 else 1.0
    return {'degree': degree, 'coefficients': coefficients.tolist(), 'r2': r2}


class CompareService:
    """Service layer for sampler comparisons"""

    @classmethod
    def _label(cls, kind: SamplerKind) -> str:
        return kind.label.replace(':', '-')

    @classmethod
    def compare(cls, configs: List[Dict[str, Any]], out_dir: Path,
                jobs: Optional[int] = None) -> Dict[str, Any]:
        """
        Run every configuration on the same data and tabulate convergence.

        Raises:
            ConfigError: fewer than two configurations or differing data sources
        """
        if len(configs) < 2:
            raise ConfigError("Comparison needs at least two configurations")
        source = configs[0]['data']
        for config in configs[1:]:
            if config['data'] != source:
                raise ConfigError("All compared configurations must share the same data source")

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        bundle = DataService.resolve(source, out_dir)
        shared = {'path': str(bundle.path)} if bundle.path else source

        rows = []
        for index, config in enumerate(configs):
            run_config = dict(config, data=shared)
            run_dir = out_dir / f"{index}_{cls._label(config['kind'])}"
            summary = ExperimentService.run(run_config, run_dir, jobs)
            rows.append({
                'index': index,
                'sampler': config['kind'].label,
                'status': summary['status'],
                'iterations_to_threshold': summary.get('iterations_to_threshold'),
                'wall_time_to_threshold': summary.get('wall_time_to_threshold'),
                'per_iteration_mean_cost': summary.get('per_iteration_mean_cost'),
                'chains_agree': summary.get('chains_agree'),
            })

        with open(out_dir / 'comparison.csv', 'w', newline='') as handle:
            writer = csv.DictWriter(handle, fieldnames=TABLE_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        cls._write_curves(out_dir, configs)

        return {'rows': rows, 'ordering': cls._ordering(rows)}

    @classmethod
    def write_report(cls, out_dir: Path, report: Dict[str, Any]) -> None:
        write_json(Path(out_dir) / 'comparison.json', report)

    @classmethod
    def _write_curves(cls, out_dir: Path, configs: List[Dict[str, Any]]) -> None:
        """mpsrf_vs_time.csv: (config index, iteration, mpsrf, wall time) rows"""
        records = []
        for index, config in enumerate(configs):
            path = out_dir / f"{index}_{cls._label(config['kind'])}" / 'mpsrf_trace.csv'
            if not path.exists():
                continue
            for iteration, value, wall in read_rows(path):
                records.append((index, iteration, value, wall))
        write_rows(out_dir / 'mpsrf_vs_time.csv', np.array(records, dtype=float).reshape(-1, 4))

    @classmethod
    def _ordering(cls, rows: List[Dict[str, Any]]) -> List[str]:
        """Samplers from slowest to fastest in iterations to threshold; unconverged first"""
        def key(row):
            crossing = row['iterations_to_threshold']
            return (crossing is not None, -(crossing or 0))
        return [row['sampler'] for row in sorted(rows, key=key)]

    @classmethod
    def scaling(cls, kinds: List[SamplerKind], lengths: List[int], iterations: int, seed: int,
                out_dir: Path, jobs: Optional[int] = None) -> Dict[str, Any]:
        """
        Median per-iteration cost against M for each sampler, with degree 1
        and degree 2 least-squares fits.
        """
        if len(lengths) < 3:
            raise ConfigError("The scaling study needs at least three lengths")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        skip = min(int(bgdeconv_settings().get('TIMING_SKIP', 100)), iterations // 2)
        sampler_settings = SamplerSettings.from_dict(bgdeconv_settings())

        chain_jobs, keys = [], []
        for M in lengths:
            bundle = DataService.build({'generate': dict(SCALING_RECIPE, M=M, seed=seed + M)})
            for index, kind in enumerate(kinds):
                chain_jobs.append(ChainJob(z=bundle.z, dims=bundle.dims, kind=kind, seed=seed,
                                           iterations=iterations, burn_in=iterations,
                                           settings=sampler_settings))
                keys.append((index, M))
        traces = run_chains(chain_jobs, jobs or ExperimentService.default_jobs())

        records, costs = [], {}
        for (index, M), trace in zip(keys, traces):
            if trace.failed or trace.iterations <= skip:
                logger.warning(f"Scaling run {kinds[index].label} at M={M} has no timing")
                continue
            cost = float(np.median(trace.times[skip:]))
            records.append((index, M, cost))
            costs.setdefault(index, []).append((M, cost))
        write_rows(out_dir / 'cost_vs_m.csv', np.array(records, dtype=float).reshape(-1, 3))

        fits = {}
        for index, points in costs.items():
            if len(points) < 3:
                continue
            m_values = np.array([p[0] for p in points], dtype=float)
            c_values = np.array([p[1] for p in points])
            fits[kinds[index].label] = {
                'linear': polynomial_fit(m_values, c_values, 1),
                'quadratic': polynomial_fit(m_values, c_values, 2),
            }
        return {'lengths': list(lengths), 'iterations': iterations, 'fits': fits}

    @classmethod
    def crossover(cls, scaling: Dict[str, Any], iterations: Dict[str, Optional[int]],
                  quadratic: str = 'pm', linear: str = 'ktuple:2') -> Optional[float]:
        """
        Smallest M of the tested range past which the linear-cost sampler needs
        less time to converge than the quadratic-cost one.

        Time to converge is the fitted per-iteration cost times the iterations
        to the MPSRF threshold. None when either sampler lacks a fit or a
        crossing, or when the linear sampler is already cheaper at the shortest
        length.
        """
        fits = scaling.get('fits', {})
        if quadratic not in fits or linear not in fits:
            return None
        if not iterations.get(quadratic) or not iterations.get(linear):
            return None
        lengths = scaling['lengths']
        grid = np.linspace(min(lengths), max(lengths), 1024)
        linear_time = np.polyval(fits[linear]['linear']['coefficients'], grid) * iterations[linear]
        quadratic_time = np.polyval(fits[quadratic]['quadratic']['coefficients'], grid) \
            * iterations[quadratic]
        cheaper = np.flatnonzero(linear_time < quadratic_time)
        if cheaper.size == 0 or cheaper[0] == 0:
            return None
        return float(grid[cheaper[0]])

    @classmethod
    def escape(cls, kinds: List[SamplerKind], seeds: int, max_iter: int, master_seed: int,
               out_dir: Path) -> Dict[str, Any]:
        """
        First-visit iterations of the true single-spike configuration from the
        two-spike initialization, `seeds` chains per sampler.
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        bundle = DataService.build({'preset': 'toy-single-spike'})
        init = DataService.two_spike_init(bundle)
        sampler_settings = SamplerSettings.from_dict(bgdeconv_settings())

        records, medians = [], {}
        for index, kind in enumerate(kinds):
            visits = []
            for s in range(seeds):
                visit = first_visit(kind, bundle.z, bundle.dims, bundle.q_true, max_iter,
                                    master_seed + s, init=init, settings=sampler_settings)
                records.append((index, master_seed + s, -1 if visit is None else visit))
                # censored at max_iter + 1 so the median stays defined
                visits.append(max_iter + 1 if visit is None else visit)
            medians[kind.label] = float(np.median(visits))
            logger.info(f"Escape {kind.label}: median first visit {medians[kind.label]}")
        write_rows(out_dir / 'escape.csv', np.array(records, dtype=float).reshape(-1, 3))
        return {
            'seeds': seeds,
            'max_iter': max_iter,
            'spike_position': PRESETS['toy-single-spike']['spike_position'],
            'median_first_visit': medians,
        }
