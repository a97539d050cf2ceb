"""
BG Deconvolution Experiment Service
Runs m seeded chains on a worker pool and writes traces, the MPSRF trace,
the posterior estimate and timing statistics. The calling process is the
only writer.
"""
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from django.conf import settings

from bgdeconv.diagnostics import ChainEnsemble, MpsrfTrace, estimate, mpsrf_trace
from bgdeconv.exceptions import ConfigError, DiagnosticUndefinedError
from bgdeconv.model import Hyperpriors
from bgdeconv.samplers.chain import ChainJob, ChainTrace, run_chains
from bgdeconv.samplers.kernel import SamplerSettings
from django_app.utils.run_validator import validate_run_dir
from django_app.utils.trace_io import (
    chain_params_path, chain_q_path, read_bits, read_json, read_rows, write_bits, write_json,
    write_rows,
)

from .data_service import DataBundle, DataService

logger = logging.getLogger(__name__)

STATUS_CONVERGED = 'converged'
STATUS_NOT_CONVERGED = 'not_converged'
STATUS_NO_DIAGNOSTIC = 'no_mpsrf'
STATUS_FAILED = 'failed'


def bgdeconv_settings() -> Dict[str, Any]:
    return getattr(settings, 'BGDECONV', {})


class ExperimentService:
    """Service layer for running and diagnosing experiments"""

    @classmethod
    def default_jobs(cls) -> int:
        return int(bgdeconv_settings().get('DEFAULT_JOBS', 1))

    @classmethod
    def build_jobs(cls, config: Dict[str, Any], bundle: DataBundle) -> List[ChainJob]:
        """One job per chain; chain j is seeded with master_seed + j"""
        priors = Hyperpriors(**config['priors']) if config.get('priors') else Hyperpriors()
        sampler_settings = SamplerSettings.from_dict(bgdeconv_settings())
        init = DataService.init_overrides(config.get('init'), bundle)
        return [
            ChainJob(z=bundle.z, dims=bundle.dims, kind=config['kind'],
                     seed=config['seed'] + j, iterations=config['iterations'],
                     burn_in=config['burn_in'], priors=priors, settings=sampler_settings,
                     init=init)
            for j in range(config['chains'])
        ]

    @classmethod
    def run(cls, config: Dict[str, Any], out_dir: Path, jobs: Optional[int] = None) -> Dict[str, Any]:
        """
        Execute a validated experiment configuration.

        Args:
            config: validated ExperimentConfig
            out_dir: run directory, created when missing
            jobs: worker processes, defaults to BGDECONV['DEFAULT_JOBS']

        Returns:
            Summary dictionary with a 'status' entry
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        bundle = DataService.resolve(config['data'], out_dir)
        workers = jobs or config.get('jobs') or cls.default_jobs()
        chain_jobs = cls.build_jobs(config, bundle)

        kind = config['kind']
        logger.info(f"Running {len(chain_jobs)} chain(s) of {kind.label} for "
                    f"{config['iterations']} iterations on {workers} worker(s)")
        started = time.perf_counter()
        traces = run_chains(chain_jobs, workers)
        elapsed = time.perf_counter() - started
        logger.info(f"Chains finished in {elapsed:.1f} s")

        cls._write_chains(out_dir, traces)
        ok = [t for t in traces if not t.failed]
        summary: Dict[str, Any] = {
            'sampler': kind.label,
            'chains': len(traces),
            'failed_chains': len(traces) - len(ok),
            'out': str(out_dir),
        }
        write_json(out_dir / 'run.json', {
            'config': cls._config_record(config, bundle),
            'chains': [cls._chain_record(j, t) for j, t in enumerate(traces)],
            'params_columns': ['lambda', 'sigma_eps2', 'sigma_h2']
            + [f"h_{k}" for k in range(bundle.dims.P + 1)],
            'mpsrf_columns': ['iteration', 'mpsrf', 'wall_time'],
        })

        if not ok:
            summary['status'] = STATUS_FAILED
            return summary

        trace = cls._write_mpsrf(out_dir, ok, config['batch'])
        threshold = float(bgdeconv_settings().get('MPSRF_THRESHOLD', 1.2))
        if trace is None:
            summary['status'] = STATUS_NO_DIAGNOSTIC
            summary['iterations_to_threshold'] = None
        else:
            crossing = trace.first_below(threshold)
            summary['iterations_to_threshold'] = crossing
            summary['wall_time_to_threshold'] = (
                cls.mean_wall_time(ok, crossing) if crossing else None)
            summary['status'] = STATUS_CONVERGED if crossing else STATUS_NOT_CONVERGED
            summary['mpsrf_points'] = trace.points
            if crossing:
                logger.info(f"MPSRF crossed {threshold} at iteration {crossing}")

        burn_in = min(config['burn_in'], min(t.iterations for t in ok) - 1)
        result = estimate(ok, burn_in, bundle.z, bundle.dims)
        per_chain = [estimate(t, burn_in, bundle.z, bundle.dims).q for t in ok]
        payload = result.to_dict()
        payload['burn_in'] = burn_in
        payload['per_chain_q'] = [q.astype(int).tolist() for q in per_chain]
        payload['chains_agree'] = all(np.array_equal(q, per_chain[0]) for q in per_chain)
        if bundle.has_truth:
            payload['support_errors'] = int(np.count_nonzero(result.q != bundle.q_true))
        write_json(out_dir / 'estimate.json', payload)
        summary['chains_agree'] = payload['chains_agree']

        timing = cls.timing(ok, config['burn_in'])
        write_json(out_dir / 'timing.json', timing)
        summary['per_iteration_cost'] = timing['median_per_iteration']
        summary['per_iteration_mean_cost'] = timing['mean_per_iteration']
        return summary

    @classmethod
    def _config_record(cls, config: Dict[str, Any], bundle: DataBundle) -> Dict[str, Any]:
        record = {key: value for key, value in config.items() if key != 'kind'}
        record['sampler'] = config['kind'].label
        record['eta'] = config['kind'].eta
        record['data_path'] = str(bundle.path) if bundle.path else None
        return record

    @classmethod
    def _chain_record(cls, j: int, trace: ChainTrace) -> Dict[str, Any]:
        return {
            'index': j,
            'seed': trace.seed,
            'iterations': trace.iterations,
            'counters': trace.counters,
            'error': trace.error,
        }

    @classmethod
    def _write_chains(cls, out_dir: Path, traces: List[ChainTrace]) -> None:
        for j, trace in enumerate(traces):
            write_bits(chain_q_path(out_dir, j), trace.q)
            write_rows(chain_params_path(out_dir, j), trace.params())
            if trace.failed:
                logger.warning(f"Chain {j} (seed {trace.seed}) aborted: {trace.error}")

    @classmethod
    def mean_wall_time(cls, traces: List[ChainTrace], iteration: int) -> float:
        """Mean over chains of the cumulative wall time after `iteration` iterations"""
        return float(np.mean([np.sum(t.times[:iteration]) for t in traces]))

    @classmethod
    def _write_mpsrf(cls, out_dir: Path, traces: List[ChainTrace], batch: int) -> Optional[MpsrfTrace]:
        if len(traces) < 2:
            logger.warning("MPSRF needs at least two chains; no mpsrf_trace.csv written")
            return None
        trace = mpsrf_trace(ChainEnsemble.from_traces(traces), batch, on_undefined='skip')
        rows = [(it, value, cls.mean_wall_time(traces, it)) for it, value in trace.points]
        write_rows(out_dir / 'mpsrf_trace.csv', np.array(rows, dtype=float).reshape(-1, 3))
        return trace

    @classmethod
    def timing(cls, traces: List[ChainTrace], burn_in: int) -> Dict[str, Any]:
        """
        Per-iteration wall time statistics over the post-burn-in window,
        leaving out the first TIMING_SKIP iterations.
        """
        skip = int(bgdeconv_settings().get('TIMING_SKIP', 100))
        windows = []
        for t in traces:
            start = max(burn_in, skip)
            if start >= t.iterations:
                start = min(skip, t.iterations // 2)
            windows.append(t.times[start:])
        pooled = np.concatenate(windows)
        return {
            'median_per_iteration': float(np.median(pooled)) if pooled.size else None,
            'mean_per_iteration': float(np.mean(pooled)) if pooled.size else None,
            'per_chain_median': [float(np.median(w)) if w.size else None for w in windows],
            'total_wall_time': float(sum(np.sum(t.times) for t in traces)),
        }

    @classmethod
    def diagnose(cls, run_dir: Path, batch: Optional[int] = None) -> Dict[str, Any]:
        """
        Recompute the MPSRF trace from stored q traces.

        Raises:
            ConfigError: invalid run directory or fewer than two usable chains
        """
        run_dir = Path(run_dir)
        is_valid, errors = validate_run_dir(run_dir)
        if not is_valid:
            raise ConfigError("; ".join(errors))
        run = read_json(run_dir / 'run.json')
        usable = [c for c in run['chains'] if not c.get('error')]
        if len(usable) < 2:
            raise ConfigError("MPSRF needs at least two successful chains")

        q_traces = [read_bits(chain_q_path(run_dir, c['index'])) for c in usable]
        n = min(q.shape[0] for q in q_traces)
        ensemble = ChainEnsemble(np.stack([q[:n].astype(float) for q in q_traces]),
                                 [c['seed'] for c in usable])
        batch = batch or run['config']['batch']
        try:
            trace = mpsrf_trace(ensemble, batch, on_undefined='skip')
        except DiagnosticUndefinedError as e:
            raise ConfigError(str(e))

        report: Dict[str, Any] = {
            'batch': batch,
            'points': [[it, value] for it, value in trace.points],
            'final_mpsrf': trace.points[-1][1] if trace.points else None,
            'iterations_to_threshold': trace.first_below(
                float(bgdeconv_settings().get('MPSRF_THRESHOLD', 1.2))),
            'max_abs_difference': None,
        }
        stored_path = run_dir / 'mpsrf_trace.csv'
        if stored_path.exists() and batch == run['config']['batch']:
            stored = read_rows(stored_path)
            recomputed = np.array([value for _, value in trace.points])
            if stored.shape[0] == recomputed.size and recomputed.size:
                report['max_abs_difference'] = float(np.max(np.abs(stored[:, 1] - recomputed)))
        write_json(run_dir / 'diagnose.json', report)
        return report
