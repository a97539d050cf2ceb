"""
BG Deconvolution Data Service
Synthetic benchmark generation, presets and loading of data directories
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from bgdeconv.exceptions import ConfigError
from bgdeconv.model import (
    ConvOperator, ModelDims, benchmark_ir, generate_synthetic, rescale_to_snr, snr_db,
)
from django_app.utils.run_validator import validate_data_dir
from django_app.utils.trace_io import read_json, read_vector, write_json, write_vector

logger = logging.getLogger(__name__)

MENDEL_SEED = 1983
TOY_SEED = 10

PRESETS = {
    'mendel': {
        'M': 300, 'P': 20, 'lam': 0.1, 'sigma_eps2': 4e-6, 'ir': 'benchmark',
        'seed': MENDEL_SEED, 'target_snr_db': 12.80,
    },
    'toy-single-spike': {
        'M': 30, 'P': 20, 'sigma_eps2': 4e-6, 'ir': 'benchmark', 'seed': TOY_SEED,
        'spike_position': 9, 'amplitude': 1.0,
    },
}


@dataclass
class DataBundle:
    """Observations plus whatever is known about how they were made"""
    z: np.ndarray
    dims: ModelDims
    meta: Dict[str, Any] = field(default_factory=dict)
    q_true: Optional[np.ndarray] = None
    x_true: Optional[np.ndarray] = None
    h_true: Optional[np.ndarray] = None
    path: Optional[Path] = None

    @property
    def has_truth(self) -> bool:
        return self.q_true is not None


class DataService:
    """Service layer for benchmark data"""

    @classmethod
    def build(cls, source: Dict[str, Any]) -> DataBundle:
        """
        Build a bundle in memory from a preset name or a generation recipe.

        Args:
            source: validated data source, {'preset': name} or {'generate': recipe}

        Returns:
            DataBundle with ground truth
        """
        if source.get('preset'):
            name = source['preset']
            if name == 'toy-single-spike':
                return cls._single_spike(PRESETS[name], name)
            return cls._from_recipe(PRESETS[name], name)
        if source.get('generate'):
            return cls._from_recipe(source['generate'], 'generate')
        raise ConfigError("Only presets and generation recipes can be built")

    @classmethod
    def resolve(cls, source: Dict[str, Any], out_dir: Path) -> DataBundle:
        """Load a data directory, or build the data and write it under out_dir/data"""
        if source.get('path'):
            return cls.load(source['path'])
        bundle = cls.build(source)
        cls.write(bundle, Path(out_dir) / 'data')
        return bundle

    @classmethod
    def _load_ir(cls, recipe: Dict[str, Any]) -> np.ndarray:
        if recipe.get('ir', 'benchmark') == 'benchmark':
            return benchmark_ir(recipe.get('P', 20))
        path = Path(recipe['ir_path'])
        if not path.exists():
            raise ConfigError(f"IR file not found: {path}")
        h = read_vector(path)
        if h.size != recipe['P'] + 1:
            raise ConfigError(f"{path}: IR has {h.size} taps, expected P+1={recipe['P'] + 1}")
        return h

    @classmethod
    def _from_recipe(cls, recipe: Dict[str, Any], origin: str) -> DataBundle:
        dims = ModelDims.from_signal(recipe['M'], recipe.get('P', 20))
        h = cls._load_ir(recipe)
        sigma_eps2 = recipe['sigma_eps2']
        z, q, x = generate_synthetic(dims, recipe['lam'], sigma_eps2, h, recipe['seed'])
        op = ConvOperator(dims, h)
        scale = 1.0

        if recipe.get('target_snr_db') is not None:
            noise = z - op.matvec(x)
            x, scale = rescale_to_snr(x, op, sigma_eps2, recipe['target_snr_db'])
            z = op.matvec(x) + noise

        meta = {
            'origin': origin,
            'dims': dims.to_dict(),
            'lambda': recipe['lam'],
            'sigma_eps2': sigma_eps2,
            'seed': recipe['seed'],
            'ir': recipe.get('ir', 'benchmark'),
            'amplitude_scale': scale,
            'snr_db': snr_db(op.matvec(x), sigma_eps2) if sigma_eps2 > 0 else None,
        }
        logger.info(f"Generated {origin} data: M={dims.M}, spikes={int(q.sum())}, "
                    f"SNR={meta['snr_db']}")
        return DataBundle(z=z, dims=dims, meta=meta, q_true=q, x_true=x, h_true=h)

    @classmethod
    def _single_spike(cls, recipe: Dict[str, Any], origin: str) -> DataBundle:
        dims = ModelDims.from_signal(recipe['M'], recipe['P'])
        h = cls._load_ir(recipe)
        op = ConvOperator(dims, h)
        q = np.zeros(dims.M, dtype=bool)
        x = np.zeros(dims.M)
        q[recipe['spike_position']] = True
        x[recipe['spike_position']] = recipe['amplitude']

        rng = np.random.default_rng(recipe['seed'])
        z = op.matvec(x) + np.sqrt(recipe['sigma_eps2']) * rng.standard_normal(dims.N)
        meta = {
            'origin': origin,
            'dims': dims.to_dict(),
            'lambda': 1.0 / dims.M,
            'sigma_eps2': recipe['sigma_eps2'],
            'seed': recipe['seed'],
            'ir': recipe.get('ir', 'benchmark'),
            'amplitude_scale': 1.0,
            'snr_db': snr_db(op.matvec(x), recipe['sigma_eps2']),
        }
        return DataBundle(z=z, dims=dims, meta=meta, q_true=q, x_true=x, h_true=h)

    @classmethod
    def write(cls, bundle: DataBundle, out_dir: Path) -> Path:
        """
        Write z.csv, meta.json and truth.json.

        Raises:
            ConfigError: the directory cannot be created or written
        """
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_vector(out_dir / 'z.csv', bundle.z)
            write_json(out_dir / 'meta.json', bundle.meta)
            if bundle.has_truth:
                write_json(out_dir / 'truth.json', {
                    'q_true': bundle.q_true.astype(int).tolist(),
                    'x_true': bundle.x_true.tolist(),
                    'h_true': bundle.h_true.tolist(),
                })
        except OSError as e:
            raise ConfigError(f"Cannot write data to {out_dir}: {e}")
        bundle.path = out_dir
        logger.info(f"Data written to {out_dir}")
        return out_dir

    @classmethod
    def load(cls, path: Any) -> DataBundle:
        """
        Load a data directory written by `write`.

        Raises:
            ConfigError: the directory fails validation
        """
        directory = Path(path)
        is_valid, errors = validate_data_dir(directory)
        if not is_valid:
            raise ConfigError("; ".join(errors))

        meta = read_json(directory / 'meta.json')
        dims = ModelDims(**meta['dims'])
        bundle = DataBundle(z=read_vector(directory / 'z.csv'), dims=dims, meta=meta,
                            path=directory)
        if (directory / 'truth.json').exists():
            truth = read_json(directory / 'truth.json')
            bundle.q_true = np.asarray(truth['q_true'], dtype=bool)
            bundle.x_true = np.asarray(truth['x_true'], dtype=float)
            bundle.h_true = np.asarray(truth['h_true'], dtype=float)
        return bundle

    @classmethod
    def init_overrides(cls, init: Optional[Dict[str, Any]],
                       bundle: DataBundle) -> Optional[Dict[str, Any]]:
        """
        Translate a validated init block into initial_state overrides.

        The 'two-spike' preset places spikes on both neighbours of the single
        true spike with least-squares amplitudes and the true IR, the noise
        variance set to the misfit of that fit: the local optimum the escape
        study starts from.
        """
        if not init:
            return None
        overrides: Dict[str, Any] = {}
        if init.get('preset') == 'two-spike':
            overrides.update(cls.two_spike_init(bundle))
        if 'h' in init:
            overrides['h'] = init['h']
        if 'q_positions' in init:
            q = np.zeros(bundle.dims.M, dtype=bool)
            positions = np.asarray(init['q_positions'], dtype=int)
            if np.any(positions >= bundle.dims.M):
                raise ConfigError(f"Initial spike positions must be below M={bundle.dims.M}")
            q[positions] = True
            overrides['q'] = q
            overrides.pop('x', None)
        if 'x' in init:
            overrides['x'] = init['x']
        for key, target in (('lam', 'lambda'), ('sigma_eps2', 'sigma_eps2'),
                            ('sigma_h2', 'sigma_h2')):
            if key in init:
                overrides[target] = init[key]
        return overrides

    @classmethod
    def two_spike_init(cls, bundle: DataBundle) -> Dict[str, Any]:
        if not bundle.has_truth or int(bundle.q_true.sum()) != 1:
            raise ConfigError("The two-spike initialization needs data with a single true spike")
        M = bundle.dims.M
        t = int(np.flatnonzero(bundle.q_true)[0])
        if not 1 <= t <= M - 2:
            raise ConfigError(f"True spike at {t} has no neighbour on both sides")

        op = ConvOperator(bundle.dims, bundle.h_true)
        positions = np.array([t - 1, t + 1])
        columns = op.matrix()[:, positions]
        amplitudes, *_ = np.linalg.lstsq(columns, bundle.z, rcond=None)
        q = np.zeros(M, dtype=bool)
        x = np.zeros(M)
        q[positions] = True
        x[positions] = amplitudes
        # noise variance at the two-spike fit, never below the generating one
        misfit = bundle.z - columns @ amplitudes
        sigma_eps2 = max(float(misfit @ misfit) / bundle.dims.N,
                         bundle.meta.get('sigma_eps2') or 1e-6)
        return {
            'q': q,
            'x': x,
            'h': bundle.h_true.copy(),
            'lambda': 2.0 / M,
            'sigma_eps2': sigma_eps2,
            'sigma_h2': float(bundle.h_true @ bundle.h_true) / (bundle.dims.P + 1),
        }
