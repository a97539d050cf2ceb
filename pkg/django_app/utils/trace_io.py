"""
BG Deconvolution Trace Files
Readers and writers for the on-disk formats: headerless CSV with 17
significant digits, 0/1 character rows for q, schema-versioned JSON.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from bgdeconv.exceptions import ConfigError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = '%.17g'

PathLike = Union[str, Path]


def chain_q_path(directory: Path, j: int) -> Path:
    return directory / f"chain_{j}_q.txt"


def chain_params_path(directory: Path, j: int) -> Path:
    return directory / f"chain_{j}_params.csv"


def write_vector(path: PathLike, values: np.ndarray) -> None:
    """One value per line"""
    np.savetxt(path, np.asarray(values, dtype=float).reshape(-1), fmt=FLOAT_FORMAT)


def read_vector(path: PathLike) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)


def write_rows(path: PathLike, rows: np.ndarray) -> None:
    """Comma-separated records, one per line"""
    rows = np.asarray(rows, dtype=float)
    if rows.size == 0:
        Path(path).write_text('')
        return
    np.savetxt(path, rows, fmt=FLOAT_FORMAT, delimiter=',')


def read_rows(path: PathLike) -> np.ndarray:
    text = Path(path).read_text()
    if not text.strip():
        return np.zeros((0, 0))
    return np.loadtxt(path, dtype=float, delimiter=',', ndmin=2)


def write_bits(path: PathLike, q_rows: np.ndarray) -> None:
    """q patterns as rows of '0'/'1' characters"""
    lines = [''.join('1' if bit else '0' for bit in row) for row in np.asarray(q_rows, dtype=bool)]
    Path(path).write_text(''.join(line + '\n' for line in lines))


def read_bits(path: PathLike) -> np.ndarray:
    lines = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    if not lines:
        return np.zeros((0, 0), dtype=bool)
    widths = {len(line) for line in lines}
    if len(widths) != 1:
        raise ConfigError(f"{path}: q rows have inconsistent lengths {sorted(widths)}")
    return np.array([[c == '1' for c in line] for line in lines], dtype=bool)


def write_json(path: PathLike, payload: Dict[str, Any]) -> None:
    """Write a JSON document stamped with the schema version; keys are sorted"""
    document = {'schema_version': SCHEMA_VERSION, **payload}
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
    logger.debug(f"Wrote {path}")


def read_json(path: PathLike) -> Dict[str, Any]:
    """
    Read a schema-versioned JSON document.

    Raises:
        ConfigError: missing file, invalid JSON or unknown schema version
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Missing file: {path}")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})")
    version = document.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema version {version}")
    return document
