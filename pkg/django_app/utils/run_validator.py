"""
Run Directory Validation Utilities
Checks data and run directories before the services load them
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from .trace_io import SCHEMA_VERSION, chain_params_path, chain_q_path

DATA_FILES = ['z.csv', 'meta.json']


def validate_data_dir(path: Any) -> Tuple[bool, List[str]]:
    """
    Validate a generated data directory

    Args:
        path: directory holding z.csv, meta.json and optionally truth.json

    Returns:
        Tuple of (is_valid, error_messages)
    """
    errors = []
    directory = Path(path)

    if not directory.is_dir():
        errors.append(f"Data directory not found: {directory}")
        return (False, errors)

    for name in DATA_FILES:
        if not (directory / name).exists():
            errors.append(f"Missing data file: {directory / name}")
    if errors:
        return (False, errors)

    meta = _load_document(directory / 'meta.json', errors)
    if meta is None:
        return (False, errors)
    _validate_dims(meta.get('dims'), errors)

    try:
        z = np.loadtxt(directory / 'z.csv', dtype=float, ndmin=1)
    except ValueError as e:
        errors.append(f"z.csv is not numeric: {e}")
        return (False, errors)

    if not np.all(np.isfinite(z)):
        errors.append("z.csv contains non-finite values")
    dims = meta.get('dims') or {}
    if 'N' in dims and z.size != dims['N']:
        errors.append(f"z.csv has {z.size} samples, meta.json declares N={dims['N']}")

    if (directory / 'truth.json').exists():
        truth = _load_document(directory / 'truth.json', errors)
        if truth is not None and 'M' in dims:
            for key in ('q_true', 'x_true'):
                if len(truth.get(key, [])) != dims['M']:
                    errors.append(f"truth.json '{key}' must have length M={dims['M']}")

    return (len(errors) == 0, errors)


def validate_run_dir(path: Any) -> Tuple[bool, List[str]]:
    """
    Validate a run directory written by the run command

    Args:
        path: directory holding run.json and the per-chain traces

    Returns:
        Tuple of (is_valid, error_messages)
    """
    errors = []
    directory = Path(path)

    if not directory.is_dir():
        errors.append(f"Run directory not found: {directory}")
        return (False, errors)

    run = _load_document(directory / 'run.json', errors)
    if run is None:
        return (False, errors)

    chains = run.get('chains')
    if not isinstance(chains, list) or not chains:
        errors.append("run.json has no chain records")
        return (False, errors)

    for record in chains:
        j = record.get('index')
        if not isinstance(j, int):
            errors.append("Chain record without an integer 'index'")
            continue
        for file_path in (chain_q_path(directory, j), chain_params_path(directory, j)):
            if not file_path.exists():
                errors.append(f"Missing trace file: {file_path}")

    return (len(errors) == 0, errors)


def _load_document(path: Path, errors: List[str]) -> Any:
    """Load a JSON document, recording problems instead of raising"""
    if not path.exists():
        errors.append(f"Missing file: {path}")
        return None
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        errors.append(f"{path.name}: invalid JSON ({e})")
        return None
    if not isinstance(document, dict):
        errors.append(f"{path.name}: top level must be an object")
        return None
    if document.get('schema_version') != SCHEMA_VERSION:
        errors.append(f"{path.name}: unsupported schema version {document.get('schema_version')}")
    return document


def _validate_dims(dims: Dict, errors: List[str]) -> None:
    """Validate the N, M, P block of meta.json"""
    if not isinstance(dims, dict):
        errors.append("meta.json missing 'dims' object")
        return

    for key in ('N', 'M', 'P'):
        if not isinstance(dims.get(key), int):
            errors.append(f"dims.{key} must be an integer")
    if errors:
        return

    if dims['M'] != dims['N'] - dims['P']:
        errors.append(f"dims violate M = N - P (N={dims['N']}, M={dims['M']}, P={dims['P']})")
    if dims['M'] < 1 or dims['P'] < 0:
        errors.append("dims need M >= 1 and P >= 0")
