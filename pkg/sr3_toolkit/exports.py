"""
Data Export - CSV and JSON writers for vectors, operators and result tables

Every float is written with 17 significant digits and read back with pandas'
round-trip parser, so files reproduce the in-memory values exactly.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse

from .linops import LinearOperator

logger = logging.getLogger(__name__)

# The alternate form keeps the decimal point so integral floats read back as floats
FLOAT_FORMAT = "%#.17g"

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_table(path: PathLike, frame: pd.DataFrame) -> Path:
    """Write a DataFrame as CSV with a header row"""
    path = _prepare(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


def write_vector(path: PathLike, values, column: str = "value") -> Path:
    """Write a 1-D array as a single-column CSV"""
    return write_table(path, pd.DataFrame({column: np.asarray(values, dtype=float).reshape(-1)}))


def read_vector(path: PathLike) -> np.ndarray:
    frame = read_table(path)
    return frame.iloc[:, 0].to_numpy(dtype=float)


def write_matrix(path: PathLike, matrix) -> Path:
    """Write a dense 2-D array, one CSV row per matrix row"""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    columns = [f"c{j}" for j in range(matrix.shape[1])]
    return write_table(path, pd.DataFrame(matrix, columns=columns))


def read_matrix(path: PathLike) -> np.ndarray:
    return read_table(path).to_numpy(dtype=float)


def write_triplets(path: PathLike, op: LinearOperator) -> Path:
    """Write the stored entries of an operator as (row, col, value) triplets"""
    rows, cols, vals = op.triplets()
    frame = pd.DataFrame({'row': rows.astype(np.int64), 'col': cols.astype(np.int64), 'value': vals})
    return write_table(path, frame)


def read_triplets(path: PathLike, shape: Tuple[int, int]) -> scipy.sparse.csr_matrix:
    frame = read_table(path)
    return scipy.sparse.coo_matrix(
        (frame['value'].to_numpy(dtype=float),
         (frame['row'].to_numpy(dtype=np.int64), frame['col'].to_numpy(dtype=np.int64))),
        shape=shape).tocsr()


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    path = _prepare(path)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, default=_json_default)
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path) as f:
        return json.load(f)
