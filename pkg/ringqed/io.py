"""CSV and JSON readers/writers for datasets, fits and pulse sequences.

Floats are written with a fixed format so identical data gives identical bytes.
"""

import json
from typing import Sequence

import numpy as np

from ringqed.errors import ValidationError

FLOAT_FORMAT = "%.10g"

SPECTRUM_COLUMNS = ("wavelength_nm", "intensity")
DECAY_COLUMNS = ("time_ns", "counts")
ODMR_COLUMNS = ("freq_MHz", "contrast")
RABI_COLUMNS = ("duration_ns", "signal")


def write_columns(path: str, columns: Sequence[str], *arrays) -> None:
    """Write equal-length arrays as a CSV with a header row."""
    if len(columns) != len(arrays):
        raise ValidationError(f"{len(columns)} column names for {len(arrays)} arrays")
    data = np.column_stack([np.asarray(a, dtype=float) for a in arrays])
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(columns), comments="")


def read_columns(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a headed CSV; returns (column names, 2-D array)."""
    with open(path, "r") as f:
        header = f.readline().strip()
    if not header:
        raise ValidationError(f"{path} is empty")
    names = tuple(header.split(","))
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        raise ValidationError(f"cannot parse {path}: {e}") from e
    if data.shape[1] != len(names):
        raise ValidationError(f"{path}: {len(names)} header columns, {data.shape[1]} data columns")
    return names, data


def read_xy(path: str) -> tuple[tuple[str, str], np.ndarray, np.ndarray]:
    """Read a two-column dataset as produced by the generators."""
    names, data = read_columns(path)
    if len(names) != 2:
        raise ValidationError(f"{path}: expected two columns, got {len(names)}")
    return (names[0], names[1]), data[:, 0], data[:, 1]


def write_matrix(path: str, row_label: str, row_values, column_values, matrix) -> None:
    """Write a matrix with a labelled first column and numeric column headers."""
    matrix = np.asarray(matrix, dtype=float)
    header = ",".join([row_label] + [FLOAT_FORMAT % v for v in column_values])
    data = np.column_stack((np.asarray(row_values, dtype=float), matrix))
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="")


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        f.write(to_json(obj))


def read_json(path: str):
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"cannot parse {path}: {e}") from e


def write_dataset(path: str, columns: Sequence[str], *arrays, fmt: str = "csv") -> None:
    """Write a dataset as CSV, or as a JSON object of column lists."""
    if fmt == "csv":
        write_columns(path, columns, *arrays)
    elif fmt == "json":
        write_json(path, {name: [float(v) for v in np.asarray(a, dtype=float)] for name, a in zip(columns, arrays)})
    else:
        raise ValidationError(f"unknown format '{fmt}'")
