"""CSV and manifest I/O with reproducibility-grade formatting.

Numbers are written with 17 significant digits (lossless round-trip for
doubles), so reruns with the same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .exceptions import ConfigError


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, arr: np.ndarray) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(f"col_{j + 1}" for j in range(arr.shape[1])) + "\n")
        for row in arr:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    """Parse a numeric CSV matrix; a non-numeric first row is treated as a
    header.  Malformed cells report their row and column."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            raw = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in raw if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    start = 0
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        start = 1
    if start == len(rows):
        raise ConfigError(f"{path}: header but no data rows")
    width = len(rows[start])
    out = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:], start=start):
        if len(row) != width:
            raise ConfigError(
                f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i - start, j] = float(cell)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}: row {i + 1}, column {j + 1}: "
                    f"could not parse {cell.strip()!r}") from exc
    return out


def write_manifest(path, entries: dict) -> None:
    """Plain key=value manifest; values stringified deterministically."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for key, value in entries.items():
            if isinstance(value, float):
                value = fmt(value)
            elif isinstance(value, (list, tuple)):
                value = ";".join(str(v) for v in value)
            fh.write(f"{key}={value}\n")


def write_rows_csv(path, header: list[str], rows: list[list]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, float) else str(v)
                             for v in row])
