"""Trajectory CSV files: a header row of variable names, one row per step."""
from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from .parser import VariableMap


class ColumnMismatch(ValueError):
    def __init__(self, missing, extra):
        self.missing = list(missing)
        self.extra = list(extra)
        parts = []
        if self.missing:
            parts.append("missing columns: " + ", ".join(self.missing))
        if self.extra:
            parts.append("unexpected columns: " + ", ".join(self.extra))
        super().__init__("; ".join(parts) or "column order does not match variable indices")


def write_trajectory_csv(path, states, names: Sequence[str]) -> None:
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    if states.shape[1] != len(names):
        raise ValueError(f"{len(names)} names for {states.shape[1]} state components")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in states:
            w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path, vars: VariableMap = None) -> np.ndarray:
    """Load a (T, n) trajectory; with ``vars`` the header must match its names in index order."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if vars is not None:
        want = vars.names
        if header != want:
            raise ColumnMismatch(
                [n for n in want if n not in header], [n for n in header if n not in want]
            )
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows have {data.shape[1]} fields, header has {len(header)}")
    return data
