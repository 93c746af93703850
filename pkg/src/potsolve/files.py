"""Plain-text file formats for marginals, cost matrices and run traces.

Marginals are one decimal per line; cost matrices are comma-separated
rows; traces are line-delimited JSON records.  Floats are written with 17
significant digits so a write/read round trip is bit exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_marginal",
    "read_marginal",
    "write_cost",
    "read_cost",
    "write_trace",
    "read_trace",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_marginal(path, vec: np.ndarray) -> None:
    Path(path).write_text("\n".join(_fmt(x) for x in np.asarray(vec)) + "\n")


def read_marginal(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([float(ln) for ln in lines])


def write_cost(path, C: np.ndarray) -> None:
    rows = (",".join(_fmt(x) for x in row) for row in np.asarray(C))
    Path(path).write_text("\n".join(rows) + "\n")


def read_cost(path) -> np.ndarray:
    rows = []
    for ln in Path(path).read_text().splitlines():
        if ln.strip():
            rows.append([float(tok) for tok in ln.split(",")])
    return np.array(rows)


def write_trace(path, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, allow_nan=True) + "\n")


def read_trace(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for ln in fh:
            if ln.strip():
                out.append(json.loads(ln))
    return out
