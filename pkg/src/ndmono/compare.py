"""Set differences between two reconstructions on the same tiling."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import ReconResult

__all__ = ["DiffReport", "diff", "write_difference_table", "MACHINE_PRECISION"]

# differing cells whose eigenvalues are this small are attributed to rounding
MACHINE_PRECISION = 1e-12


@dataclass
class DiffReport:
    """``e_abs = |S \\ S'| + |S' \\ S|`` and ``e_rel = e_abs / |S|``."""

    only_first: np.ndarray
    only_second: np.ndarray
    n_cells: int
    cells: list

    @property
    def e_abs(self) -> int:
        return int(len(self.only_first) + len(self.only_second))

    @property
    def e_rel(self) -> float:
        return self.e_abs / self.n_cells

    @property
    def n_rounding(self) -> int:
        """Differing cells where either eigenvalue is at machine precision."""
        return sum(c["machine_precision"] for c in self.cells)

    def as_dict(self) -> dict:
        return {"e_abs": self.e_abs, "e_rel": self.e_rel, "n_cells": self.n_cells, "cells": self.cells}


def diff(first: ReconResult, second: ReconResult, eps: float = MACHINE_PRECISION) -> DiffReport:
    """Compare accepted sets; differing cells carry both smallest eigenvalues."""
    if not first.tiling.same_as(second.tiling):
        raise ValueError("reconstructions were computed on different tilings")
    a, b = first.accepted, second.accepted
    only_a = np.flatnonzero(a & ~b)
    only_b = np.flatnonzero(b & ~a)
    cells = []
    for i in np.sort(np.r_[only_a, only_b]):
        e1, e2 = float(first.eigenvalues[i]), float(second.eigenvalues[i])
        c = first.tiling.centers[i]
        cells.append({
            "cell": int(i),
            "x": float(c.real),
            "y": float(c.imag),
            "first": e1,
            "second": e2,
            "machine_precision": bool(min(abs(e1), abs(e2)) < eps),
        })
    return DiffReport(only_a, only_b, len(a), cells)


def write_difference_table(rows: dict, path) -> None:
    """Rows ``delta -> {example: DiffReport}`` as CSV with ``e_abs``/``e_rel`` per example."""
    examples = sorted({name for per in rows.values() for name in per})
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta"] + [f"{name}_{k}" for name in examples for k in ("e_abs", "e_rel")])
        for delta in sorted(rows):
            line = [repr(float(delta))]
            for name in examples:
                rep = rows[delta].get(name)
                line += ["", ""] if rep is None else [rep.e_abs, f"{rep.e_rel:.6e}"]
            w.writerow(line)
