"""On-disk cache for polynomial-path ``H_rho`` strips.

Set ``NDMONO_CACHE_DIR`` to enable it. Keys use the exact binary value of
``rho`` so cached and recomputed strips are bit-identical.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

ENV_VAR = "NDMONO_CACHE_DIR"


def cache_dir() -> Path | None:
    root = os.environ.get(ENV_VAR)
    if not root:
        return None
    path = Path(root).expanduser()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _file(root: Path, rho: float, rows: int, cols: int, precision_bits: int) -> Path:
    tag = float(rho).hex().replace(".", "_").replace("+", "p").replace("-", "m")
    return root / f"hrho_{rows}x{cols}_p{precision_bits}_{tag}.npy"


def load_h_rho(rho, rows, cols, precision_bits):
    root = cache_dir()
    if root is None:
        return None
    f = _file(root, rho, rows, cols, precision_bits)
    if not f.exists():
        return None
    arr = np.load(f)
    return arr if arr.shape == (rows, cols) else None


def store_h_rho(rho, rows, cols, precision_bits, arr) -> None:
    root = cache_dir()
    if root is None:
        return
    f = _file(root, rho, rows, cols, precision_bits)
    tmp = f.with_suffix(f".{os.getpid()}.tmp.npy")
    np.save(tmp, arr)
    os.replace(tmp, f)
