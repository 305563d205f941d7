"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_float_vector(x, k: int | None = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if k is not None and v.shape[0] != k:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {k}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must contain finite values")
    return v


def as_float_matrix(x, k: int, name: str = "X") -> tuple[np.ndarray, bool]:
    """Coerce to an (n, k) float matrix.

    A single length-k vector is accepted and reshaped; the returned flag
    says whether the input was one-dimensional so callers can squeeze the
    result back.
    """
    arr = np.asarray(x, dtype=float)
    was_vector = arr.ndim == 1
    if was_vector:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a vector or matrix, got shape {arr.shape}")
    if arr.shape[1] != k:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {k}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain finite values")
    return arr, was_vector


def as_bit_vector(x, k: int | None = None, name: str = "bits") -> np.ndarray:
    v = np.asarray(x)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if k is not None and v.shape[0] != k:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {k}")
    out = v.astype(int)
    if not np.all((out == 0) | (out == 1)):
        raise ValueError(f"{name} must contain only 0/1 entries")
    return out


def check_probability(p: float, name: str = "p", open_interval: bool = True) -> float:
    p = float(p)
    ok = 0.0 < p < 1.0 if open_interval else 0.0 <= p <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} must lie in {bounds}, got {p}")
    return p


def check_positive(x: float, name: str = "x") -> float:
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"{name} must be positive, got {x}")
    return x
