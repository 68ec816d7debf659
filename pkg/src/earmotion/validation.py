"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_finite_array(values, name: str = "array") -> np.ndarray:
    """Coerce to a 1-D float64 array and reject NaN/Inf."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_rate(rate_hz) -> int:
    if not isinstance(rate_hz, (int, np.integer)) or rate_hz <= 0:
        raise ValueError(f"sample_rate_hz must be a positive integer, got {rate_hz!r}")
    return int(rate_hz)


def readonly(arr: np.ndarray) -> np.ndarray:
    """Own a copy of ``arr`` and mark it read-only."""
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out
