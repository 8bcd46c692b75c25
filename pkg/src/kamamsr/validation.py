"""Input validation helpers used by the estimators and module functions."""

from __future__ import annotations

import numpy as np


def as_float_1d(x, name: str = "array", *, min_len: int = 0, require_finite: bool = True) -> np.ndarray:
    """Coerce to a 1-d float array, checking length and finiteness."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_len:
        raise ValueError(f"{name} must have at least {min_len} entries, got {arr.shape[0]}")
    if require_finite and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_float_2d(x, name: str = "array", *, n_cols: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    return arr


def check_same_length(*pairs: tuple[str, object]) -> int:
    """Check that all named sequences share one length; return it."""
    lengths = {name: len(seq) for name, seq in pairs}  # type: ignore[arg-type]
    distinct = set(lengths.values())
    if len(distinct) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in lengths.items())
        raise ValueError(f"misaligned inputs: {detail}")
    return distinct.pop() if distinct else 0


def check_probability_rows(p: np.ndarray, name: str = "probabilities", tol: float = 1e-8) -> None:
    """Each row must be a distribution: entries in [0, 1], summing to 1."""
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError(f"{name} has entries outside [0, 1]")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValueError(f"{name} rows do not sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.3g})")


def check_in_range(value: float, lo: float, hi: float, name: str) -> None:
    if not (lo <= value <= hi):
        raise ValueError(f"{name} must be in [{lo}, {hi}], got {value}")
