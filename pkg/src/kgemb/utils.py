"""Small input-validation helpers used across the estimators."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def check_matrix(X, name="X", dtype=np.float64) -> np.ndarray:
    """Coerce to a finite 2-D array of the given dtype."""
    arr = np.asarray(X, dtype=dtype)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_vector(x, name="x", dim=None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if dim is not None and arr.shape[0] != dim:
        raise ValidationError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_rng(rng) -> np.random.Generator:
    """Accept a Generator, a seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
