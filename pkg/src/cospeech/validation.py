"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_sequence(x, n_features: int | None = None, name: str = "sequence",
                   min_frames: int = 1) -> np.ndarray:
    """Return ``x`` as a finite (frames, features) float64 array."""
    arr = check_array(x, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=min_frames,
                      input_name=name)
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(f"{name}: expected {n_features} features per frame, got {arr.shape[1]}")
    return arr


def check_geometry(g, n_vertices: int | None = None, name: str = "geometry") -> np.ndarray:
    """Return ``g`` as a finite float64 array of shape (..., V, 3)."""
    arr = np.asarray(g, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] != 3:
        raise ValueError(f"{name}: expected (..., V, 3), got shape {arr.shape}")
    if n_vertices is not None and arr.shape[-2] != n_vertices:
        raise ValueError(f"{name}: expected {n_vertices} vertices, got {arr.shape[-2]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: contains NaN or infinity")
    return arr


def check_probability(p: float, name: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_positive_int(n, name: str) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"{name} must be a positive integer, got {n}")
    return int(n)
