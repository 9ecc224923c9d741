"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import GradientTape, Tensor


def numeric_gradient(fn: Callable[[], float], arr: np.ndarray, h: float = 1e-5,
                     indices=None) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. entries of ``arr`` (mutated in place).

    With ``indices`` (flat positions) only those entries are perturbed and the
    rest of the returned array is NaN.
    """
    flat = arr.reshape(-1)
    out = np.full(flat.shape, np.nan)
    positions = range(flat.size) if indices is None else indices
    for i in positions:
        orig = flat[i]
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return out.reshape(arr.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max abs difference scaled by the larger of the two gradients' max magnitude.

    NaN entries of ``numeric`` (unsampled positions) are ignored; the analytic
    scale still covers the whole tensor.
    """
    mask = ~np.isnan(numeric)
    a, n = analytic[mask], numeric[mask]
    if a.size == 0:
        return 0.0
    scale = max(np.abs(analytic).max(), np.abs(n).max(), 1e-12)
    return float(np.abs(a - n).max() / scale)


def check_gradients(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5,
                    samples_per_tensor: int | None = None, rng=None) -> list[float]:
    """Compare tape gradients of ``loss_fn()`` against central differences.

    Returns one relative error per parameter tensor.
    """
    rng = rng or np.random.default_rng(0)
    with GradientTape() as tape:
        loss = loss_fn()
    analytic = tape.gradient(loss, list(params))

    def value() -> float:
        return float(loss_fn().data)

    errors = []
    for p, a in zip(params, analytic):
        idx = None
        if samples_per_tensor is not None and p.data.size > samples_per_tensor:
            idx = rng.choice(p.data.size, size=samples_per_tensor, replace=False)
        errors.append(relative_error(a, numeric_gradient(value, p.data, h, idx)))
    return errors
