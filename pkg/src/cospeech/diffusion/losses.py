"""Reconstruction, velocity and smoothness objectives on predicted clean sequences.

All terms are means over batch, frames and channels. Sequences are laid out
``(..., frames, channels)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import tensor as T


@dataclass(frozen=True)
class LossWeights:
    simple: float = 1.0
    velocity: float = 1.0
    smooth: float = 0.01


def training_loss(x0, x0_hat, weights: LossWeights = LossWeights(),
                  smooth_variant: str = "second_difference"):
    """Weighted sum of the three objectives.

    ``smooth_variant="printed"`` penalises ``x[i+2] + x[i] - x[i+1]`` instead
    of the second difference ``x[i+2] - 2 x[i+1] + x[i]``.

    Returns ``(total, {"simple": ..., "velocity": ..., "smooth": ..., "total": ...})``
    where ``total`` is a Tensor when ``x0_hat`` is one.
    """
    x0 = T.as_tensor(x0)
    x0_hat = T.as_tensor(x0_hat)
    if x0.shape != x0_hat.shape:
        raise T.ShapeError(f"loss: target {x0.shape} vs prediction {x0_hat.shape}")
    n = x0.shape[-2]
    if n < 3:
        raise ValueError(f"smoothness term needs at least 3 frames, got {n}")

    err = x0 - x0_hat
    l_simple = T.square(err).mean()
    vel_err = (x0[..., 1:, :] - x0[..., :-1, :]) - (x0_hat[..., 1:, :] - x0_hat[..., :-1, :])
    l_velocity = T.square(vel_err).mean()
    if smooth_variant == "second_difference":
        acc = x0_hat[..., 2:, :] - 2.0 * x0_hat[..., 1:-1, :] + x0_hat[..., :-2, :]
    elif smooth_variant == "printed":
        acc = x0_hat[..., 2:, :] + x0_hat[..., :-2, :] - x0_hat[..., 1:-1, :]
    else:
        raise ValueError(f"unknown smooth variant {smooth_variant!r}")
    l_smooth = T.square(acc).mean()

    total = weights.simple * l_simple + weights.velocity * l_velocity + weights.smooth * l_smooth
    parts = {
        "simple": float(l_simple.data),
        "velocity": float(l_velocity.data),
        "smooth": float(l_smooth.data),
        "total": float(total.data),
    }
    return total, parts


def loss_terms(x0: np.ndarray, x0_hat: np.ndarray, **kwargs) -> dict[str, float]:
    """Per-term breakdown for plain arrays."""
    return training_loss(np.asarray(x0, float), np.asarray(x0_hat, float), **kwargs)[1]
