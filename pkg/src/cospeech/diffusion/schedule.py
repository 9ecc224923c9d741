"""Cosine noise schedule and the closed-form forward process."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal fractions ``alpha_bar[t]`` for ``t = 0..T``."""

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.ndim != 1 or ab.size < 2:
            raise ValueError("alpha_bar needs at least two entries")
        if ab[0] != 1.0 or ab[-1] < 0.0 or not (np.diff(ab) < 0).all():
            raise ValueError("alpha_bar must start at 1, stay >= 0 and strictly decrease")
        ab.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)

    @property
    def T(self) -> int:
        return self.alpha_bar.size - 1

    def ddim_timesteps(self, steps: int) -> np.ndarray:
        """Descending timesteps ``T = t_0 > ... > t_{steps-1} > 0``; sampling ends at 0."""
        if not 1 <= steps <= self.T:
            raise ValueError(f"ddim steps must lie in [1, {self.T}], got {steps}")
        ts = np.round(np.linspace(self.T, 0, steps + 1)).astype(np.int64)
        return ts


def cosine_schedule(T: int = 500, s: float = 0.008) -> NoiseSchedule:
    """``alpha_bar_t = f(t/T) / f(0)`` with ``f(u) = cos^2((u + s) / (1 + s) * pi / 2)``."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    u = np.arange(T + 1, dtype=np.float64) / T
    f = np.cos((u + s) / (1 + s) * math.pi / 2) ** 2
    ab = f / f[0]
    # cos(pi/2) is zero analytically; drop the ~1e-33 rounding residue
    ab[-1] = 0.0
    ab[0] = 1.0
    return NoiseSchedule(ab)


def forward_diffuse(x0, t: int, eps, schedule: NoiseSchedule) -> np.ndarray:
    """``sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps``."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} != signal shape {x0.shape}")
    t = np.asarray(t)
    if (t < 0).any() or (t > schedule.T).any():
        raise ValueError(f"timestep outside [0, {schedule.T}]")
    ab = schedule.alpha_bar[t]
    if ab.ndim:
        ab = ab.reshape(ab.shape + (1,) * (x0.ndim - ab.ndim))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
