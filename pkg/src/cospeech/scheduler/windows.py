"""Window planning for long sequences.

Windows start every ``N - O`` frames; the last one is pulled back so it ends
exactly at ``L``, which can make its overlap with the previous window longer
than ``O``. Each window gets a sin^2 ramp over every overlap it actually has,
and the ramps are normalised per frame so the weights of the covering
windows always sum to one, even where three or more windows meet.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WindowPlan:
    total: int
    window: int
    overlap: int
    starts: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # per window, normalised blend weights

    @property
    def n_windows(self) -> int:
        return len(self.starts)

    def lengths(self) -> list[int]:
        return [w.shape[0] for w in self.weights]

    def bounds(self) -> list[tuple[int, int]]:
        return [(s, s + n) for s, n in zip(self.starts, self.lengths())]

    def weight_sum(self) -> np.ndarray:
        """Per-frame sum of window weights; ones for a valid plan."""
        out = np.zeros(self.total)
        for (a, b), w in zip(self.bounds(), self.weights):
            out[a:b] += w
        return out

    def blended_frames(self) -> np.ndarray:
        """Boolean mask of frames covered by more than one window."""
        count = np.zeros(self.total, int)
        for a, b in self.bounds():
            count[a:b] += 1
        return count > 1


def _ramp(n: int) -> np.ndarray:
    """Rising sin^2 ramp over ``n`` frames, sampled at frame centres."""
    return np.sin(0.5 * np.pi * (np.arange(n) + 0.5) / n) ** 2


def window_starts(L: int, N: int, O: int) -> list[int]:
    if L <= N:
        return [0]
    stride = N - O
    starts = [0]
    while starts[-1] + N < L:
        nxt = starts[-1] + stride
        starts.append(min(nxt, L - N))
    return starts


def plan_windows(L: int, N: int, O: int) -> WindowPlan:
    """Cover ``L`` frames with windows of length ``N`` overlapping by at least ``O``."""
    for name, v in (("L", L), ("N", N)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    if int(O) != O or not 0 <= O < N:
        raise ValueError(f"overlap must satisfy 0 <= O < N={N}, got {O!r}")
    L, N, O = int(L), int(N), int(O)
    starts = window_starts(L, N, O)
    n = min(N, L)
    bounds = [(s, s + n) for s in starts]
    return WindowPlan(L, N, O, tuple(starts), taper_weights(bounds, L))


def taper_weights(bounds, total: int) -> tuple[np.ndarray, ...]:
    """Normalised blend weights for windows ``[a, b)`` sorted by start."""
    raw = []
    for i, (a, b) in enumerate(bounds):
        w = np.ones(b - a)
        if i > 0 and bounds[i - 1][1] > a:
            left = min(bounds[i - 1][1] - a, b - a)
            w[:left] *= _ramp(left)
        if i + 1 < len(bounds) and b > bounds[i + 1][0]:
            right = min(b - bounds[i + 1][0], b - a)
            w[b - a - right:] *= _ramp(right)[::-1]
        raw.append(w)
    norm = np.zeros(total)
    for (a, b), w in zip(bounds, raw):
        norm[a:b] += w
    if not np.all(norm > 0):
        raise ValueError("windows leave frames uncovered")
    return tuple(w / norm[a:b] for (a, b), w in zip(bounds, raw))


def second_differences(x: np.ndarray) -> np.ndarray:
    """Per-frame L2 norm of ``x[i+1] - 2 x[i] + x[i-1]``, for frames 1..L-2."""
    x = np.asarray(x, dtype=np.float64)
    return np.linalg.norm(x[2:] - 2.0 * x[1:-1] + x[:-2], axis=1)


def seam_ratio(x: np.ndarray, seam: np.ndarray) -> float:
    """Largest second difference on ``seam`` frames over the 99th percentile elsewhere.

    A value at or below 2 means the joins are no rougher than the ordinary
    variation inside windows.
    """
    seam = np.asarray(seam, bool)
    d = second_differences(x)
    inner = seam[1:-1]
    if not inner.any() or inner.all():
        raise ValueError("need both seam and interior frames")
    return float(d[inner].max() / np.percentile(d[~inner], 99))
