"""Bits shared by the two training loops."""
from __future__ import annotations

import math


class TrainingDiverged(RuntimeError):
    pass


class DivergenceGuard:
    """Abort when the loss exceeds ``factor`` times the first observed loss or goes non-finite."""

    def __init__(self, factor: float = 1e3):
        self.factor = factor
        self.initial: float | None = None

    def check(self, step: int, loss: float) -> None:
        if not math.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at step {step}")
        if self.initial is None:
            self.initial = loss
        elif loss > self.factor * max(self.initial, 1e-12):
            raise TrainingDiverged(
                f"loss {loss:.4g} at step {step} exceeds {self.factor:g}x the initial {self.initial:.4g}")


def cosine_lr(step: int, total: int, base: float, warmup: int = 0, floor: float = 0.05) -> float:
    """Linear warmup followed by cosine decay to ``floor * base``."""
    if warmup and step < warmup:
        return base * (step + 1) / warmup
    if total <= warmup:
        return base
    u = (step - warmup) / max(1, total - warmup)
    return base * (floor + (1 - floor) * 0.5 * (1 + math.cos(math.pi * min(u, 1.0))))
