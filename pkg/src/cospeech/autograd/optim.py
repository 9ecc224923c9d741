"""AdamW with decoupled weight decay."""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from .tensor import Tensor

log = logging.getLogger(__name__)


class AdamW:
    """Adam with weight decay applied directly to the parameters.

    The update per tensor is ``w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + wd * w)``
    with bias-corrected moments. A tensor whose gradient contains NaN or inf
    is left untouched for that step and its moments are not advanced.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads: Sequence[np.ndarray]) -> int:
        """Apply one update; returns the number of tensors skipped."""
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        skipped = 0
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.isfinite(g).all():
                log.warning("skipping update of parameter %d (%s): non-finite gradient", i, p.shape)
                skipped += 1
                continue
            m, v = self.m[i], self.v[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            denom = np.sqrt(v / c2)
            denom += self.eps
            update = m / denom
            update *= 1.0 / c1
            if self.weight_decay:
                update += self.weight_decay * p.data
            update *= self.lr
            p.data = p.data - update
        return skipped


def adamw_step(params, grads, state=None, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
               weight_decay=0.0) -> AdamW:
    """Functional form: one AdamW step, creating the optimizer state on first use."""
    if state is None:
        state = AdamW(params, lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
    state.step(grads)
    return state


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if np.isfinite(total) and total > max_norm:
        factor = max_norm / total
        for i in range(len(grads)):
            grads[i] = grads[i] * factor
    return total
