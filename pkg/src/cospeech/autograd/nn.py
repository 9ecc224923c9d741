"""Small layer library on top of :mod:`cospeech.autograd.tensor`."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class Module:
    """Container that discovers parameters and submodules from its attributes."""

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            yield from _walk(f"{prefix}{name}", value)

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            items = value if isinstance(value, (list, tuple)) else [value]
            for item in items:
                if isinstance(item, Module):
                    yield from item.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.shape:
                raise T.ShapeError(f"{name}: checkpoint shape {arr.shape} != parameter {p.shape}")
            p.data = arr.copy()

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def _walk(name: str, value) -> Iterator[tuple[str, Tensor]]:
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True,
                 scale: float = 1.0):
        std = scale / math.sqrt(n_in)
        self.weight = parameter(rng.normal(0.0, std, size=(n_in, n_out)))
        self.bias = parameter(np.zeros(n_out)) if bias else None

    def forward(self, x):
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.gamma = parameter(np.ones(dim))
        self.beta = parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class MLP(Module):
    """GELU perceptron with an optional linear shortcut from input to output.

    The shortcut lets the network represent affine maps exactly, which the
    latent-space networks rely on for the linear rig.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator, shortcut: bool = False,
                 out_scale: float = 1.0, branch_gain: float = 1.0):
        self.branch_gain = branch_gain
        self.layers = [Linear(a, b, rng, scale=out_scale if i == len(sizes) - 2 else 1.0)
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        self.shortcut = Linear(sizes[0], sizes[-1], rng, bias=False) if shortcut else None

    def forward(self, x):
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = T.gelu(h)
        if self.shortcut is not None:
            if self.branch_gain != 1.0:
                h = h * self.branch_gain
            h = h + self.shortcut(x)
        return h


class MultiHeadAttention(Module):
    """Multi-head attention; self-attention when ``memory`` is omitted."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, out_scale: float = 1.0):
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.kv = Linear(dim, 2 * dim, rng)
        self.out = Linear(dim, dim, rng, scale=out_scale)

    def _split(self, x, n):
        b = x.shape[0]
        return x.reshape(b, n, self.heads, -1).transpose(0, 2, 1, 3)

    def forward(self, x, memory=None):
        memory = x if memory is None else memory
        b, n, d = x.shape
        m = memory.shape[1]
        kv = self.kv(memory)
        q = self._split(self.q(x), n)
        k = self._split(kv[..., :d], m)
        v = self._split(kv[..., d:], m)
        o = T.scaled_dot_product_attention(q, k, v)
        return self.out(o.transpose(0, 2, 1, 3).reshape(b, n, d))
