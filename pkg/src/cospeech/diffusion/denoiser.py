"""Transformer decoder that predicts the clean motion window from a noisy one.

Motion frames are the query tokens. They attend to each other and then to a
memory made of one prompt token followed by one token per audio frame. The
diffusion step enters as a sinusoidal embedding passed through an MLP and
added to every motion token. Two learned vectors stand in for absent
conditions: one replaces the prompt token, the other replaces every memory
token at once.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..autograd import LayerNorm, Linear, MLP, Module, MultiHeadAttention, Tensor, parameter
from ..autograd import tensor as T
from ..autograd.tensor import ShapeError

POSE_DIM = 6


@dataclass(frozen=True)
class DenoiserConfig:
    n_layers: int = 4
    n_heads: int = 4
    dim: int = 64
    window: int = 60
    motion_dim: int = 16 + POSE_DIM
    audio_dim: int = 32
    prompt_dim: int = 64
    ffn_mult: int = 4
    T: int = 500

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "toy": DenoiserConfig(),
    "full": DenoiserConfig(n_layers=8, n_heads=4, dim=512, window=200, motion_dim=128 + POSE_DIM),
}


def preset_config(name: str, **overrides) -> DenoiserConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides)


def timestep_embedding(t: np.ndarray, dim: int, T_max: int) -> np.ndarray:
    """Sinusoidal features of ``t / T_max`` at geometrically spaced frequencies."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-math.log(1000.0) * np.arange(half) / max(1, half - 1))
    angle = (t / T_max) * 1000.0 * freqs
    emb = np.concatenate([np.sin(angle), np.cos(angle)], axis=1)
    return np.pad(emb, ((0, 0), (0, dim - 2 * half)))


def sinusoidal_positions(n: int, dim: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class DecoderLayer(Module):
    def __init__(self, dim, heads, ffn_mult, rng, out_scale):
        self.norm_self = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, heads, rng, out_scale=out_scale)
        self.norm_cross = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads, rng, out_scale=out_scale)
        self.norm_ffn = LayerNorm(dim)
        self.ffn = MLP([dim, ffn_mult * dim, dim], rng, out_scale=out_scale)

    def forward(self, h, memory):
        h = h + self.self_attn(self.norm_self(h))
        h = h + self.cross_attn(self.norm_cross(h), memory)
        return h + self.ffn(self.norm_ffn(h))


class Denoiser(Module):
    def __init__(self, config: DenoiserConfig, rng: np.random.Generator):
        c = self.config = config
        depth_scale = 1.0 / math.sqrt(2 * c.n_layers)
        self.motion_in = Linear(c.motion_dim, c.dim, rng)
        self.audio_in = Linear(c.audio_dim, c.dim, rng)
        self.prompt_in = Linear(c.prompt_dim, c.dim, rng)
        self.positions = parameter(0.5 * sinusoidal_positions(c.window, c.dim))
        self.time_mlp = MLP([c.dim, c.dim, c.dim], rng)
        self.null_prompt = parameter(rng.normal(0.0, 0.5, c.dim))
        self.null_condition = parameter(rng.normal(0.0, 0.5, c.dim))
        self.layers = [DecoderLayer(c.dim, c.n_heads, c.ffn_mult, rng, depth_scale)
                       for _ in range(c.n_layers)]
        self.norm_out = LayerNorm(c.dim)
        self.out = Linear(c.dim, c.motion_dim, rng, scale=0.1)

    def forward(self, x_t, t, audio, prompt, mask_prompt, mask_all) -> Tensor:
        """All inputs batched: x_t (B, N, d_x), t (B,), audio (B, N, d_a), prompt (B, d_p)."""
        c = self.config
        x_t = T.as_tensor(x_t)
        B, N, dx = x_t.shape
        if N > c.window:
            raise ShapeError(f"window of {N} frames exceeds the positional table ({c.window})")
        if dx != c.motion_dim:
            raise ShapeError(f"motion has {dx} channels, model expects {c.motion_dim}")
        audio = T.as_tensor(audio)
        if audio.shape != (B, N, c.audio_dim):
            raise ShapeError(f"audio shape {audio.shape} != {(B, N, c.audio_dim)}")
        t = np.broadcast_to(np.asarray(t), (B,))
        mask_prompt = np.broadcast_to(np.asarray(mask_prompt, dtype=bool), (B,))
        mask_all = np.broadcast_to(np.asarray(mask_all, dtype=bool), (B,))

        pos = self.positions[:N]
        temb = self.time_mlp(Tensor(timestep_embedding(t, c.dim, c.T)))
        h = self.motion_in(x_t) + pos + T.reshape(temb, (B, 1, c.dim))

        p_tok = T.where(mask_prompt[:, None], self.null_prompt, self.prompt_in(T.as_tensor(prompt)))
        memory = T.concatenate([T.reshape(p_tok, (B, 1, c.dim)), self.audio_in(audio) + pos], axis=1)
        memory = T.where(mask_all[:, None, None], self.null_condition, memory)

        for layer in self.layers:
            h = layer(h, memory)
        return self.out(self.norm_out(h))

    def predict(self, x_t, t, audio, prompt, mask_prompt, mask_all) -> np.ndarray:
        return self.forward(x_t, t, audio, prompt, mask_prompt, mask_all).data
