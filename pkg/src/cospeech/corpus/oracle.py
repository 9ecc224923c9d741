"""Ground-truth motion as a fixed affine function of the audio features.

Features are smoothed over five frames, shifted to a fixed reference level
and scaled. Each style owns an affine map to the latent,
``Z = W_style u + c_style``, with ``W_style`` a style-specific perturbation of
one shared matrix, so styles differ but all depend on the audio. Head pose
follows the mean feature energy: pitch nods with the energy, yaw follows its
rate of change, roll is a faint echo of the pitch. Translations stay zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..conditioning.prompt import BUILTIN_STYLES, canonical_token

# log-mel level of typical speech-like input; features at this level map to u = 0
FEATURE_REFERENCE = -5.0
FEATURE_SCALE = 2.5
SMOOTH_FRAMES = 5
POSE_DIM = 6


@dataclass(frozen=True)
class StyleParams:
    weight: np.ndarray  # (d_z, d_a)
    offset: np.ndarray  # (d_z,)
    nod: float
    shake: float
    pitch0: float


@dataclass(frozen=True)
class MotionOracle:
    """Seeded family of per-style affine maps from features to (latent, pose)."""

    latent_dim: int = 16
    feature_dim: int = 32
    seed: int = 0
    style_spread: float = 0.6
    gain: float = 0.8

    def style(self, token: str, styles: dict[str, int] | None = None) -> StyleParams:
        table = BUILTIN_STYLES if styles is None else styles
        token = canonical_token(token)
        if token not in table:
            raise KeyError(f"unknown style {token!r}; known: {sorted(table)}")
        shared = np.random.default_rng([self.seed, 0]).standard_normal((self.latent_dim, self.feature_dim))
        rng = np.random.default_rng([self.seed, table[token]])
        specific = rng.standard_normal((self.latent_dim, self.feature_dim))
        weight = (shared + self.style_spread * specific) * self.gain / np.sqrt(self.feature_dim)
        offset = rng.normal(0.0, 0.5, self.latent_dim)
        nod, shake = rng.uniform(0.5, 1.5, size=2)
        return StyleParams(weight, offset, float(nod), float(shake), float(rng.normal(0.0, 0.05)))

    def normalised(self, features: np.ndarray) -> np.ndarray:
        a = uniform_filter1d(np.asarray(features, dtype=np.float64), SMOOTH_FRAMES, axis=0,
                             mode="nearest")
        return (a - FEATURE_REFERENCE) / FEATURE_SCALE

    def __call__(self, features: np.ndarray, style: str,
                 styles: dict[str, int] | None = None) -> tuple[np.ndarray, np.ndarray]:
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.feature_dim or feats.shape[0] < 1:
            raise ValueError(f"features must be (frames, {self.feature_dim}), got {feats.shape}")
        p = self.style(style, styles)
        u = self.normalised(feats)
        latent = u @ p.weight.T + p.offset
        energy = u.mean(axis=1)
        speed = np.gradient(energy) if len(energy) > 1 else np.zeros(1)
        pose = np.zeros((len(u), POSE_DIM))
        pose[:, 0] = p.pitch0 + 0.15 * p.nod * energy
        pose[:, 1] = 0.6 * p.shake * speed
        pose[:, 2] = 0.03 * p.nod * energy
        return latent, pose


def synth_oracle(features: np.ndarray, style: str, seed: int = 0, latent_dim: int = 16,
                 styles: dict[str, int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth ``(Z, Theta)`` for one clip."""
    feats = np.asarray(features)
    return MotionOracle(latent_dim, feats.shape[-1], seed)(feats, style, styles)
