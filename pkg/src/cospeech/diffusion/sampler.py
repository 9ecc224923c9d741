"""Deterministic DDIM sampling with three-branch guidance.

Everything here works in the model's normalised space. A sampling run is
described by a list of window jobs laid over a sequence of ``L`` frames. At
every step each job predicts the clean window (once per distinct prompt it
carries), the per-job predictions are blended into one sequence with the
supplied weights, and a single DDIM update moves the whole sequence to the
next noise level. Plain single-window sampling is the one-job special case
and takes no blending arithmetic at all, so it is bitwise equal to the
windowed path whenever only one window is needed.

Initial noise is drawn per absolute frame index, so overlapping windows
start from the same noise where they overlap and results do not depend on
how frames are grouped into windows or batches.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .guidance import GuidanceConfig, cfg_combine
from .schedule import NoiseSchedule, cosine_schedule


class ConditionalModel(Protocol):
    def __call__(self, x_t: np.ndarray, t: np.ndarray, audio: np.ndarray, prompt: np.ndarray,
                 mask_prompt: np.ndarray, mask_all: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Normalizer:
    """Per-channel affine map ``(x - mean) / scale`` and its inverse."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray, min_scale: float = 1e-8) -> "Normalizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        return cls(mean, np.where(std > min_scale, std, 1.0))

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    def forward(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale

    def inverse(self, x):
        return np.asarray(x) * self.scale + self.mean


def frame_noise(seed: int, start: int, n: int, dim: int) -> np.ndarray:
    """Standard normal noise, one independent stream per absolute frame index."""
    return np.stack([np.random.default_rng([seed, start + i]).standard_normal(dim)
                     for i in range(n)]) if n else np.zeros((0, dim))


def ddim_update(x_t: np.ndarray, x0: np.ndarray, ab_t: float, ab_next: float) -> np.ndarray:
    """Move from level ``ab_t`` to ``ab_next`` along the deterministic (eta=0) path."""
    eps = (x_t - np.sqrt(ab_t) * x0) / np.sqrt(1.0 - ab_t)
    return np.sqrt(ab_next) * x0 + np.sqrt(1.0 - ab_next) * eps


@dataclass(frozen=True)
class PromptUse:
    """One prompt active in a window, with optional per-frame mixing weights."""

    vector: np.ndarray
    is_null: bool = False
    weights: np.ndarray | None = None  # (n,), None means 1 everywhere


@dataclass(frozen=True)
class WindowJob:
    start: int
    audio: np.ndarray  # (n, d_a), normalised
    prompts: tuple[PromptUse, ...]
    blend: np.ndarray | None = None  # (n,) weight in the global blend; None means sole owner

    @property
    def length(self) -> int:
        return self.audio.shape[0]

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass
class Sampler:
    """A conditional x0-model plus everything needed to sample from it."""

    model: ConditionalModel
    motion_dim: int
    prompt_dim: int
    schedule: NoiseSchedule = field(default_factory=cosine_schedule)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    ddim_steps: int = 50
    motion_norm: Normalizer | None = None
    audio_norm: Normalizer | None = None
    capacity: int = 8  # windows per model call
    threads: int = 1
    rotation_channels: slice | None = None
    window: int | None = None  # longest window the model accepts

    def __post_init__(self):
        if not 1 <= self.ddim_steps <= self.schedule.T:
            raise ValueError(f"ddim_steps must lie in [1, {self.schedule.T}], got {self.ddim_steps}")
        if self.capacity < 1 or self.threads < 1:
            raise ValueError("capacity and threads must be positive")

    # conditioning helpers
    def norm_audio(self, features: np.ndarray) -> np.ndarray:
        return self.audio_norm.forward(features) if self.audio_norm else np.asarray(features, float)

    def finish(self, x: np.ndarray) -> np.ndarray:
        out = self.motion_norm.inverse(x) if self.motion_norm else np.array(x)
        if self.rotation_channels is not None:
            out[:, self.rotation_channels] = np.clip(out[:, self.rotation_channels], -np.pi, np.pi)
        return out

    def guided_x0(self, x_t, t, audio, prompt, prompt_null) -> np.ndarray:
        """Combine the unconditional, audio-only and full predictions for a batch of windows."""
        B = x_t.shape[0]
        c_u, c_a, c_f = self.guidance.coefficients
        branches = []  # (mask_prompt, mask_all) per branch with nonzero weight
        if c_u:
            branches.append(("u", np.ones(B, bool), np.ones(B, bool)))
        if c_a:
            branches.append(("a", np.ones(B, bool), np.zeros(B, bool)))
        if c_f:
            branches.append(("f", np.asarray(prompt_null, bool), np.zeros(B, bool)))
        k = len(branches)
        out = self.model(np.concatenate([x_t] * k), np.full(k * B, t),
                         np.concatenate([audio] * k), np.concatenate([prompt] * k),
                         np.concatenate([b[1] for b in branches]),
                         np.concatenate([b[2] for b in branches]))
        parts = {name: out[i * B:(i + 1) * B] for i, (name, _, _) in enumerate(branches)}
        return cfg_combine(parts.get("u"), parts.get("a"), parts.get("f"),
                           self.guidance.s_audio, self.guidance.s_prompt)

    def _predict_units(self, units, t) -> list[np.ndarray]:
        """Evaluate (x window, audio, prompt) units in chunks of ``capacity`` same-length windows."""
        chunks, cur = [], []
        for i, u in enumerate(units):
            if cur and (len(cur) == self.capacity or units[cur[0]][0].shape != u[0].shape):
                chunks.append(cur)
                cur = []
            cur.append(i)
        if cur:
            chunks.append(cur)

        def run(idx):
            x = np.stack([units[i][0] for i in idx])
            a = np.stack([units[i][1] for i in idx])
            p = np.stack([units[i][2].vector for i in idx])
            null = np.array([units[i][2].is_null for i in idx])
            return self.guided_x0(x, t, a, p, null)

        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(run, chunks))
        else:
            results = [run(c) for c in chunks]
        preds: list[np.ndarray] = [None] * len(units)  # type: ignore[list-item]
        for idx, res in zip(chunks, results):
            for j, i in enumerate(idx):
                preds[i] = res[j]
        return preds

    def predict_jobs(self, x_windows: Sequence[np.ndarray], jobs: Sequence[WindowJob], t: int
                     ) -> list[np.ndarray]:
        """Clean-window estimate per job, mixing its prompts per frame."""
        units, owner = [], []
        for j, (xw, job) in enumerate(zip(x_windows, jobs)):
            for pu in job.prompts:
                units.append((xw, job.audio, pu))
                owner.append(j)
        preds = self._predict_units(units, t)
        out: list[np.ndarray | None] = [None] * len(jobs)
        for (xw, _, pu), j, pred in zip(units, owner, preds):
            if pu.weights is None:
                out[j] = pred if out[j] is None else out[j] + pred
            else:
                term = pu.weights[:, None] * pred
                out[j] = term if out[j] is None else out[j] + term
        return out  # type: ignore[return-value]


PostStep = Callable[[np.ndarray, int, int], np.ndarray]
X0Hook = Callable[[int, np.ndarray], np.ndarray]
Recorder = Callable[[int, int, np.ndarray], None]


def _blend(total: int, dim: int, jobs: Sequence[WindowJob], preds: Sequence[np.ndarray]) -> np.ndarray:
    if len(jobs) == 1 and jobs[0].blend is None and jobs[0].length == total:
        return preds[0]
    out = np.zeros((total, dim))
    for job, pred in zip(jobs, preds):
        w = job.blend if job.blend is not None else np.ones(job.length)
        out[job.start:job.stop] += w[:, None] * pred
    return out


def run_jobs(sampler: Sampler, jobs: Sequence[WindowJob], total: int, seed: int,
             post_step: PostStep | None = None, recorder: Recorder | None = None,
             blend: str = "per_step", x_init: np.ndarray | None = None,
             x0_hook: X0Hook | None = None, resample: int = 1) -> np.ndarray:
    """Sample ``total`` frames covered by ``jobs``; returns de-normalised motion.

    ``x0_hook(step, x0)`` may rewrite the blended clean estimate before the
    update, ``post_step(x, step, t_next)`` the state after it. ``resample > 1``
    repeats every step that many times, diffusing the result back to the
    step's starting level in between, so constraints applied by
    ``post_step`` have more chances to propagate.
    """
    if resample < 1:
        raise ValueError(f"resample must be >= 1, got {resample}")
    if blend not in ("per_step", "final"):
        raise ValueError(f"blend must be 'per_step' or 'final', got {blend!r}")
    covered = np.zeros(total, bool)
    for job in jobs:
        covered[job.start:job.stop] = True
    if not covered.all():
        raise ValueError("window jobs leave frames uncovered")
    dim = sampler.motion_dim
    ab = sampler.schedule.alpha_bar
    ts = sampler.schedule.ddim_timesteps(sampler.ddim_steps)
    x = frame_noise(seed, 0, total, dim) if x_init is None else np.array(x_init, dtype=np.float64)
    if blend == "final":
        if post_step is not None or x0_hook is not None or resample != 1:
            raise ValueError("step hooks need per-step blending")
        xs = [x[j.start:j.stop].copy() for j in jobs]
        for step, (t, t_next) in enumerate(zip(ts[:-1], ts[1:])):
            preds = sampler.predict_jobs(xs, jobs, int(t))
            xs = [ddim_update(xw, p, ab[t], ab[t_next]) for xw, p in zip(xs, preds)]
            if recorder is not None:
                recorder(step, int(t), _blend(total, dim, jobs, preds))
        return sampler.finish(_blend(total, dim, jobs, xs))
    for step, (t, t_next) in enumerate(zip(ts[:-1], ts[1:])):
        for r in range(resample):
            if r:
                x = renoise(x, ab[t_next], ab[t], seed, step, r)
            preds = sampler.predict_jobs([x[j.start:j.stop] for j in jobs], jobs, int(t))
            x0 = _blend(total, dim, jobs, preds)
            if x0_hook is not None:
                x0 = x0_hook(step, x0)
            if recorder is not None:
                recorder(step, int(t), x0)
            x = ddim_update(x, x0, ab[t], ab[t_next])
            if post_step is not None:
                x = post_step(x, step, int(t_next))
    return sampler.finish(x)


def renoise(x: np.ndarray, ab_from: float, ab_to: float, seed: int, step: int, r: int) -> np.ndarray:
    """Diffuse ``x`` from level ``ab_from`` back up to the noisier ``ab_to``.

    Noise is drawn per absolute frame from its own stream, keyed by step and
    repetition, so it never collides with the initial noise.
    """
    ratio = ab_to / ab_from
    noise = np.stack([np.random.default_rng([seed, 2, step, r, i]).standard_normal(x.shape[1])
                      for i in range(x.shape[0])])
    return np.sqrt(ratio) * x + np.sqrt(1.0 - ratio) * noise


def prompt_use(prompt_dim: int, prompt, weights=None) -> PromptUse:
    """Normalise a prompt argument (None, vector or embedding) into a :class:`PromptUse`."""
    if prompt is None:
        return PromptUse(np.zeros(prompt_dim), True, weights)
    vec = getattr(prompt, "vector", prompt)
    null = bool(getattr(prompt, "is_null", False))
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (prompt_dim,):
        raise ValueError(f"prompt must have {prompt_dim} components, got {vec.shape}")
    return PromptUse(vec, null, weights)


def sample_ddim(sampler: Sampler, features: np.ndarray, prompt=None, seed: int = 0,
                recorder: Recorder | None = None) -> np.ndarray:
    """Sample one window whose length is the number of feature frames."""
    audio = sampler.norm_audio(features)
    job = WindowJob(0, audio, (prompt_use(sampler.prompt_dim, prompt),))
    return run_jobs(sampler, [job], audio.shape[0], seed, recorder=recorder)
