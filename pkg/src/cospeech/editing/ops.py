"""Keyframe inpainting, per-frame style blending and sequential composition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffusion.sampler import Sampler, WindowJob, prompt_use, run_jobs
from ..scheduler.longform import denoise_long, resolve_window
from ..scheduler.windows import plan_windows, taper_weights
from ..validation import check_sequence
from .spec import EditError, EditSpec, StyleTrack


def keyframe_hook(sampler: Sampler, spec: EditSpec, seed: int):
    """Post-step hook pulling keyframes towards their targets at the current noise level.

    Constrained channels become ``w * q(target, t) + (1 - w) * x`` where ``q``
    diffuses the target to level ``t`` with noise keyed by (seed, step,
    frame). At ``t = 0`` that is the target itself, so weight-1 keyframes
    end exactly on target.
    """
    dim = sampler.motion_dim
    frames, targets, mask, weights = spec.arrays(dim)
    if not frames.size:
        return None
    if sampler.motion_norm is not None:
        targets = (targets - sampler.motion_norm.mean) / sampler.motion_norm.scale
    targets = np.where(mask, targets, 0.0)
    ab = sampler.schedule.alpha_bar
    w = weights[:, None]

    def hook(x, step, t_next):
        eps = np.stack([np.random.default_rng([seed, 1, step, int(f)]).standard_normal(dim)
                        for f in frames])
        q = np.sqrt(ab[t_next]) * targets + np.sqrt(1.0 - ab[t_next]) * eps
        x = x.copy()
        x[frames] = np.where(mask, w * q + (1.0 - w) * x[frames], x[frames])
        return x

    return hook


def inpaint_keyframes(sampler: Sampler, features, spec: EditSpec, prompt=None, seed: int = 0,
                      window: int | None = None, overlap: int | None = None) -> np.ndarray:
    """Generate motion that passes through the keyframes in ``spec``."""
    feats = check_sequence(features, name="audio features")
    spec.validate(feats.shape[0], sampler.motion_dim)
    return denoise_long(sampler, feats, prompt, seed, window, overlap,
                        post_step=keyframe_hook(sampler, spec, seed), resample=spec.resample)


def style_inbetween(sampler: Sampler, features, track: StyleTrack, seed: int = 0,
                    window: int | None = None, overlap: int | None = None,
                    recorder=None) -> np.ndarray:
    """Generate motion whose style follows ``track`` frame by frame.

    Each distinct prompt is evaluated once per window and step; the clean
    estimates are mixed with the track's per-frame weights before the update.
    """
    return denoise_long(sampler, features, track, seed, window, overlap, recorder=recorder)


@dataclass(frozen=True)
class Segment:
    features: np.ndarray
    prompt: object = None
    length: int | None = None  # defaults to all feature frames


def compose_sequential(sampler: Sampler, segments, overlap: int, seed: int = 0,
                       window: int | None = None) -> np.ndarray:
    """Join independently conditioned segments into one sequence.

    Consecutive segments share ``overlap`` frames, so the output has
    ``sum(lengths) - overlap * (n - 1)`` frames. Every segment is split into
    windows with its own audio and prompt, and all windows are denoised
    jointly with overlapped blending.
    """
    segs = [s if isinstance(s, Segment) else Segment(*s) for s in segments]
    if not segs:
        raise EditError("need at least one segment")
    N, inner = resolve_window(sampler, window, None)
    parts = []
    for i, s in enumerate(segs):
        feats = check_sequence(s.features, name=f"segment {i} features")
        n = feats.shape[0] if s.length is None else int(s.length)
        if n < 1:
            raise EditError(f"segment {i} has zero length")
        if n > feats.shape[0]:
            raise EditError(f"segment {i} asks for {n} frames but has {feats.shape[0]}")
        parts.append((sampler.norm_audio(feats[:n]), prompt_use(sampler.prompt_dim, s.prompt)))
    if len(parts) > 1 and not 0 <= overlap < min(min(a.shape[0] for a, _ in parts), N):
        raise EditError(f"overlap {overlap} must be smaller than every segment and the window")

    bounds, audio, prompts, offset = [], [], [], 0
    for a, pu in parts:
        n = a.shape[0]
        plan = plan_windows(n, N, min(inner, n - 1) if n > N else 0)
        for s0, s1 in plan.bounds():
            bounds.append((offset + s0, offset + s1))
            audio.append(a[s0:s1])
            prompts.append(pu)
        offset += n - overlap
    total = offset + overlap
    if len(bounds) == 1:
        jobs = [WindowJob(0, audio[0], (prompts[0],))]
    else:
        weights = taper_weights(bounds, total)
        jobs = [WindowJob(b[0], a, (p,), w) for b, a, p, w in zip(bounds, audio, prompts, weights)]
    return run_jobs(sampler, jobs, total, seed)
