"""Window-at-a-time generation for live audio.

Feature windows arrive in order, each repeating the last ``O`` frames of its
predecessor. Every window is denoised as soon as it arrives. During that
run the clean estimates of its leading overlap are blended at every step
with what the previous window predicted for the same frames, so the two
windows meet smoothly. A window commits everything except its trailing
overlap, which waits for the next window (or the end of the stream). Frames
are never revised once yielded.
"""
from __future__ import annotations

import logging
import queue
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from ..diffusion.sampler import Sampler, WindowJob, frame_noise, prompt_use, run_jobs
from ..validation import check_sequence
from .windows import _ramp

log = logging.getLogger(__name__)


class StreamUnderrun(RuntimeError):
    """Raised when the input queue stays empty longer than allowed."""


@dataclass(frozen=True)
class StreamChunk:
    window: int
    start: int  # absolute index of the first frame in ``frames``
    frames: np.ndarray
    latency: float  # seconds spent denoising the window that produced this chunk


@dataclass
class StreamStats:
    windows: int = 0
    frames: int = 0
    underruns: int = 0
    stall_seconds: float = 0.0
    latencies: list[float] = field(default_factory=list)


def _windows_from(source, timeout: float, max_stall: float | None, stats: StreamStats):
    """Yield feature windows from an iterable or a queue (``None`` ends a queue)."""
    if not isinstance(source, queue.Queue):
        yield from source
        return
    while True:
        waited = 0.0
        while True:
            try:
                item = source.get(timeout=timeout)
                break
            except queue.Empty:
                stats.underruns += 1
                stats.stall_seconds += timeout
                waited += timeout
                log.warning("stream stalled: no feature window for %.2fs", waited)
                if max_stall is not None and waited >= max_stall:
                    raise StreamUnderrun(f"no feature window arrived within {waited:.2f}s")
        if item is None:
            return
        yield item


def stream_realtime(sampler: Sampler, source: Iterable | queue.Queue, prompt=None, seed: int = 0,
                    overlap: int | None = None, timeout: float = 0.5,
                    max_stall: float | None = None, stats: StreamStats | None = None
                    ) -> Iterator[StreamChunk]:
    """Yield committed motion frames as feature windows arrive."""
    stats = stats if stats is not None else StreamStats()
    pu = prompt_use(sampler.prompt_dim, prompt)
    dim = sampler.motion_dim
    prev_traj: list[np.ndarray] | None = None  # previous window's clean estimates, tail only
    pending: StreamChunk | None = None
    start = 0
    for k, feats in enumerate(_windows_from(source, timeout, max_stall, stats)):
        feats = check_sequence(feats, name="feature window")
        n = feats.shape[0]
        if k == 0:
            O = n // 4 if overlap is None else int(overlap)
            lead = 0
        else:
            lead = O
            if n <= lead:
                raise ValueError(f"window {k} has {n} frames, needs more than the overlap {lead}")
            start += prev_n - lead
        if not 0 <= O < n:
            raise ValueError(f"overlap {O} must be smaller than the window ({n} frames)")
        traj: list[np.ndarray] = []
        hook = None
        if lead:
            fade = _ramp(lead)[:, None]
            old = prev_traj

            def hook(step, x0, old=old, fade=fade):
                x0 = x0.copy()
                x0[:lead] = (1.0 - fade) * old[step] + fade * x0[:lead]
                return x0

        def record(step, t, x0):
            traj.append(x0[n - O:].copy())

        t0 = time.perf_counter()
        job = WindowJob(0, sampler.norm_audio(feats), (pu,))
        x_init = frame_noise(seed, start, n, dim)
        out = run_jobs(sampler, [job], n, seed, recorder=record, x_init=x_init, x0_hook=hook)
        latency = time.perf_counter() - t0
        stats.windows += 1
        stats.latencies.append(latency)
        # the held-back tail of the previous window is superseded by this one
        keep = n - O
        if keep:
            stats.frames += keep
            yield StreamChunk(k, start, out[:keep], latency)
        pending = StreamChunk(k, start + keep, out[keep:], latency) if O else None
        prev_traj, prev_n = traj, n
    if pending is not None and pending.frames.shape[0]:
        stats.frames += pending.frames.shape[0]
        yield pending


def split_windows(features, window: int, overlap: int) -> list[np.ndarray]:
    """Cut a feature sequence into consecutive windows sharing ``overlap`` frames."""
    feats = check_sequence(features, name="audio features")
    if not 0 <= overlap < window:
        raise ValueError(f"overlap must satisfy 0 <= O < {window}, got {overlap}")
    out, a = [], 0
    while True:
        out.append(feats[a:a + window])
        if a + window >= feats.shape[0]:
            return out
        a += window - overlap
