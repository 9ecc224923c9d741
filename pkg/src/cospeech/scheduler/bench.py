"""Throughput of overlapped batched denoising versus a window-by-window loop."""
from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import replace

import numpy as np

from ..diffusion.sampler import Sampler
from .longform import denoise_long, resolve_window


def _timed(sampler: Sampler, feats, seed, N, O, repeats):
    best, out = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = denoise_long(sampler, feats, None, seed, window=N, overlap=O)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_throughput(sampler: Sampler, L: int = 1200, window: int | None = None,
                     overlap: int | None = None, capacities=(1, 8), threads=(1,),
                     repeats: int = 1, seed: int = 0, features=None) -> dict:
    """Time long-form generation at several batch capacities and thread counts.

    Capacity 1 is the sequential baseline: one window per model call. Every
    other configuration must reproduce its output bitwise; the report says
    whether it did. A second run at ``2 L`` with the largest capacity gives
    the length-scaling ratio.
    """
    N, O = resolve_window(sampler, window, overlap)
    rng = np.random.default_rng(seed)
    if features is None:
        audio_dim = sampler.audio_norm.mean.shape[0] if sampler.audio_norm else 32
        features = rng.standard_normal((2 * L, audio_dim))
        if sampler.audio_norm is not None:
            features = sampler.audio_norm.inverse(features)
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] < 2 * L:
        raise ValueError(f"need {2 * L} feature frames for the scaling run, got {features.shape[0]}")
    feats = features[:L]

    runs, reference = [], None
    for cap in capacities:
        for th in threads:
            s = replace(sampler, capacity=int(cap), threads=int(th))
            seconds, out = _timed(s, feats, seed, N, O, repeats)
            if reference is None:
                reference = out
            runs.append({"capacity": int(cap), "threads": int(th), "seconds": seconds,
                         "seconds_per_frame": seconds / L, "fps": L / seconds,
                         "identical_to_first": bool(np.array_equal(out, reference))})
    base = runs[0]["seconds"]
    for r in runs:
        r["speedup"] = base / r["seconds"]

    top = max(runs, key=lambda r: (r["capacity"], r["threads"]))
    s = replace(sampler, capacity=top["capacity"], threads=top["threads"])
    double, _ = _timed(s, features[:2 * L], seed, N, O, repeats)
    return {
        "config": {"L": L, "window": N, "overlap": O, "ddim_steps": sampler.ddim_steps,
                   "capacities": [int(c) for c in capacities], "threads": [int(t) for t in threads],
                   "repeats": repeats, "seed": seed},
        "host": {"cpus": os.cpu_count(), "python": platform.python_version(),
                 "machine": platform.machine()},
        "runs": runs,
        "speedup": max(r["speedup"] for r in runs),
        "scaling": {"capacity": top["capacity"], "threads": top["threads"],
                    "seconds_L": top["seconds"], "seconds_2L": double,
                    "ratio": double / top["seconds"]},
    }


def format_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
