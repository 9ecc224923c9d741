"""Long-form generation by overlapped batched denoising."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..diffusion.sampler import PostStep, PromptUse, Recorder, Sampler, WindowJob, prompt_use, run_jobs
from ..validation import check_sequence
from .windows import WindowPlan, plan_windows


def resolve_window(sampler: Sampler, window: int | None, overlap: int | None) -> tuple[int, int]:
    N = window if window is not None else sampler.window
    if N is None:
        raise ValueError("window length unknown: pass window= or set it on the sampler")
    O = N // 4 if overlap is None else overlap
    return int(N), int(O)


def frame_prompts(sampler: Sampler, prompt, total: int) -> list[tuple[PromptUse, np.ndarray | None]]:
    """Expand a prompt argument into (prompt, per-frame weights over the whole sequence).

    Objects with a ``prompt_weights(total)`` method (style tracks) supply their
    own per-frame weights; anything else is one prompt active everywhere.
    """
    if hasattr(prompt, "prompt_weights"):
        return [(prompt_use(sampler.prompt_dim, p), np.asarray(w, dtype=np.float64))
                for p, w in prompt.prompt_weights(total)]
    return [(prompt_use(sampler.prompt_dim, prompt), None)]


def build_jobs(audio: np.ndarray, plan: WindowPlan,
               prompts: Sequence[tuple[PromptUse, np.ndarray | None]]) -> list[WindowJob]:
    """One job per planned window, carrying only the prompts active inside it."""
    single = plan.n_windows == 1
    jobs = []
    for (a, b), blend in zip(plan.bounds(), plan.weights):
        uses = []
        for pu, w in prompts:
            if w is None:
                uses.append(pu)
            elif np.any(w[a:b] != 0):
                uses.append(PromptUse(pu.vector, pu.is_null, w[a:b]))
        if not uses:
            raise ValueError(f"no prompt is active in frames [{a}, {b})")
        jobs.append(WindowJob(a, audio[a:b], tuple(uses), None if single else blend))
    return jobs


def denoise_long(sampler: Sampler, features, prompt=None, seed: int = 0, window: int | None = None,
                 overlap: int | None = None, blend: str = "per_step",
                 post_step: PostStep | None = None, recorder: Recorder | None = None,
                 resample: int = 1) -> np.ndarray:
    """Generate motion for every frame of ``features``, however long.

    All windows are denoised together at each step and their clean estimates
    are blended with the plan's taper weights before one shared update, so
    overlapping windows agree by construction. With ``blend="final"`` the
    windows run independently and are blended once at the end.
    """
    feats = check_sequence(features, name="audio features")
    L = feats.shape[0]
    N, O = resolve_window(sampler, window, overlap)
    plan = plan_windows(L, N, O)
    jobs = build_jobs(sampler.norm_audio(feats), plan, frame_prompts(sampler, prompt, L))
    return run_jobs(sampler, jobs, L, seed, post_step=post_step, recorder=recorder, blend=blend,
                    resample=resample)
