"""Two-source classifier-free guidance."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GuidanceConfig:
    """Strengths for the speech-only and speech+style branches.

    The unconditional branch gets ``1 - s_audio - s_prompt`` so the three
    coefficients always sum to one.
    """

    s_audio: float = 2.5
    s_prompt: float = 1.5

    def __post_init__(self):
        if not (math.isfinite(self.s_audio) and math.isfinite(self.s_prompt)):
            raise ValueError("guidance strengths must be finite")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """(unconditional, audio-only, audio+prompt)."""
        return (1.0 - self.s_audio - self.s_prompt, self.s_audio, self.s_prompt)

    @property
    def branches(self) -> tuple[bool, bool, bool]:
        """Which denoiser branches need evaluating (zero-weight ones are skipped)."""
        return tuple(c != 0.0 for c in self.coefficients)


def cfg_combine(out_uncond, out_audio, out_full, s_audio: float, s_prompt: float) -> np.ndarray:
    """``(1 - sA - sP) * uncond + sA * audio + sP * full``.

    Terms with a zero coefficient are left out entirely, so their input may be
    ``None`` and cannot leak into the result.
    """
    outs = [None if o is None else np.asarray(o, dtype=np.float64)
            for o in (out_uncond, out_audio, out_full)]
    shapes = {o.shape for o in outs if o is not None}
    if len(shapes) > 1:
        raise ValueError(f"guidance branches disagree in shape: {sorted(shapes)}")
    result = None
    # the coefficients sum to one, so at least one is non-zero
    for coef, out in zip(GuidanceConfig(s_audio, s_prompt).coefficients, outs):
        if coef == 0.0:
            continue
        if out is None:
            raise ValueError("a branch with non-zero guidance weight is missing")
        term = out if coef == 1.0 else coef * out
        result = term if result is None else result + term
    return result
