"""Two-stage random condition masking for multi-source guidance training."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prompt import PromptEmbedding


@dataclass(frozen=True)
class ConditionMask:
    mask_prompt: bool = False
    mask_all: bool = False

    @property
    def variant(self) -> str:
        """Which guidance branch this draw trains."""
        if self.mask_all:
            return "uncond"
        return "audio" if self.mask_prompt else "full"


@dataclass(frozen=True)
class ConditionBundle:
    audio: np.ndarray
    prompt: PromptEmbedding
    mask: ConditionMask = ConditionMask()


def sample_condition_masks(n: int, rng: np.random.Generator, p_prompt: float = 0.1,
                           p_all: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` independent (mask_prompt, mask_all) pairs."""
    for name, p in (("p_prompt", p_prompt), ("p_all", p_all)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    mask_prompt = rng.random(n) < p_prompt
    mask_all = rng.random(n) < p_all
    return mask_prompt, mask_all


def apply_condition_masks(audio: np.ndarray, prompt: PromptEmbedding, rng: np.random.Generator,
                          p_prompt: float = 0.1, p_all: float = 0.1) -> ConditionBundle:
    """First mask the prompt, then (independently) the whole concatenated condition.

    A null prompt counts as already masked.
    """
    mp, ma = sample_condition_masks(1, rng, p_prompt, p_all)
    return ConditionBundle(audio, prompt, ConditionMask(bool(mp[0]) or prompt.is_null, bool(ma[0])))
