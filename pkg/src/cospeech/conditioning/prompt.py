"""Style prompt embeddings.

Text prompts map to seed-hashed unit vectors so that embeddings are stable
across runs without a pretrained text/image model. The vocabulary pins seeds
for the canonical style tokens; any other string hashes to its own seed.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROMPT_DIM = 64

BUILTIN_STYLES: dict[str, int] = {
    "neutral": 1001,
    "happy": 1002,
    "sad": 1003,
    "angry": 1004,
    "surprised": 1005,
    "fearful": 1006,
    "disgusted": 1007,
    "calm": 1008,
}


@dataclass(frozen=True)
class PromptEmbedding:
    vector: np.ndarray
    source: str = "text"  # text | image-stub | null
    token: str | None = None

    @property
    def is_null(self) -> bool:
        return self.source == "null"


class StyleVocabulary:
    """Token to seed table, loadable from and savable to JSON."""

    def __init__(self, seeds: dict[str, int] | None = None, dim: int = PROMPT_DIM):
        self.seeds = dict(BUILTIN_STYLES if seeds is None else seeds)
        self.dim = dim

    @classmethod
    def load(cls, path, dim: int = PROMPT_DIM) -> "StyleVocabulary":
        seeds = json.loads(Path(path).read_text())
        if not isinstance(seeds, dict) or not all(isinstance(v, int) for v in seeds.values()):
            raise ValueError(f"{path}: vocabulary must map tokens to integer seeds")
        return cls(seeds, dim)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.seeds, indent=2, sort_keys=True) + "\n")

    @property
    def tokens(self) -> list[str]:
        return list(self.seeds)

    def __contains__(self, token: str) -> bool:
        return canonical_token(token) in self.seeds

    def seed_for(self, token: str) -> int:
        token = canonical_token(token)
        if token in self.seeds:
            return self.seeds[token]
        return _hash_seed("text:" + token)

    def embed(self, prompt: str | None) -> PromptEmbedding:
        return embed_prompt(prompt, self)


def canonical_token(token: str) -> str:
    return " ".join(token.strip().lower().split())


def _hash_seed(key: str) -> int:
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")


def _unit_vector(seed: int, dim: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(dim)
    return v / np.linalg.norm(v)


def null_prompt(dim: int = PROMPT_DIM) -> PromptEmbedding:
    """Placeholder for an absent prompt; the denoiser swaps in its learned null embedding."""
    return PromptEmbedding(np.zeros(dim), source="null")


def embed_prompt(prompt: str | None, vocab: StyleVocabulary | None = None) -> PromptEmbedding:
    """Unit-norm embedding of a style token or free text; ``None`` gives the null prompt."""
    vocab = vocab or StyleVocabulary()
    if prompt is None:
        return null_prompt(vocab.dim)
    if not prompt.strip():
        raise ValueError("prompt must be non-empty (pass None for no prompt)")
    token = canonical_token(prompt)
    return PromptEmbedding(_unit_vector(vocab.seed_for(token), vocab.dim), "text", token)


def embed_image_stub(data: bytes, dim: int = PROMPT_DIM) -> PromptEmbedding:
    """Stand-in for an image encoder: a unit vector seeded by the image bytes."""
    return PromptEmbedding(_unit_vector(_hash_seed("image:" + hashlib.sha256(data).hexdigest()), dim),
                           "image-stub")
