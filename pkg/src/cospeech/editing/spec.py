"""Edit specifications: keyframe constraints and per-frame style tracks.

Both have JSON forms.

Keyframes::

    {"resample": 1,
     "keyframes": [{"frame": 30, "latent": [...], "pose": [...], "weight": 1.0}]}

``latent`` is required; ``pose`` (six values: pitch, yaw, roll, tx, ty, tz)
is optional and leaves the pose free when absent. ``weight`` defaults to 1.

Style tracks::

    {"ramp": 20,
     "segments": [{"start": 0, "stop": 100, "prompt": "happy"},
                  {"start": 100, "stop": null, "prompt": "sad"}]}

``stop: null`` runs to the end of the sequence. A segment may give
``"embedding": [...]`` instead of a prompt token, or ``"prompt": null``
for no style. Adjacent segments with different prompts cross-fade over
``ramp`` frames centred on their boundary.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..conditioning.prompt import PromptEmbedding, StyleVocabulary, embed_prompt
from ..diffusion.denoiser import POSE_DIM

log = logging.getLogger(__name__)


class EditError(ValueError):
    pass


@dataclass(frozen=True)
class Keyframe:
    frame: int
    values: np.ndarray  # (d_x,), NaN marks a free channel
    weight: float = 1.0

    def __post_init__(self):
        if int(self.frame) != self.frame or self.frame < 0:
            raise EditError(f"keyframe index must be a non-negative integer, got {self.frame!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise EditError(f"keyframe {self.frame}: weight {self.weight} outside [0, 1]")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or np.isinf(v).any() or np.isnan(v).all():
            raise EditError(f"keyframe {self.frame}: target must be a finite vector")
        object.__setattr__(self, "values", v)

    def same_as(self, other: "Keyframe") -> bool:
        return (self.weight == other.weight and self.values.shape == other.values.shape
                and np.array_equal(self.values, other.values, equal_nan=True))


@dataclass
class EditSpec:
    """Keyframe constraints keyed by frame index."""

    keyframes: dict[int, Keyframe] = field(default_factory=dict)
    resample: int = 1

    def __post_init__(self):
        if int(self.resample) != self.resample or self.resample < 1:
            raise EditError(f"resample must be a positive integer, got {self.resample!r}")

    @classmethod
    def from_keyframes(cls, keyframes, resample: int = 1) -> "EditSpec":
        out: dict[int, Keyframe] = {}
        for kf in keyframes:
            prev = out.get(kf.frame)
            if prev is not None and not prev.same_as(kf):
                raise EditError(f"conflicting keyframes at frame {kf.frame}")
            out[kf.frame] = kf
        return cls(dict(sorted(out.items())), resample)

    def __len__(self) -> int:
        return len(self.keyframes)

    def validate(self, n_frames: int, dim: int) -> None:
        for f, kf in self.keyframes.items():
            if f >= n_frames:
                raise EditError(f"keyframe {f} outside a sequence of {n_frames} frames")
            if kf.values.shape != (dim,):
                raise EditError(f"keyframe {f} has {kf.values.shape[0]} channels, expected {dim}")

    def arrays(self, dim: int):
        """Active keyframes as (frames, targets, channel mask, weights); weight-0 ones dropped."""
        kfs = [kf for kf in self.keyframes.values() if kf.weight > 0]
        frames = np.array([kf.frame for kf in kfs], dtype=int)
        targets = np.array([kf.values for kf in kfs]).reshape(len(kfs), dim)
        weights = np.array([kf.weight for kf in kfs], dtype=np.float64)
        return frames, targets, ~np.isnan(targets), weights

    def known_mask(self, n_frames: int) -> np.ndarray:
        mask = np.zeros(n_frames, bool)
        mask[[f for f, kf in self.keyframes.items() if kf.weight > 0]] = True
        return mask

    # -- JSON -----------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "EditSpec":
        try:
            kfs = []
            for item in data.get("keyframes", []):
                latent = [float(v) for v in item["latent"]]
                pose = item.get("pose")
                pose = [np.nan] * POSE_DIM if pose is None else [float(v) for v in pose]
                if len(pose) != POSE_DIM:
                    raise EditError(f"keyframe {item.get('frame')}: pose needs {POSE_DIM} values")
                kfs.append(Keyframe(int(item["frame"]), np.array(latent + pose),
                                    float(item.get("weight", 1.0))))
            return cls.from_keyframes(kfs, int(data.get("resample", 1)))
        except (KeyError, TypeError) as exc:
            raise EditError(f"malformed edit spec: {exc}") from exc

    def to_dict(self, latent_dim: int) -> dict:
        items = []
        for f, kf in self.keyframes.items():
            item = {"frame": f, "latent": kf.values[:latent_dim].tolist(), "weight": kf.weight}
            pose = kf.values[latent_dim:]
            if not np.isnan(pose).all():
                item["pose"] = pose.tolist()
            items.append(item)
        return {"resample": self.resample, "keyframes": items}

    @classmethod
    def load(cls, path) -> "EditSpec":
        return cls.from_dict(_read_json(path))


@dataclass(frozen=True)
class StyleSegment:
    start: int
    stop: int | None  # None runs to the end
    prompt: object = None  # token, PromptEmbedding, vector or None


@dataclass
class StyleTrack:
    """Per-frame style prompts, either as segments with ramps or as explicit masks."""

    segments: list[StyleSegment] = field(default_factory=list)
    ramp: int = 20
    masks: list[tuple[object, np.ndarray]] | None = None
    vocab: StyleVocabulary | None = None

    @classmethod
    def from_masks(cls, prompts, masks) -> "StyleTrack":
        if len(prompts) != len(masks) or not prompts:
            raise EditError("need one mask per prompt and at least one prompt")
        return cls(masks=[(p, np.asarray(m, dtype=np.float64)) for p, m in zip(prompts, masks)])

    def _embed(self, prompt) -> PromptEmbedding:
        if prompt is None or isinstance(prompt, str):
            return embed_prompt(prompt, self.vocab)
        if isinstance(prompt, PromptEmbedding):
            return prompt
        return PromptEmbedding(np.asarray(prompt, dtype=np.float64), "vector")

    def _raw_masks(self, total: int) -> list[tuple[PromptEmbedding, np.ndarray]]:
        if self.masks is not None:
            out = []
            for p, m in self.masks:
                if m.shape != (total,):
                    raise EditError(f"style mask has shape {m.shape}, expected ({total},)")
                out.append((self._embed(p), m))
            return out
        if not self.segments:
            raise EditError("style track has no segments")
        owner = np.full(total, -1)
        embs = []
        for i, seg in enumerate(self.segments):
            stop = total if seg.stop is None else seg.stop
            if not 0 <= seg.start < stop <= total:
                raise EditError(f"segment [{seg.start}, {seg.stop}) does not fit {total} frames")
            if (owner[seg.start:stop] >= 0).any():
                raise EditError(f"segment [{seg.start}, {seg.stop}) overlaps another segment")
            owner[seg.start:stop] = i
            embs.append(self._embed(seg.prompt))
        if (owner < 0).any():
            raise EditError(f"style track leaves frame {int(np.argmax(owner < 0))} without a prompt")
        out = []
        for i, e in enumerate(embs):
            hard = (owner == i).astype(np.float64)
            soft = uniform_filter1d(hard, self.ramp, mode="nearest") if self.ramp > 1 else hard
            out.append((e, soft))
        return out

    def prompt_weights(self, total: int) -> list[tuple[PromptEmbedding, np.ndarray]]:
        """Distinct prompts with per-frame weights that sum to one at every frame."""
        merged: dict[tuple, list] = {}
        for emb, m in self._raw_masks(total):
            if np.any((m < 0) | (m > 1)) or not np.isfinite(m).all():
                raise EditError("style mask values must lie in [0, 1]")
            key = (emb.is_null, np.asarray(emb.vector, dtype=np.float64).tobytes())
            if key in merged:
                merged[key][1] = merged[key][1] + m
            else:
                merged[key] = [emb, m.copy()]
        total_w = sum(m for _, m in merged.values())
        if np.any(total_w <= 0):
            raise EditError(f"no prompt weight at frame {int(np.argmax(total_w <= 0))}")
        if np.max(np.abs(total_w - 1.0)) > 1e-9:
            log.warning("style masks do not sum to 1 (range %.4g..%.4g); renormalising",
                        total_w.min(), total_w.max())
        return [(emb, m / total_w) for emb, m in merged.values()]

    @classmethod
    def from_dict(cls, data: dict, vocab: StyleVocabulary | None = None) -> "StyleTrack":
        try:
            segs = []
            for item in data["segments"]:
                prompt = item.get("prompt")
                if "embedding" in item:
                    prompt = np.asarray(item["embedding"], dtype=np.float64)
                stop = item.get("stop")
                segs.append(StyleSegment(int(item["start"]), None if stop is None else int(stop), prompt))
            ramp = int(data.get("ramp", 20))
        except (KeyError, TypeError) as exc:
            raise EditError(f"malformed style track: {exc}") from exc
        if ramp < 0:
            raise EditError(f"ramp must be >= 0, got {ramp}")
        return cls(segs, ramp, vocab=vocab)

    @classmethod
    def load(cls, path, vocab: StyleVocabulary | None = None) -> "StyleTrack":
        return cls.from_dict(_read_json(path), vocab)


def _read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise EditError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise EditError(f"{path}: expected a JSON object")
    return data
