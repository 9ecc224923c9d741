"""Synthetic corpus on disk: ``manifest.json`` plus WAV and fp32 blobs per clip.

Layout::

    manifest.json
    clips/<clip_id>.wav
    clips/<clip_id>.<array>.f32     little-endian float32, shape in the manifest

Arrays are kept as float32 in memory too, so saving and loading is bit-exact.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from ..conditioning.audio import FPS, extract_audio_features, write_wav
from ..conditioning.prompt import BUILTIN_STYLES, canonical_token
from .oracle import MotionOracle
from .synth import synth_speech_like

log = logging.getLogger(__name__)

CORPUS_VERSION = 1
ARRAYS = ("features", "latent", "pose")
SPLITS = ("train", "val", "test")


class CorpusError(RuntimeError):
    pass


@dataclass
class CorpusSample:
    clip_id: str
    style: str
    split: str
    features: np.ndarray
    latent: np.ndarray
    pose: np.ndarray
    wav: Path | None = None

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def motion(self) -> np.ndarray:
        """Diffusion state per frame: latent followed by pose, float64."""
        return np.concatenate([self.latent, self.pose], axis=1).astype(np.float64)


@dataclass
class Corpus:
    samples: list[CorpusSample] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator[CorpusSample]:
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def split(self, name: str) -> list[CorpusSample]:
        return [s for s in self.samples if s.split == name]

    @property
    def oracle(self) -> MotionOracle:
        cfg = self.manifest.get("oracle", {})
        return MotionOracle(**cfg)


def split_for(clip_id: str, seed: int) -> str:
    """80/10/10 split decided by a hash of the seed and clip id."""
    h = int.from_bytes(hashlib.sha256(f"{seed}:{clip_id}".encode()).digest()[:8], "little")
    u = h / 2**64
    return "train" if u < 0.8 else "val" if u < 0.9 else "test"


def make_sample(clip_id: str, style: str, duration: float, rng: np.random.Generator,
                oracle: MotionOracle, split: str, styles: dict[str, int] | None = None):
    clip = synth_speech_like(duration, rng)
    feats = extract_audio_features(clip).features
    latent, pose = oracle(feats, style, styles)
    f32 = lambda a: np.ascontiguousarray(a, dtype=np.float32)
    return clip, CorpusSample(clip_id, style, split, f32(feats), f32(latent), f32(pose))


def generate_corpus(out_dir, n_clips: int, duration_range: tuple[float, float] = (2.5, 6.0),
                    styles: dict[str, int] | None = None, seed: int = 0, latent_dim: int = 16,
                    overwrite: bool = False) -> Path:
    """Synthesise ``n_clips`` clips and write them atomically to ``out_dir``."""
    if n_clips < 1:
        raise ValueError(f"n_clips must be >= 1, got {n_clips}")
    lo, hi = duration_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad duration range {duration_range}")
    styles = dict(BUILTIN_STYLES if styles is None else styles)
    tokens = sorted(canonical_token(t) for t in styles)
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise CorpusError(f"{out} exists and is not empty")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        (tmp / "clips").mkdir()
        oracle = MotionOracle(latent_dim=latent_dim, seed=seed)
        entries = []
        for i in range(n_clips):
            clip_id = f"clip{i:05d}"
            rng = np.random.default_rng([seed, i])
            style = tokens[int(rng.integers(len(tokens)))]
            duration = round(float(rng.uniform(lo, hi)), 3)
            clip, sample = make_sample(clip_id, style, duration, rng, oracle,
                                       split_for(clip_id, seed), styles)
            entries.append(_write_sample(tmp, clip, sample, duration))
        counts = {s: sum(e["split"] == s for e in entries) for s in SPLITS}
        manifest = {
            "version": CORPUS_VERSION,
            "seed": seed,
            "fps": FPS,
            "oracle": {"latent_dim": latent_dim, "feature_dim": oracle.feature_dim, "seed": seed},
            "styles": {t: styles[t] for t in tokens},
            "counts": counts,
            "samples": entries,
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


def _write_sample(root: Path, clip, sample: CorpusSample, duration: float) -> dict:
    wav_rel = f"clips/{sample.clip_id}.wav"
    write_wav(root / wav_rel, clip)
    arrays = {}
    for name in ARRAYS:
        arr = getattr(sample, name).astype("<f4")
        rel = f"clips/{sample.clip_id}.{name}.f32"
        data = arr.tobytes()
        (root / rel).write_bytes(data)
        arrays[name] = {"file": rel, "shape": list(arr.shape),
                        "sha256": hashlib.sha256(data).hexdigest()}
    return {"id": sample.clip_id, "style": sample.style, "split": sample.split,
            "duration": duration, "n_frames": sample.n_frames, "wav": wav_rel, "arrays": arrays}


def load_corpus(path) -> Corpus:
    """Load and validate a corpus; bad samples are skipped and listed in ``rejected``."""
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.exists():
        if root.is_dir() and not any(root.iterdir()):
            log.warning("%s is empty; no samples loaded", root)
            return Corpus()
        raise CorpusError(f"no manifest.json in {root}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{mpath}: {exc}") from exc
    if manifest.get("version") != CORPUS_VERSION:
        raise CorpusError(f"unsupported corpus version {manifest.get('version')}")
    corpus = Corpus(manifest=manifest)
    for entry in manifest.get("samples", []):
        cid = entry.get("id", "?")
        try:
            corpus.samples.append(_load_sample(root, entry, manifest))
        except (OSError, ValueError, KeyError) as exc:
            log.warning("rejecting sample %s: %s", cid, exc)
            corpus.rejected.append((cid, str(exc)))
    return corpus


def _load_sample(root: Path, entry: dict, manifest: dict) -> CorpusSample:
    arrays = {}
    for name in ARRAYS:
        spec = entry["arrays"][name]
        data = (root / spec["file"]).read_bytes()
        shape = tuple(int(d) for d in spec["shape"])
        if len(data) != 4 * int(np.prod(shape)):
            raise ValueError(f"{name} blob holds {len(data)} bytes, expected {4 * int(np.prod(shape))}")
        if "sha256" in spec and hashlib.sha256(data).hexdigest() != spec["sha256"]:
            raise ValueError(f"{name} blob checksum mismatch")
        arr = np.frombuffer(data, dtype="<f4").reshape(shape).astype(np.float32)
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} contains non-finite values")
        arrays[name] = arr
    n = entry["n_frames"]
    for name, arr in arrays.items():
        if arr.ndim != 2 or arr.shape[0] != n:
            raise ValueError(f"{name} has shape {arr.shape}, expected {n} frames")
    if entry["style"] not in manifest.get("styles", BUILTIN_STYLES):
        raise ValueError(f"style {entry['style']!r} not in the corpus vocabulary")
    if entry["split"] not in SPLITS:
        raise ValueError(f"unknown split {entry['split']!r}")
    return CorpusSample(entry["id"], entry["style"], entry["split"], arrays["features"],
                        arrays["latent"], arrays["pose"], root / entry["wav"])
