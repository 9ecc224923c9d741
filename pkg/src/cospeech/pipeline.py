"""End-to-end glue: corpus to training pairs, motion to geometry, evaluation.

A motion frame is an expression latent followed by six pose values. With
``bypass_latent`` the denoiser works on blendshape weights instead of
latents; targets then come from the weight mapping of the ground-truth
latents, and outputs reach geometry through the latent mapping.
"""
from __future__ import annotations

import numpy as np

from .conditioning.prompt import StyleVocabulary, embed_prompt
from .corpus.dataset import CorpusSample
from .diffusion.denoiser import POSE_DIM
from .diffusion.estimator import MotionDiffusion
from .latent.vae import GeometryVAE
from .metrics.report import ClipEval, EvalReport, evaluate_clips


def split_motion(motion: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    motion = np.asarray(motion, dtype=np.float64)
    return motion[:, :-POSE_DIM], motion[:, -POSE_DIM:]


def target_motion(sample: CorpusSample, vae: GeometryVAE | None = None,
                  bypass_latent: bool = False) -> np.ndarray:
    """Training target for one clip: latent+pose, or weights+pose when bypassing."""
    if not bypass_latent:
        return sample.motion
    if vae is None:
        raise ValueError("bypass_latent needs the VAE's weight mapping")
    weights = vae.to_weights(sample.latent.astype(np.float64))
    return np.concatenate([weights, sample.pose.astype(np.float64)], axis=1)


def training_pairs(samples, vae=None, bypass_latent=False, vocab: StyleVocabulary | None = None):
    X = [(s.features, embed_prompt(s.style, vocab)) for s in samples]
    y = [target_motion(s, vae, bypass_latent) for s in samples]
    return X, y


def train_denoiser(samples, vae: GeometryVAE | None = None, bypass_latent: bool = False,
                   no_cfg_masking: bool = False, **params) -> MotionDiffusion:
    X, y = training_pairs(samples, vae, bypass_latent)
    est = MotionDiffusion(no_cfg_masking=no_cfg_masking, **params).fit(X, y)
    est.bypass_latent_ = bypass_latent
    return est


def motion_latents(motion, vae: GeometryVAE, bypass_latent: bool = False) -> np.ndarray:
    """Expression latents for a generated motion array."""
    head, _ = split_motion(motion)
    if bypass_latent:
        return vae.to_latent(np.clip(head, 0.0, 1.0))
    return head


def motion_weights(motion, vae: GeometryVAE, bypass_latent: bool = False) -> np.ndarray:
    """Blendshape weights for a generated motion array."""
    head, _ = split_motion(motion)
    return np.clip(head, 0.0, 1.0) if bypass_latent else vae.to_weights(head)


def motion_geometry(motion, vae: GeometryVAE, bypass_latent: bool = False, neutral=None):
    """Decode a motion array to ``(geometry (F, V, 3), pose (F, 6))``."""
    _, pose = split_motion(motion)
    return vae.decode(motion_latents(motion, vae, bypass_latent), neutral), pose


def mean_motion(samples) -> np.ndarray:
    """Per-channel mean over every training frame."""
    return np.concatenate([s.motion for s in samples]).mean(axis=0)


def evaluate_generator(generate, samples, vae: GeometryVAE, name: str = "model",
                       bypass_latent: bool = False) -> EvalReport:
    """Score ``generate(sample) -> motion`` against decoded ground truth on ``samples``."""
    rig = vae.rig_
    clips = []
    for s in samples:
        gt_geom = vae.decode(s.latent.astype(np.float64))
        geom, pose = motion_geometry(generate(s), vae, bypass_latent)
        clips.append(ClipEval(s.clip_id, geom, pose, gt_geom, s.pose.astype(np.float64)))
    return evaluate_clips(clips, rig.lip_idx, rig.upper_idx, rig.neutral, name)


def evaluate_model(est: MotionDiffusion, samples, vae: GeometryVAE, name: str = "model",
                   seed: int = 0, bypass_latent: bool | None = None, **sampler_kw) -> EvalReport:
    bypass = getattr(est, "bypass_latent_", False) if bypass_latent is None else bypass_latent
    gen = lambda s: est.sample(s.features, embed_prompt(s.style), seed=seed, **sampler_kw)
    return evaluate_generator(gen, samples, vae, name, bypass)


def evaluate_mean_baseline(train_samples, samples, vae: GeometryVAE,
                           name: str = "mean predictor") -> EvalReport:
    mean = mean_motion(train_samples)
    return evaluate_generator(lambda s: np.tile(mean, (s.n_frames, 1)), samples, vae, name)
