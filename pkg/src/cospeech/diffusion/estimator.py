"""Estimator wrapper: training loop, normalisation and sampling entry points."""
from __future__ import annotations

import json
import logging

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..autograd import AdamW, GradientTape, clip_grad_norm, load_checkpoint, save_checkpoint
from ..conditioning.masking import sample_condition_masks
from ..conditioning.prompt import PROMPT_DIM
from ..training import DivergenceGuard, cosine_lr
from ..validation import check_positive_int, check_probability, check_sequence
from .denoiser import POSE_DIM, Denoiser, preset_config
from .guidance import GuidanceConfig
from .losses import LossWeights, training_loss
from .sampler import Normalizer, Sampler, prompt_use
from .schedule import cosine_schedule, forward_diffuse

log = logging.getLogger(__name__)


def _split_condition(cond):
    """Accept ``(features, prompt)`` pairs or objects with ``audio``/``prompt`` attributes."""
    if hasattr(cond, "audio") and hasattr(cond, "prompt"):
        return cond.audio, cond.prompt
    features, prompt = cond
    return features, prompt


class MotionDiffusion(BaseEstimator):
    """Conditional x0-predicting diffusion model over motion sequences.

    ``fit(X, y)`` takes conditions ``X`` as ``(features, prompt)`` pairs,
    where ``prompt`` is a vector, an embedding or ``None``, and targets ``y``
    as per-clip ``(frames, motion_dim)`` arrays. ``predict`` samples one
    motion per condition with the configured guidance and seed.
    """

    def __init__(self, preset="toy", window=None, steps=2000, batch_size=16, lr=2e-3,
                 weight_decay=0.0, warmup=100, grad_clip=1.0, p_prompt=0.1, p_all=0.1,
                 lambda_simple=1.0, lambda_velocity=1.0, lambda_smooth=0.01,
                 smooth_variant="second_difference", no_cfg_masking=False, s_audio=2.5,
                 s_prompt=1.5, ddim_steps=50, capacity=8, threads=1, overlap=None, seed=0):
        self.preset = preset
        self.window = window
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.warmup = warmup
        self.grad_clip = grad_clip
        self.p_prompt = p_prompt
        self.p_all = p_all
        self.lambda_simple = lambda_simple
        self.lambda_velocity = lambda_velocity
        self.lambda_smooth = lambda_smooth
        self.smooth_variant = smooth_variant
        self.no_cfg_masking = no_cfg_masking
        self.s_audio = s_audio
        self.s_prompt = s_prompt
        self.ddim_steps = ddim_steps
        self.capacity = capacity
        self.threads = threads
        self.overlap = overlap
        self.seed = seed

    # -- fitting ----------------------------------------------------------------
    def _validate(self, X, y):
        if len(X) != len(y) or not len(X):
            raise ValueError(f"need matching non-empty conditions and targets, got {len(X)} and {len(y)}")
        check_probability(self.p_prompt, "p_prompt")
        check_probability(self.p_all, "p_all")
        check_positive_int(self.batch_size, "batch_size")
        feats, prompts, motions = [], [], []
        for cond, motion in zip(X, y):
            f, p = _split_condition(cond)
            f = check_sequence(f, name="audio features")
            m = check_sequence(motion, name="motion")
            if f.shape[0] != m.shape[0]:
                raise ValueError(f"features have {f.shape[0]} frames but motion has {m.shape[0]}")
            feats.append(f)
            prompts.append(p)
            motions.append(m)
        if len({m.shape[1] for m in motions}) != 1 or len({f.shape[1] for f in feats}) != 1:
            raise ValueError("all clips must share feature and motion widths")
        return feats, prompts, motions

    def _build(self, motion_dim: int, audio_dim: int, prompt_dim: int) -> None:
        over = {"motion_dim": motion_dim, "audio_dim": audio_dim, "prompt_dim": prompt_dim}
        if self.window is not None:
            over["window"] = int(self.window)
        self.config_ = preset_config(self.preset, **over)
        self.schedule_ = cosine_schedule(self.config_.T)
        self.model_ = Denoiser(self.config_, np.random.default_rng(self.seed))

    def fit(self, X, y):
        feats, prompts, motions = self._validate(X, y)
        given = [np.asarray(getattr(p, "vector", p)) for p in prompts if p is not None]
        prompt_dim = given[0].shape[0] if given else PROMPT_DIM
        self._build(motions[0].shape[1], feats[0].shape[1], prompt_dim)
        self.motion_norm_ = Normalizer.fit(np.concatenate(motions))
        self.audio_norm_ = Normalizer.fit(np.concatenate(feats))
        self.history_ = self._train(feats, prompts, motions)
        return self

    def _train(self, feats, prompts, motions) -> dict[str, list[float]]:
        history = {k: [] for k in ("simple", "velocity", "smooth", "total")}
        if self.steps == 0:
            return history
        c = self.config_
        N = min(c.window, min(m.shape[0] for m in motions))
        if N < 3:
            raise ValueError("clips must have at least 3 frames")
        A = [self.audio_norm_.forward(f) for f in feats]
        Xs = [self.motion_norm_.forward(m) for m in motions]
        P = [prompt_use(c.prompt_dim, p) for p in prompts]
        rng = np.random.default_rng([self.seed, 7])
        weights = LossWeights(self.lambda_simple, self.lambda_velocity, self.lambda_smooth)
        params = self.model_.parameters()
        opt = AdamW(params, lr=self.lr, weight_decay=self.weight_decay)
        guard = DivergenceGuard()
        B = self.batch_size
        self.model_.train()
        for step in range(self.steps):
            idx = rng.integers(len(Xs), size=B)
            starts = [int(rng.integers(Xs[i].shape[0] - N + 1)) for i in idx]
            x0 = np.stack([Xs[i][s:s + N] for i, s in zip(idx, starts)])
            audio = np.stack([A[i][s:s + N] for i, s in zip(idx, starts)])
            prompt = np.stack([P[i].vector for i in idx])
            null = np.array([P[i].is_null for i in idx])
            t = rng.integers(1, c.T + 1, size=B)
            eps = rng.standard_normal(x0.shape)
            x_t = forward_diffuse(x0, t, eps, self.schedule_)
            if self.no_cfg_masking:
                mask_prompt, mask_all = null.copy(), np.zeros(B, bool)
            else:
                mask_prompt, mask_all = sample_condition_masks(B, rng, self.p_prompt, self.p_all)
                mask_prompt = mask_prompt | null
            with GradientTape() as tape:
                pred = self.model_(x_t, t, audio, prompt, mask_prompt, mask_all)
                total, parts = training_loss(x0, pred, weights, self.smooth_variant)
            grads = tape.gradient(total, params)
            if self.grad_clip:
                clip_grad_norm(grads, self.grad_clip)
            opt.lr = cosine_lr(step, self.steps, self.lr, warmup=min(self.warmup, self.steps // 10))
            opt.step(grads)
            guard.check(step, parts["total"])
            for k in history:
                history[k].append(parts[k])
            if step % 250 == 0:
                log.info("denoiser step %d simple %.4f total %.4f", step, parts["simple"], parts["total"])
        self.model_.eval()
        return history

    # -- sampling -----------------------------------------------------------------
    def sampler(self, s_audio=None, s_prompt=None, ddim_steps=None, capacity=None,
                threads=None) -> Sampler:
        check_is_fitted(self, "model_")
        c = self.config_
        guidance = GuidanceConfig(self.s_audio if s_audio is None else s_audio,
                                  self.s_prompt if s_prompt is None else s_prompt)
        return Sampler(self.model_.predict, c.motion_dim, c.prompt_dim, self.schedule_, guidance,
                       ddim_steps or self.ddim_steps, self.motion_norm_, self.audio_norm_,
                       capacity or self.capacity, threads or self.threads,
                       rotation_channels=slice(c.motion_dim - POSE_DIM, c.motion_dim - 3),
                       window=c.window)

    @property
    def default_overlap(self) -> int:
        check_is_fitted(self, "config_")
        return self.config_.window // 4 if self.overlap is None else int(self.overlap)

    def sample(self, features, prompt=None, seed=None, **sampler_kw) -> np.ndarray:
        """Generate motion for any number of frames (windows are planned as needed)."""
        from ..scheduler import denoise_long

        seed = self.seed if seed is None else seed
        feats = check_sequence(features, self.config_.audio_dim, "audio features")
        return denoise_long(self.sampler(**sampler_kw), feats, prompt, seed,
                            overlap=self.default_overlap)

    def predict(self, X) -> list[np.ndarray]:
        return [self.sample(*_split_condition(cond)) for cond in X]

    # -- persistence --------------------------------------------------------------
    def save(self, path, **extra_meta) -> None:
        check_is_fitted(self, "model_")
        tensors = dict(self.model_.state_dict())
        for name in ("motion_norm_", "audio_norm_"):
            norm = getattr(self, name)
            tensors[f"{name}mean"] = norm.mean
            tensors[f"{name}scale"] = norm.scale
        meta = {"kind": "motion-diffusion", "params": self.get_params(),
                "config": self.config_.to_dict(), **extra_meta}
        save_checkpoint(path, tensors, json.loads(json.dumps(meta)))

    @classmethod
    def load(cls, path) -> tuple["MotionDiffusion", dict]:
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "motion-diffusion":
            raise ValueError(f"{path} is not a motion diffusion checkpoint")
        est = cls(**meta["params"])
        cfg = meta["config"]
        est._build(cfg["motion_dim"], cfg["audio_dim"], cfg["prompt_dim"])
        for name in ("motion_norm_", "audio_norm_"):
            setattr(est, name, Normalizer(tensors.pop(f"{name}mean"), tensors.pop(f"{name}scale")))
        est.model_.load_state_dict(tensors)
        est.model_.eval()
        est.history_ = {}
        return est, meta

