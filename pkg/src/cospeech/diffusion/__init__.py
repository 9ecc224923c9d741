from .denoiser import PRESETS, Denoiser, DenoiserConfig, preset_config
from .estimator import MotionDiffusion
from .guidance import GuidanceConfig, cfg_combine
from .losses import LossWeights, loss_terms, training_loss
from .sampler import (Normalizer, PromptUse, Sampler, WindowJob, ddim_update, frame_noise,
                      prompt_use, run_jobs, sample_ddim)
from .schedule import NoiseSchedule, cosine_schedule, forward_diffuse

__all__ = [
    "Denoiser", "DenoiserConfig", "GuidanceConfig", "LossWeights", "MotionDiffusion",
    "NoiseSchedule", "Normalizer", "PRESETS", "PromptUse", "Sampler", "WindowJob",
    "cfg_combine", "cosine_schedule", "ddim_update", "forward_diffuse", "frame_noise",
    "loss_terms", "preset_config", "prompt_use", "run_jobs", "sample_ddim", "training_loss",
]
