import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cospeech.diffusion import GuidanceConfig, Sampler, frame_noise, sample_ddim
from cospeech.diffusion.schedule import cosine_schedule

T = 50


def linear_model(x_t, t, audio, prompt, mask_prompt, mask_all):
    """Closed-form toy denoiser: x0 = k(t) x_t + 0.5 audio (+ prompt offset when unmasked)."""
    k = 0.3 * np.asarray(t, dtype=float)[:, None, None] / T
    out = k * x_t + 0.5 * audio[..., :1]
    bonus = np.where(np.asarray(mask_prompt)[:, None, None], 0.0, prompt[:, None, :1])
    return out + np.where(np.asarray(mask_all)[:, None, None], 0.0, bonus)


def oracle_ddim(audio, seed):
    """Plain-float DDIM over every timestep, audio-only branch."""
    s = 0.008
    f = lambda u: math.cos((u + s) / (1 + s) * math.pi / 2) ** 2
    ab = [f(t / T) / f(0.0) for t in range(T + 1)]
    ab[T] = 0.0
    xs = [float(np.random.default_rng([seed, i]).standard_normal(1)[0]) for i in range(len(audio))]
    for t in range(T, 0, -1):
        nxt = t - 1
        for i, a in enumerate(audio):
            x0 = 0.3 * t / T * xs[i] + 0.5 * a
            eps = (xs[i] - math.sqrt(ab[t]) * x0) / math.sqrt(1 - ab[t])
            xs[i] = math.sqrt(ab[nxt]) * x0 + math.sqrt(1 - ab[nxt]) * eps
    return xs


def toy_sampler(guidance=GuidanceConfig(1.0, 0.0), steps=T):
    return Sampler(linear_model, 1, 2, cosine_schedule(T), guidance, steps, window=64)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_full_length_ddim_matches_oracle(seed):
    audio = np.random.default_rng(seed).normal(size=(12, 1))
    out = sample_ddim(toy_sampler(), audio, np.array([0.4, 0.0]), seed=seed)
    ref = oracle_ddim(audio[:, 0].tolist(), seed)
    assert np.abs(out[:, 0] - ref).max() <= 1e-8


def test_same_seed_same_output():
    audio = np.random.default_rng(0).normal(size=(20, 1))
    s = toy_sampler(GuidanceConfig(), steps=10)
    assert np.array_equal(sample_ddim(s, audio, np.ones(2), 3), sample_ddim(s, audio, np.ones(2), 3))


def test_prompt_unused_without_prompt_strength():
    audio = np.random.default_rng(0).normal(size=(10, 1))
    s = toy_sampler(GuidanceConfig(2.0, 0.0), steps=8)
    assert np.array_equal(sample_ddim(s, audio, np.array([5.0, 0.0]), 1),
                          sample_ddim(s, audio, np.array([-5.0, 1.0]), 1))


def test_initial_noise_is_per_frame():
    whole = frame_noise(4, 0, 10, 3)
    assert np.array_equal(whole[6:], frame_noise(4, 6, 4, 3))


def test_rotation_channels_clamped():
    def wild(x_t, t, audio, prompt, mp, ma):
        return np.full_like(x_t, 40.0)
    s = Sampler(wild, 8, 2, cosine_schedule(T), GuidanceConfig(1.0, 0.0), 5,
                rotation_channels=slice(2, 5), window=64)
    out = sample_ddim(s, np.zeros((6, 1)))
    assert np.abs(out[:, 2:5]).max() <= np.pi and np.isfinite(out).all()
    assert np.allclose(out[:, :2], 40.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, T), st.integers(0, 1000))
def test_exact_model_is_a_fixed_point(steps, seed):
    """A denoiser that always answers the same clean signal lands on it for any step count."""
    target = np.random.default_rng(seed).normal(size=(7, 3))

    def oracle(x_t, t, audio, prompt, mp, ma):
        return np.broadcast_to(target, x_t.shape).copy()

    s = Sampler(oracle, 3, 2, cosine_schedule(T), GuidanceConfig(), steps, window=64)
    assert np.allclose(sample_ddim(s, np.zeros((7, 1)), seed=seed), target, atol=1e-12)


def test_invalid_step_count():
    with pytest.raises(ValueError):
        toy_sampler(steps=T + 1)
