import numpy as np
import pytest

from cospeech.diffusion.denoiser import Denoiser, DenoiserConfig
from cospeech.diffusion.guidance import GuidanceConfig
from cospeech.diffusion.sampler import Normalizer, Sampler
from cospeech.diffusion.schedule import cosine_schedule

TINY = DenoiserConfig(n_layers=1, n_heads=2, dim=16, window=40, motion_dim=10, audio_dim=8,
                      prompt_dim=12, ffn_mult=2, T=100)


def make_sampler(config=TINY, ddim_steps=6, seed=0, **kw) -> Sampler:
    rng = np.random.default_rng(seed)
    model = Denoiser(config, rng)
    motion_norm = Normalizer(rng.normal(0, 0.3, config.motion_dim), rng.uniform(0.5, 2.0, config.motion_dim))
    audio_norm = Normalizer(rng.normal(0, 1, config.audio_dim), rng.uniform(0.5, 2.0, config.audio_dim))
    return Sampler(model.predict, config.motion_dim, config.prompt_dim, cosine_schedule(config.T),
                   kw.pop("guidance", GuidanceConfig()), ddim_steps, motion_norm, audio_norm,
                   window=config.window, **kw)


@pytest.fixture(scope="session")
def tiny_sampler() -> Sampler:
    return make_sampler()


@pytest.fixture
def features():
    def make(n, seed=0):
        return np.random.default_rng([seed, n]).normal(size=(n, TINY.audio_dim))
    return make


@pytest.fixture
def prompt_vec():
    def make(seed=0):
        v = np.random.default_rng([seed, 99]).normal(size=TINY.prompt_dim)
        return v / np.linalg.norm(v)
    return make


# -- acceptance verdicts: one line per criterion, repeated in the terminal summary --

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        VERDICTS.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
