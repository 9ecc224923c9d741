import numpy as np
import pytest

from cospeech.corpus import generate_corpus, load_corpus
from cospeech.latent import GeometryVAE, make_rig
from cospeech.pipeline import (evaluate_generator, evaluate_mean_baseline, evaluate_model,
                               mean_motion, motion_geometry, motion_latents, motion_weights,
                               split_motion, target_motion, train_denoiser)


@pytest.fixture(scope="module")
def setup(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    samples = load_corpus(generate_corpus(root / "c", 6, duration_range=(1.0, 1.5), seed=1)).samples
    vae = GeometryVAE(hidden=32, id_dim=4, steps=30, n_identities=2).fit(make_rig(128))
    return samples, vae


def test_split_motion():
    m = np.arange(44.0).reshape(2, 22)
    head, pose = split_motion(m)
    assert head.shape == (2, 16) and pose.shape == (2, 6)


def test_targets(setup):
    samples, vae = setup
    s = samples[0]
    assert np.array_equal(target_motion(s), s.motion)
    bypass = target_motion(s, vae, bypass_latent=True)
    assert bypass.shape == (s.n_frames, 24 + 6)
    assert (bypass[:, :24] >= 0).all() and (bypass[:, :24] <= 1).all()
    with pytest.raises(ValueError):
        target_motion(s, None, bypass_latent=True)


def test_motion_decoding_paths(setup):
    samples, vae = setup
    m = samples[0].motion
    assert np.array_equal(motion_latents(m, vae), m[:, :16])
    assert motion_weights(m, vae).shape == (len(m), 24)
    geom, pose = motion_geometry(m, vae)
    assert geom.shape == (len(m), 128, 3) and np.array_equal(pose, m[:, 16:])
    w = np.concatenate([np.full((len(m), 24), 0.3), m[:, 16:]], axis=1)
    assert np.array_equal(motion_weights(w, vae, bypass_latent=True)[:, 0], np.full(len(m), 0.3))
    assert motion_latents(w, vae, bypass_latent=True).shape == (len(m), 16)


def test_ground_truth_scores_perfectly(setup):
    samples, vae = setup
    rep = evaluate_generator(lambda s: s.motion, samples, vae, "gt")
    assert (rep.lve_mm, rep.fdd) == (0.0, 0.0) and len(rep.rows) == len(samples)


def test_mean_baseline(setup):
    samples, vae = setup
    mean = mean_motion(samples)
    assert mean.shape == (22,)
    rep = evaluate_mean_baseline(samples, samples, vae)
    assert rep.lve_mm > 0 and rep.name == "mean predictor"


def test_trained_model_evaluates(setup):
    samples, vae = setup
    est = train_denoiser(samples, steps=2, batch_size=2, window=20, ddim_steps=2)
    assert est.bypass_latent_ is False
    rep = evaluate_model(est, samples[:2], vae, "toy")
    assert len(rep.rows) == 2 and np.isfinite([rep.lve_mm, rep.fdd, rep.ba]).all()


def test_bypass_model_has_weight_channels(setup):
    samples, vae = setup
    est = train_denoiser(samples, vae, bypass_latent=True, steps=1, batch_size=2, window=20,
                         ddim_steps=2)
    assert est.config_.motion_dim == 24 + 6 and est.bypass_latent_
    rep = evaluate_model(est, samples[:1], vae)
    assert len(rep.rows) == 1
