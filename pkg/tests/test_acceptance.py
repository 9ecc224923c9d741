"""Acceptance run: every criterion at its stated tolerance, one verdict line each.

The expensive artefacts (corpus, two VAEs, three denoisers) are built once per
session. Set ``COSPEECH_ACCEPTANCE_DIR`` to keep them between runs; anything
already present there is loaded instead of retrained.
"""
import json
import math
import os
import time
import zlib
from pathlib import Path

import numpy as np
import pytest

from cospeech.autograd.gradcheck import check_gradients
from cospeech.cli import main as cli_main
from cospeech.conditioning import embed_prompt
from cospeech.corpus import generate_corpus, load_corpus
from cospeech.diffusion import Denoiser, MotionDiffusion, preset_config, sample_ddim
from cospeech.diffusion.guidance import GuidanceConfig, cfg_combine
from cospeech.diffusion.losses import LossWeights, loss_terms, training_loss
from cospeech.diffusion.schedule import cosine_schedule
from cospeech.editing import EditSpec, Keyframe, inpaint_keyframes
from cospeech.latent import GeometryVAE, make_rig
from cospeech.metrics import beat_align, fdd, lve
from cospeech.pipeline import evaluate_mean_baseline, evaluate_model, train_denoiser
from cospeech.scheduler import bench_throughput, denoise_long, plan_windows, seam_ratio

import test_autograd
import test_metrics

pytestmark = pytest.mark.slow

FD_TOL = 1e-4
# fidelity and the ablations are all scored with plain conditional sampling,
# the only guidance setting under which an exact model reproduces the corpus
EVAL_GUIDANCE = dict(s_audio=0.0, s_prompt=1.0)


# -- shared artefacts ------------------------------------------------------------

@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    path = os.environ.get("COSPEECH_ACCEPTANCE_DIR")
    if path:
        Path(path).mkdir(parents=True, exist_ok=True)
        return Path(path)
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def corpus(workdir):
    root = workdir / "corpus"
    if not (root / "manifest.json").exists():
        generate_corpus(root, 200, seed=0)
    return load_corpus(root)


def _vae(workdir, name, **params):
    path = workdir / f"{name}.ckpt"
    if path.exists():
        return GeometryVAE.load(path)
    vae = GeometryVAE(**params).fit(make_rig())
    vae.save(path)
    return vae


@pytest.fixture(scope="session")
def vae(workdir):
    """Default latent space (d_z=16) used to decode generated motion."""
    return _vae(workdir, "vae")


@pytest.fixture(scope="session")
def vae_full_rank(workdir):
    """beta=0 and d_z >= K: the linear rig is exactly representable."""
    return _vae(workdir, "vae_full_rank", latent_dim=24, beta=0.0)


def _denoiser(workdir, corpus, name, **kw):
    path, info = workdir / f"{name}.ckpt", workdir / f"{name}.json"
    if path.exists() and info.exists():
        est, meta = MotionDiffusion.load(path)
        est.bypass_latent_ = bool(meta.get("bypass_latent", False))
        return est, json.loads(info.read_text())
    t0 = time.perf_counter()
    est = train_denoiser(corpus.split("train"), **kw)
    seconds = time.perf_counter() - t0
    est.save(path, bypass_latent=est.bypass_latent_)
    record = {"seconds": seconds, "simple": est.history_["simple"]}
    info.write_text(json.dumps(record))
    return est, record


@pytest.fixture(scope="session")
def full_model(workdir, corpus):
    return _denoiser(workdir, corpus, "full")


@pytest.fixture(scope="session")
def no_cfg_model(workdir, corpus):
    return _denoiser(workdir, corpus, "no_cfg", no_cfg_masking=True)


@pytest.fixture(scope="session")
def bypass_model(workdir, corpus, vae):
    return _denoiser(workdir, corpus, "bypass", vae=vae, bypass_latent=True)


# -- 1-4: algebra and gradients ----------------------------------------------------

def test_01_gradient_correctness(verdict):
    t0 = time.perf_counter()
    errors = {}
    for name, (fn, shapes) in sorted(test_autograd.OP_CASES.items()):
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        args = [test_autograd._rand(rng, *s) for s in shapes]
        errors[name] = max(check_gradients(lambda: test_autograd._weighted_sum(fn(*args), rng), args))

    config = preset_config("toy", window=6)
    model = Denoiser(config, np.random.default_rng(5))
    rng = np.random.default_rng(5)
    x_t, x0 = rng.normal(size=(2, 3, 6, config.motion_dim))
    audio = rng.normal(size=(3, 6, config.audio_dim))
    prompt = rng.normal(size=(3, config.prompt_dim))
    t = np.array([3, 250, 499])
    masks = np.array([False, True, False]), np.array([False, False, True])

    def loss():
        return training_loss(x0, model(x_t, t, audio, prompt, *masks), LossWeights())[0]

    # every parameter tensor, a few entries each
    errors["toy_denoiser"] = max(check_gradients(loss, model.parameters(), samples_per_tensor=4))
    seconds = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = errors[worst] <= FD_TOL and seconds < 120
    verdict(1, "gradient correctness", ok,
            f"max rel err {errors[worst]:.2e} ({worst}) over {len(errors)} checks, "
            f"{seconds:.1f}s on {os.cpu_count()} CPU(s)")
    assert ok


def test_02_loss_algebra(verdict):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 10, 4))
    same = loss_terms(x, x)
    ramp = np.linspace(0, 3, 12)[:, None] * np.array([1.0, -2.0, 0.5])
    smooth = loss_terms(np.zeros_like(ramp), ramp)["smooth"]
    hand = loss_terms(np.array([[0.0], [1.0], [2.0]]), np.zeros((3, 1)),
                      weights=LossWeights(1, 1, 0.01))
    expect = {"simple": 5 / 3, "velocity": 1.0, "smooth": 0.0, "total": 8 / 3}
    hand_err = max(abs(hand[k] - v) for k, v in expect.items())
    ok = same["simple"] == 0.0 and same["velocity"] == 0.0 and smooth <= 1e-24 and hand_err <= 1e-12
    verdict(2, "loss algebra", ok,
            f"identical -> ({same['simple']}, {same['velocity']}), ramp smooth {smooth:.1e}, "
            f"3-frame example err {hand_err:.1e}")
    assert ok


def test_03_guidance_algebra(verdict):
    rng = np.random.default_rng(1)
    sums = [abs(sum(GuidanceConfig(*rng.uniform(-10, 10, 2)).coefficients) - 1.0) for _ in range(1000)]
    u, a, f1, f2 = rng.normal(size=(4, 20, 6))
    independent = all(np.array_equal(cfg_combine(u, a, f1, sa, 0.0), cfg_combine(u, a, f2, sa, 0.0))
                      for sa in (0.0, 1.0, 2.5, -3.0))
    coeffs = GuidanceConfig().coefficients
    ok = max(sums) <= 1e-12 and independent and coeffs == (-3.0, 2.5, 1.5)
    verdict(3, "guidance algebra", ok,
            f"max |sum-1| {max(sums):.1e}, sP=0 independent of prompt: {independent}, "
            f"defaults {coeffs}")
    assert ok


def test_04_noise_schedule(verdict):
    sch = cosine_schedule(500)
    ab = sch.alpha_bar
    f = lambda u: math.cos((u + 0.008) / 1.008 * math.pi / 2) ** 2
    closed = f(250 / 500) / f(0.0)
    mid_err = abs(ab[250] - closed)
    ok = ab[0] == 1.0 and bool((np.diff(ab) < 0).all()) and ab[-1] <= 1e-12 and mid_err <= 1e-6
    verdict(4, "noise schedule", ok,
            f"a0={ab[0]}, strictly decreasing, aT={ab[-1]:.1e}, a250={ab[250]:.8f} "
            f"(closed form {closed:.8f})")
    assert ok


# -- 5-6: training and generation --------------------------------------------------

def test_05_training_sanity(verdict, full_model):
    est, record = full_model
    h = np.asarray(record["simple"])
    first, last = h[:50].mean(), h[-100:].mean()
    ratio = first / last
    c = est.config_
    shape = (c.n_layers, c.dim, c.window, c.motion_dim - 6)
    ok = len(h) == 2000 and ratio >= 5.0 and record["seconds"] <= 1800 and shape == (4, 64, 60, 16)
    verdict(5, "training sanity", ok,
            f"toy preset {shape}, L_simple first-50 mean {first:.3f} -> last-100 mean {last:.4f} "
            f"({ratio:.1f}x) in {len(h)} steps, {record['seconds'] / 60:.1f} min on "
            f"{os.cpu_count()} CPU(s)")
    assert ok


def test_06_generation_fidelity(verdict, corpus, vae, full_model, no_cfg_model, bypass_model):
    test, train = corpus.split("test"), corpus.split("train")
    base = evaluate_mean_baseline(train, test, vae)
    reps = {name: evaluate_model(est, test, vae, name, **EVAL_GUIDANCE)
            for name, (est, _) in (("full", full_model), ("no_cfg", no_cfg_model),
                                   ("bypass_latent", bypass_model))}
    full = reps["full"]
    fidelity = full.lve_mm <= 0.5 * base.lve_mm

    def degrades(r):
        return r.lve_mm > full.lve_mm or r.fdd > full.fdd or r.ba < full.ba

    ablations = {k: degrades(reps[k]) for k in ("no_cfg", "bypass_latent")}
    # for reference only: the same model with the default guidance strengths
    guided = evaluate_model(full_model[0], test, vae, "full, default guidance")
    fmt = lambda r: f"{r.name} LVE {r.lve_mm:.2f} FDD {r.fdd:.2f} BA {r.ba:.3f}"
    ok = fidelity and all(ablations.values())
    verdict(6, "generation fidelity", ok,
            f"{len(test)} held-out clips; baseline LVE {base.lve_mm:.2f} mm, "
            f"{fmt(full)} (<= {0.5 * base.lve_mm:.2f}: {fidelity}); "
            f"{fmt(reps['no_cfg'])} (degrades: {ablations['no_cfg']}); "
            f"{fmt(reps['bypass_latent'])} (degrades: {ablations['bypass_latent']}); "
            f"[{fmt(guided)}]")
    assert ok


# -- 7: metrics ----------------------------------------------------------------------

def test_07_metric_oracles(verdict):
    rng = np.random.default_rng(11)
    worst = {"lve": 0.0, "fdd": 0.0, "ba": 0.0}
    for _ in range(100):
        pred, gt, neutral, mask = test_metrics.random_instance(rng)
        worst["lve"] = max(worst["lve"], abs(lve(pred, gt, mask) - test_metrics.lve_oracle(
            pred.tolist(), gt.tolist(), mask)))
        worst["fdd"] = max(worst["fdd"], abs(fdd(pred, gt, mask, neutral) - test_metrics.fdd_oracle(
            pred.tolist(), gt.tolist(), mask, neutral.tolist())))
        n = int(rng.integers(3, 6))
        p, g = rng.normal(0, 0.1, (2, n, 6))
        worst["ba"] = max(worst["ba"], abs(beat_align(p, g) - test_metrics.ba_oracle(
            p.tolist(), g.tolist(), 0.1, 30)))
    gt = np.zeros((1, 2, 3))
    pred = gt.copy()
    pred[0, :, 0] = [0.001, 0.002]
    lve_hand = abs(lve(pred, gt, [0, 1]) - 2.0)

    def track(beat, n=61):
        x = np.arange(n) - beat
        pose = np.zeros((n, 6))
        pose[:, 1] = (x * np.abs(x) / 2 + x) / 30
        return pose

    ba_hand = abs(beat_align(track(33), track(30), 0.1) - math.exp(-0.5))
    ok = max(worst.values()) <= 1e-9 and lve_hand <= 1e-9 and ba_hand <= 1e-9
    verdict(7, "metric oracles", ok,
            "max oracle gap " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
            + f"; hand examples LVE {lve_hand:.1e}, BA {ba_hand:.1e}")
    assert ok


# -- 8-10: scheduler, throughput, editing --------------------------------------------

def test_08_scheduler_equivalence_and_seams(verdict, corpus, full_model):
    est = full_model[0]
    sampler = est.sampler()
    N, O = est.config_.window, est.default_overlap
    prompt = embed_prompt("happy")
    clip = corpus.split("test")[0].features.astype(np.float64)[:N]
    bitwise = np.array_equal(denoise_long(sampler, clip, prompt, 3, overlap=O),
                             sample_ddim(sampler, clip, prompt, seed=3))
    rng = np.random.default_rng(0)
    unity = 0.0
    for _ in range(300):
        n = int(rng.integers(1, 150))
        L, o = int(rng.integers(1, 1000)), int(rng.integers(0, n))
        unity = max(unity, float(np.abs(plan_windows(L, n, o).weight_sum() - 1.0).max()))
    feats = np.concatenate([s.features for s in corpus.split("test")[:4]]).astype(np.float64)[:300]
    seam = plan_windows(len(feats), N, O).blended_frames()
    ratios = [seam_ratio(denoise_long(sampler, feats, prompt, seed, overlap=O), seam)
              for seed in range(20)]
    ok = bitwise and unity <= 1e-12 and max(ratios) <= 2.0
    verdict(8, "scheduler equivalence and seams", ok,
            f"single window bitwise equal: {bitwise}; partition of unity err {unity:.1e}; "
            f"seam ratio over 20 seeds max {max(ratios):.3f} median {np.median(ratios):.3f} (<= 2)")
    assert ok


def test_09_throughput(verdict, full_model):
    cpus = os.cpu_count() or 1
    threads = (1,) if cpus == 1 else (1, cpus)
    report = bench_throughput(full_model[0].sampler(ddim_steps=10), L=1200, capacities=(1, 8),
                              threads=threads)
    batched = [r for r in report["runs"] if r["capacity"] == 8]
    best = max(r["speedup"] for r in batched)
    same = all(r["identical_to_first"] for r in report["runs"])
    scale = report["scaling"]
    ok = best >= 2.0 and same
    verdict(9, "throughput", ok,
            f"toy preset, L=1200, {cpus} CPU(s): batch-8 speedup {best:.2f}x over sequential "
            f"(needs >= 2x on >= 4 cores); outputs identical: {same}; doubling L costs "
            f"{scale['ratio']:.2f}x")
    assert ok


def test_10_editing(verdict, corpus, full_model):
    est = full_model[0]
    sampler = est.sampler()
    feats = corpus.split("test")[1].features.astype(np.float64)
    prompt = embed_prompt("sad")
    target = np.random.default_rng(4).normal(0, 1.0, sampler.motion_dim)
    out = inpaint_keyframes(sampler, feats, EditSpec.from_keyframes([Keyframe(30, target)]),
                            prompt, seed=5, overlap=est.default_overlap)
    err = float(np.abs(out[30] - target).max())
    empty = np.array_equal(inpaint_keyframes(sampler, feats, EditSpec(), prompt, seed=5,
                                             overlap=est.default_overlap),
                           denoise_long(sampler, feats, prompt, 5, overlap=est.default_overlap))
    ok = err <= 1e-3 and empty
    verdict(10, "editing", ok,
            f"keyframe at frame 30 max channel error {err:.1e} (<= 1e-3); empty edit equals "
            f"unconstrained sampling bitwise: {empty}")
    assert ok


# -- 11-12: latent space and end-to-end determinism ----------------------------------

def test_11_latent_space(verdict, vae_full_rank):
    vae = vae_full_rank
    rig = vae.rig_
    w = np.random.default_rng(99).random((200, rig.n_blendshapes))
    roundtrip = float(np.abs(vae.to_weights(vae.to_latent(w), clamp=False) - w).max())
    geom = rig.evaluate(w)
    recon = float(np.linalg.norm(vae.decode(vae.encode(geom)[0]) - geom, axis=-1).mean() * 1000)
    ok = roundtrip <= 0.05 and recon <= 0.5
    verdict(11, "latent space", ok,
            f"d_z={vae.latent_dim}, K={rig.n_blendshapes}, beta={vae.beta}: mapping roundtrip "
            f"inf-norm {roundtrip:.4f} (<= 0.05), reconstruction {recon:.3f} mm (<= 0.5)")
    assert ok


def test_12_end_to_end_determinism(verdict, workdir, corpus, vae, full_model, tmp_path):
    wav = corpus.split("test")[2].wav
    outs = [tmp_path / "a.json", tmp_path / "b.json"]
    codes = [cli_main(["generate", "--audio", wav, "--model", workdir / "full.ckpt",
                       "--vae", workdir / "vae.ckpt", "--prompt", "happy", "--seed", "11",
                       "--out", out]) for out in outs]
    same = codes == [0, 0] and outs[0].read_bytes() == outs[1].read_bytes()
    verdict(12, "end-to-end determinism", same,
            f"two generate runs, exit codes {codes}, byte-identical: {same} "
            f"({outs[0].stat().st_size if outs[0].exists() else 0} bytes)")
    assert same
