import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cospeech.conditioning import BUILTIN_STYLES, read_wav
from cospeech.corpus import (CorpusError, MotionOracle, generate_corpus, load_corpus, split_for,
                             synth_oracle, synth_speech_like)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "c"
    generate_corpus(out, 10, duration_range=(1.0, 2.0), seed=4)
    return out


class TestOracle:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(sorted(BUILTIN_STYLES)))
    def test_latent_is_affine_in_features(self, seed, style):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(-5, 1, (2, 12, 32))
        oracle = MotionOracle()
        za, zb = oracle(a, style)[0], oracle(b, style)[0]
        zmid = oracle((a + b) / 2, style)[0]
        assert np.allclose(zmid, (za + zb) / 2, atol=1e-12)

    def test_styles_differ(self):
        f = np.random.default_rng(0).normal(-5, 1, (20, 32))
        z = {s: synth_oracle(f, s)[0] for s in sorted(BUILTIN_STYLES)}
        names = sorted(z)
        assert all(not np.allclose(z[a], z[b]) for a, b in zip(names, names[1:]))

    def test_reference_level_gives_style_offset(self):
        oracle = MotionOracle()
        f = np.full((6, 32), -5.0)
        z, pose = oracle(f, "neutral")
        assert np.allclose(z, oracle.style("neutral").offset, atol=1e-12)
        assert np.allclose(pose[:, 3:], 0.0)

    def test_unknown_style(self):
        with pytest.raises(KeyError):
            synth_oracle(np.zeros((4, 32)), "bored")

    def test_bad_features(self):
        with pytest.raises(ValueError):
            MotionOracle()(np.zeros((4, 31)), "happy")


def test_speech_like_audio_is_pcm16_and_seeded():
    a = synth_speech_like(0.5, np.random.default_rng(1))
    b = synth_speech_like(0.5, np.random.default_rng(1))
    assert np.array_equal(a.samples, b.samples)
    assert a.samples.dtype == np.int16 and len(a.samples) == a.sample_rate // 2
    assert np.abs(a.samples.astype(int)).max() > 100  # bursts are audible above the floor


def test_split_is_stable_and_roughly_balanced():
    ids = [f"clip{i:05d}" for i in range(2000)]
    splits = [split_for(i, 0) for i in ids]
    assert splits == [split_for(i, 0) for i in ids]
    frac = splits.count("train") / len(ids)
    assert 0.75 < frac < 0.85 and "test" in splits and "val" in splits


class TestOnDisk:
    def test_roundtrip_is_bit_exact(self, corpus_dir):
        c = load_corpus(corpus_dir)
        assert len(c) == 10 and not c.rejected
        s = c.samples[0]
        again = load_corpus(corpus_dir).samples[0]
        for name in ("features", "latent", "pose"):
            assert getattr(s, name).dtype == np.float32
            assert np.array_equal(getattr(s, name), getattr(again, name))

    def test_motion_matches_oracle(self, corpus_dir):
        c = load_corpus(corpus_dir)
        s = c.samples[3]
        latent, pose = c.oracle(s.features.astype(np.float64), s.style)
        assert np.allclose(s.latent, latent, atol=1e-5) and np.allclose(s.pose, pose, atol=1e-5)
        assert s.motion.shape == (s.n_frames, 22) and s.motion.dtype == np.float64

    def test_frames_follow_audio_duration(self, corpus_dir):
        s = load_corpus(corpus_dir).samples[0]
        clip = read_wav(s.wav)
        assert s.n_frames == round(len(clip.samples) / clip.sample_rate * 30)

    def test_same_seed_same_corpus(self, corpus_dir, tmp_path):
        generate_corpus(tmp_path / "again", 10, duration_range=(1.0, 2.0), seed=4)
        m1 = json.loads((corpus_dir / "manifest.json").read_text())
        m2 = json.loads((tmp_path / "again" / "manifest.json").read_text())
        assert m1 == m2

    def test_refuses_non_empty_target(self, corpus_dir):
        with pytest.raises(CorpusError):
            generate_corpus(corpus_dir, 2)

    def test_corrupt_sample_is_rejected(self, corpus_dir, tmp_path):
        import shutil
        copy = tmp_path / "copy"
        shutil.copytree(corpus_dir, copy)
        blob = sorted((copy / "clips").glob("*.latent.f32"))[0]
        data = bytearray(blob.read_bytes())
        data[0] ^= 0xFF
        blob.write_bytes(bytes(data))
        c = load_corpus(copy)
        assert len(c) == 9 and len(c.rejected) == 1 and "checksum" in c.rejected[0][1]

    def test_empty_directory(self, tmp_path, caplog):
        assert len(load_corpus(tmp_path)) == 0
        assert "empty" in caplog.text

    def test_missing_manifest(self, tmp_path):
        (tmp_path / "stray.txt").write_text("x")
        with pytest.raises(CorpusError):
            load_corpus(tmp_path)

    def test_bad_arguments(self, tmp_path):
        with pytest.raises(ValueError):
            generate_corpus(tmp_path / "a", 0)
        with pytest.raises(ValueError):
            generate_corpus(tmp_path / "b", 2, duration_range=(3.0, 1.0))
