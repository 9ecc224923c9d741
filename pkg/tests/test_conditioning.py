import itertools
import math

import numpy as np
import pytest

from cospeech.conditioning import (
    AudioClip,
    AudioError,
    LogMelEncoder,
    StyleVocabulary,
    align_features,
    apply_condition_masks,
    embed_image_stub,
    embed_prompt,
    extract_audio_features,
    read_wav,
    sample_condition_masks,
    write_wav,
)
from cospeech.conditioning.prompt import BUILTIN_STYLES


def sine(freq, seconds=1.0, sr=16000, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip.from_float(amp * np.sin(2 * np.pi * freq * t), sr)


class TestFeatures:
    def test_silence_is_log_floor(self):
        clip = AudioClip(np.zeros(16000, dtype=np.int16))
        enc = LogMelEncoder()
        feats = extract_audio_features(clip, enc).features
        assert feats.shape == (30, 32)
        assert (feats == enc.log_floor).all()

    def test_deterministic(self):
        clip = AudioClip.from_float(np.random.default_rng(0).normal(0, 0.1, 24000))
        a = extract_audio_features(clip).features
        b = extract_audio_features(clip).features
        assert np.array_equal(a, b)
        assert a.shape == (45, 32)

    def test_sine_peaks_in_band_containing_frequency(self):
        enc = LogMelEncoder()
        feats = extract_audio_features(sine(1000.0), enc).features
        band = int(np.argmax(feats.mean(axis=0)))
        # independent band edges from the HTK mel formula
        mel = lambda f: 2595 * math.log10(1 + f / 700)
        inv = lambda m: 700 * (10 ** (m / 2595) - 1)
        lo_m, hi_m = mel(20.0), mel(8000.0)
        pts = [inv(lo_m + (hi_m - lo_m) * i / 33) for i in range(34)]
        assert pts[band] <= 1000.0 <= pts[band + 2]

    def test_empty_rejected(self):
        with pytest.raises(AudioError):
            extract_audio_features(AudioClip(np.zeros(0, dtype=np.int16)))

    def test_custom_encoder(self):
        clip = AudioClip(np.zeros(16000, dtype=np.int16))
        feats = extract_audio_features(clip, lambda x, sr: np.ones((7, 5))).features
        assert feats.shape == (30, 5) and (feats == 1).all()


class TestAlign:
    def test_identity(self):
        raw = np.random.default_rng(0).normal(size=(9, 3))
        assert np.array_equal(align_features(raw, 9), raw)

    def test_hand_example(self):
        np.testing.assert_allclose(align_features(np.array([[0.0], [1.0]]), 3)[:, 0], [0, 0.5, 1])

    def test_single_frame_repeats(self):
        out = align_features(np.array([[2.0, 3.0]]), 5)
        assert (out == [2.0, 3.0]).all() and out.shape == (5, 2)

    @pytest.mark.parametrize("m,n", [(5, 17), (40, 12), (2, 2), (3, 100)])
    def test_endpoints_preserved(self, m, n):
        raw = np.random.default_rng(m * n).normal(size=(m, 4))
        out = align_features(raw, n)
        assert np.array_equal(out[0], raw[0]) and np.array_equal(out[-1], raw[-1])

    def test_bad_length(self):
        with pytest.raises(ValueError):
            align_features(np.ones((3, 2)), 0)


class TestWav:
    def test_roundtrip(self, tmp_path):
        clip = AudioClip.from_float(np.random.default_rng(1).normal(0, 0.1, 8000))
        write_wav(tmp_path / "a.wav", clip)
        back = read_wav(tmp_path / "a.wav")
        assert np.array_equal(back.samples, clip.samples) and back.sample_rate == 16000

    def test_rate_policy(self, tmp_path):
        clip = AudioClip.from_float(np.zeros(8000), sample_rate=8000)
        write_wav(tmp_path / "b.wav", clip)
        with pytest.raises(AudioError):
            read_wav(tmp_path / "b.wav")
        assert read_wav(tmp_path / "b.wav", resample=True).samples.size == 16000

    def test_garbage(self, tmp_path):
        (tmp_path / "c.wav").write_bytes(b"not a wav")
        with pytest.raises(AudioError):
            read_wav(tmp_path / "c.wav")

    def test_duration_invariant(self):
        clip = AudioClip(np.zeros(40000, dtype=np.int16))
        assert abs(clip.samples.size - clip.duration * 16000) <= 1
        assert clip.n_frames == 75


class TestPrompt:
    def test_deterministic_unit_norm(self):
        a, b = embed_prompt("happy"), embed_prompt("happy")
        assert np.array_equal(a.vector, b.vector)
        for s in ["happy", "a wistful smile", "Sad ", "x"]:
            assert np.linalg.norm(embed_prompt(s).vector) == pytest.approx(1.0, abs=1e-12)

    def test_builtin_tokens_are_distinct(self):
        vecs = [embed_prompt(t).vector for t in BUILTIN_STYLES]
        assert len(vecs) == 8
        for u, v in itertools.combinations(vecs, 2):
            assert float(u @ v) < 0.9

    def test_null_and_empty(self):
        assert embed_prompt(None).is_null
        with pytest.raises(ValueError):
            embed_prompt("   ")

    def test_vocab_file_roundtrip(self, tmp_path):
        vocab = StyleVocabulary({"gleeful": 5})
        vocab.save(tmp_path / "v.json")
        loaded = StyleVocabulary.load(tmp_path / "v.json")
        assert np.array_equal(loaded.embed("gleeful").vector, vocab.embed("gleeful").vector)

    def test_image_stub(self):
        e = embed_image_stub(b"\x89PNG...")
        assert e.source == "image-stub" and np.linalg.norm(e.vector) == pytest.approx(1.0)


class TestMasks:
    def test_no_masking(self):
        rng = np.random.default_rng(0)
        p = embed_prompt("happy")
        for _ in range(100):
            b = apply_condition_masks(np.zeros((3, 2)), p, rng, 0.0, 0.0)
            assert b.mask.variant == "full"

    def test_full_masking(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            b = apply_condition_masks(np.zeros((3, 2)), embed_prompt("sad"), rng, 0.3, 1.0)
            assert b.mask.mask_all and b.mask.variant == "uncond"

    def test_monte_carlo_rates(self):
        mp, ma = sample_condition_masks(100_000, np.random.default_rng(11), 0.1, 0.1)
        assert abs(mp.mean() - 0.1) <= 0.01
        assert abs(ma.mean() - 0.1) <= 0.01

    def test_probability_range(self):
        with pytest.raises(ValueError):
            sample_condition_masks(3, np.random.default_rng(0), 1.5, 0.1)
