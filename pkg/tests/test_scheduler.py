import json
import queue
import threading
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cospeech.diffusion.sampler import sample_ddim
from cospeech.scheduler import (StreamStats, StreamUnderrun, bench_throughput, denoise_long,
                                plan_windows, seam_ratio, second_differences, split_windows,
                                stream_realtime, taper_weights, window_starts)


class TestPlan:
    def test_short_sequence_single_window(self):
        plan = plan_windows(200, 200, 50)
        assert plan.starts == (0,)
        assert np.array_equal(plan.weights[0], np.ones(200))

    def test_stride_rule(self):
        assert plan_windows(350, 200, 50).starts == (0, 150)

    def test_last_window_right_aligned(self):
        plan = plan_windows(500, 200, 50)
        assert plan.starts == (0, 150, 300)
        assert plan.bounds()[-1][1] == 500

    def test_longer_final_overlap(self):
        # stride would put the last start at 300; it is pulled back to 220
        assert window_starts(420, 200, 50) == [0, 150, 220]

    def test_shorter_than_window(self):
        plan = plan_windows(30, 200, 50)
        assert plan.lengths() == [30]

    @pytest.mark.parametrize("L, N, O", [(0, 10, 2), (10, 0, 0), (10, 5, 5), (10, 5, -1), (10, 5, 1.5)])
    def test_rejects_bad_inputs(self, L, N, O):
        with pytest.raises(ValueError):
            plan_windows(L, N, O)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 600), st.integers(1, 120), st.data())
    def test_partition_of_unity_and_coverage(self, L, N, data):
        O = data.draw(st.integers(0, N - 1))
        plan = plan_windows(L, N, O)
        assert plan.bounds()[0][0] == 0 and plan.bounds()[-1][1] == L
        assert np.max(np.abs(plan.weight_sum() - 1.0)) <= 1e-12
        for w in plan.weights:
            assert (w > 0).all() and (w <= 1.0 + 1e-12).all()
        for (a0, b0), (a1, b1) in zip(plan.bounds(), plan.bounds()[1:]):
            assert a1 <= b0, "gap between windows"
            assert b0 - a1 >= min(O, L) or len(plan.starts) == 1

    def test_taper_weights_reject_gaps(self):
        with pytest.raises(ValueError):
            taper_weights([(0, 5), (6, 10)], 10)


class TestDenoiseLong:
    def test_single_window_matches_sample_ddim(self, tiny_sampler, features, prompt_vec):
        f = features(40)
        a = sample_ddim(tiny_sampler, f, prompt_vec(), seed=5)
        b = denoise_long(tiny_sampler, f, prompt_vec(), seed=5)
        assert np.array_equal(a, b)

    def test_shape_and_finite(self, tiny_sampler, features):
        out = denoise_long(tiny_sampler, features(95), None, seed=1)
        assert out.shape == (95, tiny_sampler.motion_dim)
        assert np.isfinite(out).all()

    @pytest.mark.parametrize("capacity, threads", [(2, 1), (3, 2), (8, 1), (1, 4)])
    def test_batch_partition_does_not_change_output(self, tiny_sampler, features, prompt_vec,
                                                    capacity, threads):
        f = features(150)
        ref = denoise_long(replace(tiny_sampler, capacity=1), f, prompt_vec(), seed=2)
        out = denoise_long(replace(tiny_sampler, capacity=capacity, threads=threads), f,
                           prompt_vec(), seed=2)
        assert np.array_equal(ref, out)

    def test_seed_changes_output(self, tiny_sampler, features):
        f = features(90)
        assert not np.array_equal(denoise_long(tiny_sampler, f, seed=0),
                                  denoise_long(tiny_sampler, f, seed=1))

    def test_final_blend_mode(self, tiny_sampler, features):
        out = denoise_long(tiny_sampler, features(90), seed=0, blend="final")
        assert out.shape == (90, tiny_sampler.motion_dim) and np.isfinite(out).all()
        with pytest.raises(ValueError):
            denoise_long(tiny_sampler, features(90), seed=0, blend="sometimes")

    def test_window_required(self, tiny_sampler, features):
        with pytest.raises(ValueError):
            denoise_long(replace(tiny_sampler, window=None), features(20))


class TestSeamMetric:
    def test_second_differences_of_ramp_vanish(self):
        x = np.outer(np.arange(10.0), [1.0, -2.0])
        assert np.allclose(second_differences(x), 0.0)

    def test_kink_is_detected(self):
        x = np.concatenate([np.zeros(50), np.arange(50.0)])[:, None]
        x = x + 0.01 * np.random.default_rng(0).normal(size=x.shape)
        seam = np.zeros(100, bool)
        seam[45:55] = True
        assert seam_ratio(x, seam) > 2.0

    def test_needs_both_regions(self):
        with pytest.raises(ValueError):
            seam_ratio(np.zeros((10, 2)), np.zeros(10, bool))


class TestStreaming:
    def test_one_window_matches_sample_ddim(self, tiny_sampler, features, prompt_vec):
        f = features(40)
        chunks = list(stream_realtime(tiny_sampler, [f], prompt_vec(), seed=3, overlap=10))
        out = np.concatenate([c.frames for c in chunks])
        assert np.array_equal(out, sample_ddim(tiny_sampler, f, prompt_vec(), seed=3))

    @pytest.mark.parametrize("L", [70, 71, 120, 157])
    def test_emits_every_frame_once_in_order(self, tiny_sampler, features, L):
        stats = StreamStats()
        wins = split_windows(features(L), 40, 10)
        chunks = list(stream_realtime(tiny_sampler, wins, seed=0, overlap=10, stats=stats))
        starts = [c.start for c in chunks]
        sizes = [c.frames.shape[0] for c in chunks]
        assert sum(sizes) == L == stats.frames
        assert starts == list(np.cumsum([0] + sizes[:-1]))
        assert stats.windows == len(wins)

    def test_committed_frames_never_change(self, tiny_sampler, features):
        wins = split_windows(features(120), 40, 10)
        seen = []
        for chunk in stream_realtime(tiny_sampler, wins, seed=0, overlap=10):
            seen.append((chunk.start, chunk.frames.copy(), chunk.frames))
        for _, copy, live in seen:
            assert np.array_equal(copy, live)
        # the prefix emitted before later windows arrive is the same as with the full stream
        first = next(iter(stream_realtime(tiny_sampler, wins[:1] + wins[1:2], seed=0, overlap=10)))
        assert np.array_equal(first.frames, seen[0][1])

    def test_queue_source_and_underrun_report(self, tiny_sampler, features):
        q = queue.Queue()
        wins = split_windows(features(70), 40, 10)
        stats = StreamStats()

        def feed():
            for w in wins:
                q.put(w)
                threading.Event().wait(0.15)
            q.put(None)

        t = threading.Thread(target=feed)
        t.start()
        frames = sum(c.frames.shape[0] for c in
                     stream_realtime(tiny_sampler, q, seed=0, overlap=10, timeout=0.01, stats=stats))
        t.join()
        assert frames == 70
        assert stats.underruns > 0

    def test_underrun_limit_raises(self, tiny_sampler):
        with pytest.raises(StreamUnderrun):
            list(stream_realtime(tiny_sampler, queue.Queue(), timeout=0.01, max_stall=0.03))

    def test_split_windows_overlap(self, features):
        f = features(100)
        wins = split_windows(f, 40, 10)
        assert [w.shape[0] for w in wins] == [40, 40, 40]
        assert np.array_equal(wins[0][-10:], wins[1][:10])
        with pytest.raises(ValueError):
            split_windows(f, 40, 40)


def test_bench_report_structure(tiny_sampler):
    report = bench_throughput(replace(tiny_sampler, ddim_steps=2), L=120, capacities=(1, 4),
                              threads=(1,))
    json.dumps(report)
    assert report["config"]["L"] == 120
    assert [r["capacity"] for r in report["runs"]] == [1, 4]
    assert all(r["identical_to_first"] for r in report["runs"])
    assert report["runs"][0]["speedup"] == 1.0
    assert report["scaling"]["seconds_2L"] > 0
    assert report["speedup"] == max(r["speedup"] for r in report["runs"])
