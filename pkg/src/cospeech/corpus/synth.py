"""Speech-like test audio: band-limited noise bursts over a quiet noise floor."""
from __future__ import annotations

import numpy as np
from scipy import signal

from ..conditioning.audio import SAMPLE_RATE, AudioClip


def synth_speech_like(duration: float, rng: np.random.Generator,
                      sample_rate: int = SAMPLE_RATE) -> AudioClip:
    """Syllable-rate bursts with random length, loudness and spectral centre."""
    n = int(round(duration * sample_rate))
    out = rng.normal(0.0, 0.002, n)
    t = rng.uniform(0.0, 0.2)
    while t < duration:
        length = rng.uniform(0.06, 0.25)
        start, stop = int(t * sample_rate), min(n, int((t + length) * sample_rate))
        if stop - start > 16:
            centre = np.exp(rng.uniform(np.log(200.0), np.log(3500.0)))
            lo, hi = centre / 1.4, min(centre * 1.4, 0.45 * sample_rate)
            sos = signal.butter(4, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")
            burst = signal.sosfilt(sos, rng.normal(size=stop - start))
            burst /= np.abs(burst).max() + 1e-12
            amp = np.exp(rng.uniform(np.log(0.03), np.log(0.6)))
            out[start:stop] += amp * burst * signal.windows.hann(stop - start)
        t += length + rng.uniform(0.03, 0.3)
    return AudioClip.from_float(np.clip(out, -1.0, 1.0), sample_rate)
