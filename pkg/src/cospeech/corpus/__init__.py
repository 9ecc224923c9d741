from .dataset import (
    Corpus,
    CorpusError,
    CorpusSample,
    generate_corpus,
    load_corpus,
    split_for,
)
from .oracle import FEATURE_REFERENCE, FEATURE_SCALE, MotionOracle, synth_oracle
from .synth import synth_speech_like

__all__ = [
    "Corpus", "CorpusError", "CorpusSample", "FEATURE_REFERENCE", "FEATURE_SCALE",
    "MotionOracle", "generate_corpus", "load_corpus", "split_for", "synth_oracle",
    "synth_speech_like",
]
