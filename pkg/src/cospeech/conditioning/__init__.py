from .audio import (
    FPS,
    SAMPLE_RATE,
    AudioClip,
    AudioError,
    AudioFeatureSeq,
    LogMelEncoder,
    align_features,
    extract_audio_features,
    read_wav,
    write_wav,
)
from .masking import ConditionBundle, ConditionMask, apply_condition_masks, sample_condition_masks
from .prompt import (
    BUILTIN_STYLES,
    PROMPT_DIM,
    PromptEmbedding,
    StyleVocabulary,
    embed_image_stub,
    embed_prompt,
    null_prompt,
)

__all__ = [
    "AudioClip", "AudioError", "AudioFeatureSeq", "BUILTIN_STYLES", "ConditionBundle",
    "ConditionMask", "FPS", "LogMelEncoder", "PROMPT_DIM", "PromptEmbedding", "SAMPLE_RATE",
    "StyleVocabulary", "align_features", "apply_condition_masks", "embed_image_stub",
    "embed_prompt", "extract_audio_features", "null_prompt", "read_wav",
    "sample_condition_masks", "write_wav",
]
