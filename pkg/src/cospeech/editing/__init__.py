from .ops import Segment, compose_sequential, inpaint_keyframes, keyframe_hook, style_inbetween
from .spec import EditError, EditSpec, Keyframe, StyleSegment, StyleTrack

__all__ = [
    "EditError", "EditSpec", "Keyframe", "Segment", "StyleSegment", "StyleTrack",
    "compose_sequential", "inpaint_keyframes", "keyframe_hook", "style_inbetween",
]
