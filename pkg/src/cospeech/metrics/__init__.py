from .core import BEAT_SIGMA, FDD_UNIT, angular_speed, beat_align, fdd, lve, pose_beats
from .report import ClipEval, ClipScore, EvalReport, evaluate_clips, format_table, reports_to_json

__all__ = [
    "BEAT_SIGMA", "ClipEval", "ClipScore", "EvalReport", "FDD_UNIT", "angular_speed",
    "beat_align", "evaluate_clips", "fdd", "format_table", "lve", "pose_beats", "reports_to_json",
]
