from .bench import bench_throughput, format_report
from .longform import build_jobs, denoise_long, frame_prompts, resolve_window
from .streaming import StreamChunk, StreamStats, StreamUnderrun, split_windows, stream_realtime
from .windows import (WindowPlan, plan_windows, seam_ratio, second_differences, taper_weights,
                      window_starts)

__all__ = [
    "StreamChunk", "StreamStats", "StreamUnderrun", "WindowPlan", "bench_throughput",
    "build_jobs", "denoise_long", "format_report", "frame_prompts", "plan_windows",
    "resolve_window", "seam_ratio", "second_differences", "split_windows", "stream_realtime", "taper_weights", "window_starts",
]
