"""Evaluation harness: per-clip scores, aggregates, JSON and text tables."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..conditioning.audio import FPS
from .core import BEAT_SIGMA, beat_align, fdd, lve


@dataclass(frozen=True)
class ClipEval:
    """One clip to score. ``None`` ground truth means the clip is skipped."""

    clip_id: str
    pred_geometry: np.ndarray | None
    pred_pose: np.ndarray | None
    gt_geometry: np.ndarray | None
    gt_pose: np.ndarray | None


@dataclass(frozen=True)
class ClipScore:
    clip_id: str
    n_frames: int
    lve_mm: float
    fdd: float
    ba: float


@dataclass
class EvalReport:
    name: str = "model"
    rows: list[ClipScore] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def lve_mm(self) -> float:
        return float(np.mean([r.lve_mm for r in self.rows])) if self.rows else float("nan")

    @property
    def fdd(self) -> float:
        return float(np.mean([r.fdd for r in self.rows])) if self.rows else float("nan")

    @property
    def ba(self) -> float:
        return float(np.mean([r.ba for r in self.rows])) if self.rows else float("nan")

    def summary(self) -> dict:
        return {"name": self.name, "clips": len(self.rows), "lve_mm": self.lve_mm,
                "fdd": self.fdd, "ba": self.ba}

    def to_dict(self) -> dict:
        return {**self.summary(), "rows": [asdict(r) for r in self.rows],
                "skipped": [{"clip_id": c, "reason": why} for c, why in self.skipped]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate_clips(clips, lip_mask, upper_mask, neutral, name: str = "model",
                   sigma: float = BEAT_SIGMA, fps: float = FPS) -> EvalReport:
    """Score every clip that has ground truth; the rest are listed as skipped."""
    report = EvalReport(name)
    for c in clips:
        if c.gt_geometry is None or c.gt_pose is None:
            report.skipped.append((c.clip_id, "missing ground truth"))
            continue
        if c.pred_geometry is None or c.pred_pose is None:
            report.skipped.append((c.clip_id, "missing prediction"))
            continue
        report.rows.append(ClipScore(
            c.clip_id, int(np.shape(c.gt_geometry)[0]),
            lve(c.pred_geometry, c.gt_geometry, lip_mask),
            fdd(c.pred_geometry, c.gt_geometry, upper_mask, neutral),
            beat_align(c.pred_pose, c.gt_pose, sigma, fps)))
    return report


def format_table(reports) -> str:
    """Aligned comparison table, one row per report."""
    header = ("Method", "LVE (mm) ↓", "FDD (x1e-5 m) ↓", "BA ↑", "Clips")
    rows = [(r.name, f"{r.lve_mm:.4f}", f"{r.fdd:.4f}", f"{r.ba:.4f}", str(len(r.rows)))
            for r in reports]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                                   for i, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([line(header), "  ".join("-" * w for w in widths), *map(line, rows)]) + "\n"


def reports_to_json(reports) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports]}, indent=2)
