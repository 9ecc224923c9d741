"""Lip vertex error, upper-face dynamics deviation and head-pose beat alignment.

Geometry is in meters, ``(frames, vertices, 3)``. LVE is reported in
millimeters and FDD in units of 1e-5 m.
"""
from __future__ import annotations

import numpy as np

from ..conditioning.audio import FPS
from ..validation import check_geometry

FDD_UNIT = 1e-5
BEAT_SIGMA = 0.1  # seconds


def _mask(mask, n_vertices: int, name: str) -> np.ndarray:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        if idx.shape != (n_vertices,):
            raise ValueError(f"{name} mask has shape {idx.shape}, expected ({n_vertices},)")
        idx = np.flatnonzero(idx)
    idx = idx.astype(int).ravel()
    if idx.size == 0:
        raise ValueError(f"{name} mask is empty")
    if idx.min() < 0 or idx.max() >= n_vertices:
        raise ValueError(f"{name} mask indexes outside [0, {n_vertices})")
    return idx


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.ndim != 3 or pred.shape[2] != 3:
        raise ValueError(f"geometry sequences must be (frames, vertices, 3), got {pred.shape}")
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if pred.shape[0] == 0:
        raise ValueError("geometry sequences are empty")
    return pred, gt


def lve(pred, gt, lip_mask) -> float:
    """Per-frame maximum lip-vertex L2 error, averaged over frames, in millimeters."""
    pred, gt = _pair(pred, gt)
    idx = _mask(lip_mask, pred.shape[1], "lip")
    err = np.linalg.norm(pred[:, idx] - gt[:, idx], axis=2)
    return float(err.max(axis=1).mean() * 1000.0)


def fdd(pred, gt, upper_mask, neutral, gt_neutral=None) -> float:
    """Mean over upper-face vertices of the gap between temporal stds of motion, in 1e-5 m.

    Motion of a vertex is its distance from the sequence's neutral position.
    """
    pred, gt = _pair(pred, gt)
    if pred.shape[0] < 2:
        raise ValueError("FDD needs at least 2 frames")
    V = pred.shape[1]
    idx = _mask(upper_mask, V, "upper-face")
    neutral = check_geometry(neutral, V, "neutral")
    gt_neutral = neutral if gt_neutral is None else check_geometry(gt_neutral, V, "neutral")
    m_pred = np.linalg.norm(pred[:, idx] - neutral[idx], axis=2)
    m_gt = np.linalg.norm(gt[:, idx] - gt_neutral[idx], axis=2)
    return float(np.abs(m_pred.std(axis=0) - m_gt.std(axis=0)).mean() / FDD_UNIT)


def angular_speed(pose, fps: float = FPS) -> np.ndarray:
    """Magnitude of the rotation-angle velocity, central differences inside, one-sided at ends."""
    rot = np.asarray(pose, dtype=np.float64)[:, :3]
    return np.linalg.norm(np.gradient(rot, axis=0), axis=1) * fps


def pose_beats(pose, fps: float = FPS) -> np.ndarray:
    """Beat times in seconds: strict-left, non-strict-right local minima of angular speed."""
    s = angular_speed(pose, fps)
    i = np.arange(1, s.shape[0] - 1)
    return i[(s[i] < s[i - 1]) & (s[i] <= s[i + 1])] / fps


def beat_align(pred_pose, gt_pose, sigma: float = BEAT_SIGMA, fps: float = FPS) -> float:
    """Gaussian-kernel agreement of each ground-truth beat with its nearest predicted beat.

    A ground truth without beats scores 1 against a beatless prediction and
    0 otherwise; a beatless prediction scores 0 against any beats.
    """
    for name, p in (("prediction", pred_pose), ("ground truth", gt_pose)):
        if np.ndim(p) != 2 or np.shape(p)[0] < 3 or np.shape(p)[1] < 3:
            raise ValueError(f"{name} pose must be (frames >= 3, >= 3 channels)")
    b_gt = pose_beats(gt_pose, fps)
    b_pred = pose_beats(pred_pose, fps)
    if b_gt.size == 0:
        return 1.0 if b_pred.size == 0 else 0.0
    if b_pred.size == 0:
        return 0.0
    d = np.min((b_gt[:, None] - b_pred[None, :]) ** 2, axis=1)
    return float(np.exp(-d / (2.0 * sigma ** 2)).mean())
