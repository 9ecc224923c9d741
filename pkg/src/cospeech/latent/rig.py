"""Synthetic linear blendshape rig and its identity family.

The head is an ellipsoid sampled on a Fibonacci lattice, facing +z with y up.
Blendshapes are localised Gaussian bumps on the front of the face, a third of
them centred on the mouth so that lip metrics have something to measure.
Identities share one template: each rescales the neutral and the deltas per
axis and adds a smooth low-frequency perturbation to the neutral.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

log = logging.getLogger(__name__)

RIG_VERSION = 1
HEAD_RADII = (0.075, 0.10, 0.09)  # x, y (height 0.2 m), z
MAX_DISPLACEMENT = 0.03


class RigError(ValueError):
    pass


@dataclass(frozen=True)
class LinearRig:
    neutral: np.ndarray  # (V, 3) metres
    basis: np.ndarray  # (K, V, 3) metres
    lip_idx: np.ndarray
    upper_idx: np.ndarray
    identity: int = 0
    seed: int = 0

    def __post_init__(self):
        validate_rig(self)

    @property
    def n_vertices(self) -> int:
        return self.neutral.shape[0]

    @property
    def n_blendshapes(self) -> int:
        return self.basis.shape[0]

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        """Geometry for weights ``w`` of shape (..., K); returns (..., V, 3)."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape[-1] != self.n_blendshapes:
            raise RigError(f"expected {self.n_blendshapes} weights, got {w.shape[-1]}")
        return self.neutral + np.tensordot(w, self.basis, axes=([-1], [0]))


def validate_rig(rig: LinearRig) -> None:
    V = rig.neutral.shape[0]
    if rig.neutral.shape != (V, 3):
        raise RigError(f"neutral must be (V, 3), got {rig.neutral.shape}")
    if rig.basis.ndim != 3 or rig.basis.shape[1:] != (V, 3):
        raise RigError(f"basis must be (K, {V}, 3), got {rig.basis.shape}")
    disp = np.linalg.norm(rig.basis, axis=-1).max(initial=0.0)
    if disp > MAX_DISPLACEMENT + 1e-9:
        raise RigError(f"blendshape displacement {disp:.4f} m exceeds {MAX_DISPLACEMENT} m")
    for name, idx in (("lip", rig.lip_idx), ("upper-face", rig.upper_idx)):
        if idx.size == 0 or idx.min() < 0 or idx.max() >= V:
            raise RigError(f"{name} mask must be a non-empty subset of [0, {V})")
    if np.intersect1d(rig.lip_idx, rig.upper_idx).size:
        raise RigError("lip and upper-face masks overlap")


def unit_sphere_points(n: int) -> np.ndarray:
    """Fibonacci lattice on the unit sphere, ordered from top (y=1) to bottom."""
    i = np.arange(n) + 0.5
    y = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - y * y)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([r * np.sin(phi), y, r * np.cos(phi)], axis=1)


def _regions(template: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = template / np.asarray(HEAD_RADII)
    front = u[:, 2] > 0.35
    lips = front & (u[:, 1] > -0.65) & (u[:, 1] < -0.3) & (np.abs(u[:, 0]) < 0.45)
    upper = front & (u[:, 1] > 0.15)
    return np.flatnonzero(lips), np.flatnonzero(upper)


def _template_basis(template: np.ndarray, lip_idx: np.ndarray, K: int,
                    rng: np.random.Generator) -> np.ndarray:
    front = np.flatnonzero(template[:, 2] > 0.3 * HEAD_RADII[2])
    n_lip = max(1, K // 3)
    centres = np.concatenate([
        rng.choice(lip_idx, size=n_lip, replace=n_lip > lip_idx.size),
        rng.choice(front, size=K - n_lip, replace=False),
    ])
    basis = np.empty((K, template.shape[0], 3))
    for k, c in enumerate(centres):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        width = rng.uniform(0.012, 0.025)
        amp = rng.uniform(0.4, 1.0) * MAX_DISPLACEMENT
        d2 = ((template - template[c]) ** 2).sum(axis=1)
        basis[k] = amp * np.exp(-d2 / (2 * width**2))[:, None] * direction
    return basis


def make_rig(n_vertices: int = 512, n_blendshapes: int = 24, seed: int = 0,
             identity: int = 0) -> LinearRig:
    """Build identity ``identity`` of the rig family defined by ``seed``.

    Identity 0 is the undeformed template.
    """
    if n_vertices < 64 or n_blendshapes < 1:
        raise RigError("need at least 64 vertices and one blendshape")
    template = unit_sphere_points(n_vertices) * np.asarray(HEAD_RADII)
    lip_idx, upper_idx = _regions(template)
    basis = _template_basis(template, lip_idx, n_blendshapes, np.random.default_rng(seed))
    neutral = template
    if identity:
        rng = np.random.default_rng([seed, identity])
        scale = 1.0 + rng.uniform(-0.12, 0.12, size=3)
        freq = rng.normal(size=(3, 3)) * 8.0
        phase = rng.uniform(0, 2 * np.pi, size=3)
        bump = 0.004 * np.sin(template @ freq + phase)
        neutral = template * scale + bump
        # deltas follow the head's proportions; keep them inside the displacement bound
        basis = np.clip(basis * scale, -MAX_DISPLACEMENT, MAX_DISPLACEMENT)
        norms = np.linalg.norm(basis, axis=-1, keepdims=True)
        basis = basis * np.minimum(1.0, MAX_DISPLACEMENT / np.maximum(norms, 1e-12))
    return LinearRig(neutral, basis, lip_idx, upper_idx, identity, seed)


def save_rig(rig: LinearRig, directory) -> Path:
    """Write ``rig.json`` plus little-endian fp32 blobs for the neutral and basis."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rig.neutral.astype("<f4").tofile(directory / "neutral.f32")
    rig.basis.astype("<f4").tofile(directory / "basis.f32")
    manifest = {
        "version": RIG_VERSION,
        "V": rig.n_vertices,
        "K": rig.n_blendshapes,
        "identity": rig.identity,
        "seed": rig.seed,
        "lip_idx": rig.lip_idx.tolist(),
        "upper_idx": rig.upper_idx.tolist(),
        "neutral": "neutral.f32",
        "basis": "basis.f32",
    }
    path = directory / "rig.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    return path


def load_rig(directory) -> LinearRig:
    directory = Path(directory)
    if directory.is_file():
        directory = directory.parent
    try:
        m = json.loads((directory / "rig.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RigError(f"cannot read rig manifest in {directory}: {exc}") from exc
    if m.get("version") != RIG_VERSION:
        raise RigError(f"unsupported rig version {m.get('version')}")
    V, K = int(m["V"]), int(m["K"])
    neutral = _read_blob(directory / m["neutral"], (V, 3))
    basis = _read_blob(directory / m["basis"], (K, V, 3))
    return LinearRig(neutral, basis, np.asarray(m["lip_idx"], dtype=np.int64),
                     np.asarray(m["upper_idx"], dtype=np.int64), int(m["identity"]),
                     int(m.get("seed", 0)))


def _read_blob(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4")
    if arr.size != int(np.prod(shape)):
        raise RigError(f"{path.name}: expected {int(np.prod(shape))} floats, found {arr.size}")
    return arr.reshape(shape).astype(np.float64)


def triangulation(n_vertices: int) -> np.ndarray:
    """Fixed triangle list for the lattice, shared by every identity of that size."""
    hull = ConvexHull(unit_sphere_points(n_vertices))
    faces = hull.simplices.copy()
    # orient outward: the normal should point away from the origin
    p = unit_sphere_points(n_vertices)
    a, b, c = p[faces[:, 0]], p[faces[:, 1]], p[faces[:, 2]]
    flip = (np.cross(b - a, c - a) * a).sum(axis=1) < 0
    faces[flip] = faces[flip][:, ::-1]
    return faces[np.lexsort(faces.T[::-1])]


def write_obj(path, vertices: np.ndarray, faces: np.ndarray) -> None:
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    Path(path).write_text("\n".join(lines) + "\n")
