from .rig import (
    LinearRig,
    RigError,
    load_rig,
    make_rig,
    save_rig,
    triangulation,
    unit_sphere_points,
    write_obj,
)
from .vae import GeometryVAE, train_vae

__all__ = [
    "GeometryVAE", "LinearRig", "RigError", "load_rig", "make_rig", "save_rig", "train_vae",
    "triangulation", "unit_sphere_points", "write_obj",
]
