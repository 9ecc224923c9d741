"""Geometry VAE with blendshape mapping networks.

Geometry enters as the displacement from the neutral, in millimetres. The
neutral itself is summarised by a small identity code that modulates the
displacement per coordinate; the same latent decoded against another
neutral therefore comes out in that identity's proportions.

Two training paths run every step. The real path encodes rig samples with
sparse activations and reconstructs them. The blendshape path draws uniform
weights, maps them to a latent with M, decodes, and ties M to the encoder and
M' back to the weights.
"""
from __future__ import annotations

import logging
import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..autograd import (
    AdamW,
    GradientTape,
    Linear,
    MLP,
    Module,
    Tensor,
    clip_grad_norm,
    load_checkpoint,
    save_checkpoint,
)
from ..autograd import tensor as T
from ..training import DivergenceGuard, cosine_lr
from ..validation import check_geometry
from .rig import LinearRig, make_rig

log = logging.getLogger(__name__)

MM = 1000.0
DELTA_SCALE = 10.0  # network units are centimetres of displacement


class _Networks(Module):
    def __init__(self, n_vertices, n_blendshapes, latent_dim, hidden, id_dim, rng):
        d = 3 * n_vertices
        self.id_code = Linear(d, id_dim, rng)
        self.modulation = Linear(id_dim, d, rng, scale=0.0)
        self.encoder = MLP([d, hidden, hidden, 2 * latent_dim], rng, shortcut=True, out_scale=0.0)
        self.decoder = MLP([latent_dim, hidden, hidden, d], rng, shortcut=True, out_scale=0.0)
        self.to_latent = MLP([n_blendshapes, hidden, latent_dim], rng, shortcut=True, out_scale=0.0)
        self.to_weights = MLP([latent_dim, hidden, n_blendshapes], rng, shortcut=True, out_scale=0.0)
        self.latent_dim = latent_dim

    def modulate(self, neutral_offset):
        # bounded to [0.5, 1.5] so the encoder's division stays well conditioned
        return 1.0 + 0.5 * T.tanh(self.modulation(T.gelu(self.id_code(neutral_offset))))

    def encode(self, delta, mod):
        stats = self.encoder(delta / mod)
        logvar = 16.0 * T.tanh(stats[:, self.latent_dim:] / 16.0)
        return stats[:, : self.latent_dim], logvar

    def decode(self, z, mod):
        return self.decoder(z) * mod

    # weights are centred to [-1, 1] inside the mapping networks
    def map_to_latent(self, w):
        return self.to_latent(w * 2.0 - 1.0)

    def map_to_weights(self, z):
        return (self.to_weights(z) + 1.0) * 0.5

    def mapping_parameters(self):
        return self.to_latent.parameters() + self.to_weights.parameters()


class GeometryVAE(BaseEstimator, TransformerMixin):
    """Expression latent space over rig geometry, plus maps to and from blendshape weights.

    ``fit`` takes a rig (or a list of identities of one rig family). After
    fitting, ``transform`` encodes geometry of the first identity to latent
    means and ``inverse_transform`` decodes them back.
    """

    def __init__(self, latent_dim=16, hidden=128, id_dim=16, beta=1e-4, steps=3000,
                 batch_size=32, lr=1e-3, weight_decay=0.0, n_identities=4, active_prob=0.3,
                 weight_loss_scale=100.0, mapping_updates=2, roundtrip_batch=256,
                 seed=0):
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.id_dim = id_dim
        self.beta = beta
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.n_identities = n_identities
        self.active_prob = active_prob
        self.weight_loss_scale = weight_loss_scale
        self.mapping_updates = mapping_updates
        self.roundtrip_batch = roundtrip_batch
        self.seed = seed

    # fitting -------------------------------------------------------------
    def fit(self, X, y=None):
        rigs = self._rig_family(X)
        self._init_networks(rigs[0])
        self.history_ = self._train(rigs)
        return self

    def _rig_family(self, X) -> list[LinearRig]:
        if isinstance(X, LinearRig):
            rigs = [X] + [make_rig(X.n_vertices, X.n_blendshapes, X.seed, X.identity + i)
                          for i in range(1, self.n_identities)]
        else:
            rigs = list(X)
        if not rigs or not all(isinstance(r, LinearRig) for r in rigs):
            raise TypeError("fit expects a LinearRig or a non-empty list of them")
        shapes = {(r.n_vertices, r.n_blendshapes) for r in rigs}
        if len(shapes) != 1:
            raise ValueError(f"identities disagree on (V, K): {sorted(shapes)}")
        return rigs

    def _init_networks(self, rig: LinearRig) -> None:
        rng = np.random.default_rng(self.seed)
        self.n_vertices_ = rig.n_vertices
        self.n_blendshapes_ = rig.n_blendshapes
        self.reference_neutral_ = rig.neutral.copy()
        self.rig_ = rig
        self.nets_ = _Networks(rig.n_vertices, rig.n_blendshapes, self.latent_dim, self.hidden,
                               self.id_dim, rng)

    def _train(self, rigs: list[LinearRig]) -> dict[str, list[float]]:
        history = {k: [] for k in ("total", "recon_real", "recon_blend", "latent", "weights", "kl")}
        if self.steps == 0:
            return history
        rng = np.random.default_rng([self.seed, 1])
        neutrals = np.stack([r.neutral.reshape(-1) for r in rigs])
        bases = np.stack([r.basis.reshape(r.n_blendshapes, -1) for r in rigs])
        offsets = np.stack([self._neutral_offset(r.neutral) for r in rigs])
        params = self.nets_.parameters()
        opt = AdamW(params, lr=self.lr, weight_decay=self.weight_decay)
        map_params = self.nets_.mapping_parameters()
        map_opt = AdamW(map_params, lr=self.lr)
        guard = DivergenceGuard()
        nets = self.nets_.train()
        B, K = self.batch_size, self.n_blendshapes_
        for step in range(self.steps):
            ids = rng.integers(len(rigs), size=B)
            w_real = rng.random((B, K)) * (rng.random((B, K)) < self.active_prob)
            w_blend = rng.random((B, K))
            d_real = np.einsum("bk,bkd->bd", w_real, bases[ids]) * MM / DELTA_SCALE
            d_blend = np.einsum("bk,bkd->bd", w_blend, bases[ids]) * MM / DELTA_SCALE
            eps = rng.standard_normal((B, self.latent_dim))
            with GradientTape() as tape:
                mod = nets.modulate(Tensor(offsets[ids]))
                mu, logvar = nets.encode(Tensor(d_real), mod)
                z = mu + T.exp(logvar * 0.5) * eps
                rec_real = T.mean(T.square(nets.decode(z, mod) - d_real)) * DELTA_SCALE**2
                z_map = nets.map_to_latent(Tensor(w_blend))
                rec_blend = T.mean(T.square(nets.decode(z_map, mod) - d_blend)) * DELTA_SCALE**2
                mu_b, _ = nets.encode(Tensor(d_blend), mod)
                lat = T.mean(T.square(z_map - mu_b))
                wts = T.mean(T.square(nets.map_to_weights(z_map) - w_blend))
                kl = T.mean(0.5 * T.sum_(T.square(mu) + T.exp(logvar) - 1.0 - logvar, axis=1))
                total = rec_real + rec_blend + lat + self.weight_loss_scale * wts + self.beta * kl
            grads = tape.gradient(total, params)
            clip_grad_norm(grads, 10.0)
            opt.lr = cosine_lr(step, self.steps, self.lr, warmup=min(100, self.steps // 10), floor=0.0)
            opt.step(grads)
            # the mapping networks are tiny; extra roundtrip-only updates speed up their
            # otherwise slow convergence at negligible cost
            for _ in range(self.mapping_updates):
                w_rt = rng.random((self.roundtrip_batch, K))
                with GradientTape() as tape:
                    rt = T.mean(T.square(nets.map_to_weights(nets.map_to_latent(Tensor(w_rt))) - w_rt))
                map_opt.lr = 3.0 * opt.lr
                map_opt.step(tape.gradient(rt, map_params))
            guard.check(step, total.item())
            for key, val in zip(history, (total, rec_real, rec_blend, lat, wts, kl)):
                history[key].append(val.item())
            if step % 500 == 0:
                log.info("vae step %d loss %.4f", step, total.item())
        nets.eval()
        return history

    def _neutral_offset(self, neutral: np.ndarray) -> np.ndarray:
        return (neutral - self.reference_neutral_).reshape(-1) * MM / DELTA_SCALE

    def _modulation(self, neutral) -> np.ndarray:
        if neutral is None:
            neutral = self.reference_neutral_
        neutral = check_geometry(neutral, self.n_vertices_, "neutral")
        return self.nets_.modulate(Tensor(self._neutral_offset(neutral)[None])).data

    # inference -----------------------------------------------------------
    def encode(self, geometry, neutral=None, sample: bool = False, rng=None):
        """Return ``(mean, log_var, z)``; ``z`` is the mean unless ``sample``."""
        check_is_fitted(self, "nets_")
        neutral_arr = self.reference_neutral_ if neutral is None else neutral
        g = check_geometry(geometry, self.n_vertices_)
        n0 = check_geometry(neutral_arr, self.n_vertices_, "neutral")
        flat = g.reshape(-1, 3 * self.n_vertices_)
        delta = (flat - n0.reshape(-1)) * MM / DELTA_SCALE
        mu, logvar = self.nets_.encode(Tensor(delta), Tensor(self._modulation(n0)))
        mu, logvar = mu.data, logvar.data
        z = mu
        if sample:
            rng = rng or np.random.default_rng()
            z = mu + np.exp(0.5 * logvar) * rng.standard_normal(mu.shape)
        lead = g.shape[:-2]
        return (mu.reshape(*lead, -1), logvar.reshape(*lead, -1), z.reshape(*lead, -1))

    def decode(self, z, neutral=None) -> np.ndarray:
        """Geometry in metres, shape (..., V, 3)."""
        check_is_fitted(self, "nets_")
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.latent_dim:
            raise ValueError(f"latent must have {self.latent_dim} components, got {z.shape[-1]}")
        if not np.isfinite(z).all():
            raise ValueError("latent contains NaN or infinity")
        n0 = self.reference_neutral_ if neutral is None else check_geometry(
            neutral, self.n_vertices_, "neutral")
        flat = z.reshape(-1, self.latent_dim)
        delta = self.nets_.decode(Tensor(flat), Tensor(self._modulation(n0))).data
        geom = n0.reshape(-1) + delta * DELTA_SCALE / MM
        return geom.reshape(*z.shape[:-1], self.n_vertices_, 3)

    def to_latent(self, w) -> np.ndarray:
        """Mapping network M: blendshape weights to latent. Out-of-range weights are clamped."""
        check_is_fitted(self, "nets_")
        w = np.asarray(w, dtype=np.float64)
        if w.shape[-1] != self.n_blendshapes_:
            raise ValueError(f"expected {self.n_blendshapes_} weights, got {w.shape[-1]}")
        if (w < 0).any() or (w > 1).any():
            warnings.warn("blendshape weights outside [0, 1] were clamped", stacklevel=2)
            w = np.clip(w, 0.0, 1.0)
        out = self.nets_.map_to_latent(Tensor(w.reshape(-1, self.n_blendshapes_))).data
        return out.reshape(*w.shape[:-1], self.latent_dim)

    def to_weights(self, z, clamp: bool = True) -> np.ndarray:
        """Mapping network M': latent to blendshape weights."""
        check_is_fitted(self, "nets_")
        z = np.asarray(z, dtype=np.float64)
        out = self.nets_.map_to_weights(Tensor(z.reshape(-1, self.latent_dim))).data
        out = out.reshape(*z.shape[:-1], self.n_blendshapes_)
        return np.clip(out, 0.0, 1.0) if clamp else out

    def transform(self, X):
        return self.encode(X)[0]

    def inverse_transform(self, X):
        return self.decode(X)

    # persistence ---------------------------------------------------------
    def save(self, path) -> None:
        check_is_fitted(self, "nets_")
        tensors = dict(self.nets_.state_dict())
        tensors["reference_neutral"] = self.reference_neutral_
        rig = self.rig_
        tensors["rig.neutral"] = rig.neutral
        tensors["rig.basis"] = rig.basis
        meta = {"kind": "geometry-vae", "params": self.get_params(),
                "rig": {"lip_idx": rig.lip_idx.tolist(), "upper_idx": rig.upper_idx.tolist(),
                        "identity": rig.identity, "seed": rig.seed}}
        save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path) -> "GeometryVAE":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "geometry-vae":
            raise ValueError(f"{path} is not a geometry VAE checkpoint")
        est = cls(**meta["params"])
        r = meta["rig"]
        rig = LinearRig(tensors.pop("rig.neutral"), tensors.pop("rig.basis"),
                        np.asarray(r["lip_idx"]), np.asarray(r["upper_idx"]), r["identity"], r["seed"])
        est._init_networks(rig)
        est.reference_neutral_ = tensors.pop("reference_neutral")
        est.nets_.load_state_dict(tensors)
        est.nets_.eval()
        est.history_ = {}
        return est


def train_vae(rig: LinearRig, **config) -> GeometryVAE:
    """Fit a :class:`GeometryVAE` on ``rig`` and its identity family."""
    return GeometryVAE(**config).fit(rig)
