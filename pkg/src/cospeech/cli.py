"""Command-line interface.

Every command accepts ``--config FILE`` with a JSON object whose keys are
option names (``s_audio``, ``ddim_steps``...); flags given on the command
line win over the file. Failures print one JSON line on stderr,
``{"error": kind, "code": n, "message": ...}``, and exit with

* 2: a checkpoint is missing
* 3: the audio input is invalid
* 4: flags, config or edit files do not parse
* 1: anything else
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_ERROR, EXIT_CHECKPOINT, EXIT_AUDIO, EXIT_CONFIG = 1, 2, 3, 4
ANIMATION_FORMAT = "cospeech-animation"
ANIMATION_VERSION = 1

log = logging.getLogger("cospeech")


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(EXIT_CONFIG, "config", message)


# -- helpers -------------------------------------------------------------------

def _load_checkpoint(kind: str, path):
    from .autograd.checkpoint import CheckpointError
    from .diffusion.estimator import MotionDiffusion
    from .latent.vae import GeometryVAE

    if path is None:
        raise CLIError(EXIT_CHECKPOINT, "missing_checkpoint", f"no {kind} checkpoint given")
    p = Path(path)
    if not p.is_file():
        raise CLIError(EXIT_CHECKPOINT, "missing_checkpoint", f"{kind} checkpoint not found: {p}")
    try:
        if kind == "vae":
            return GeometryVAE.load(p)
        est, meta = MotionDiffusion.load(p)
        est.bypass_latent_ = bool(meta.get("bypass_latent", False))
        return est
    except (CheckpointError, ValueError, KeyError) as exc:
        raise CLIError(EXIT_ERROR, "bad_checkpoint", f"{p}: {exc}") from exc


def _read_audio(path):
    from .conditioning.audio import AudioError, extract_audio_features, read_wav

    if path is None:
        raise CLIError(EXIT_CONFIG, "config", "--audio is required")
    try:
        return extract_audio_features(read_wav(path, resample=True)).features
    except (AudioError, OSError, EOFError) as exc:
        raise CLIError(EXIT_AUDIO, "invalid_audio", f"{path}: {exc}") from exc


def _edit_file(loader, path):
    from .editing.spec import EditError

    try:
        return loader(path)
    except EditError as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from exc
    except OSError as exc:
        raise CLIError(EXIT_CONFIG, "config", f"cannot read {path}: {exc}") from exc


def _write_json(path, data) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _round(a) -> list:
    return np.round(np.asarray(a, dtype=np.float64), 6).tolist()


def animation_document(motion, vae, bypass_latent: bool, fps: int, include_latents: bool) -> dict:
    """The animation file: per-frame blendshape weights and pose, optionally latents."""
    from .pipeline import motion_latents, motion_weights, split_motion

    _, pose = split_motion(motion)
    doc = {
        "format": ANIMATION_FORMAT,
        "version": ANIMATION_VERSION,
        "fps": fps,
        "n_frames": int(motion.shape[0]),
        "n_blendshapes": int(vae.n_blendshapes_),
        "pose_channels": ["pitch", "yaw", "roll", "tx", "ty", "tz"],
        "weights": _round(motion_weights(motion, vae, bypass_latent)),
        "pose": _round(pose),
    }
    if include_latents:
        doc["latents"] = _round(motion_latents(motion, vae, bypass_latent))
    return doc


# -- commands ------------------------------------------------------------------

def cmd_gen_corpus(args) -> dict:
    from .corpus.dataset import CorpusError, generate_corpus

    try:
        out = generate_corpus(args.out, args.clips, (args.min_duration, args.max_duration),
                              seed=args.seed, latent_dim=args.latent_dim, overwrite=args.overwrite)
    except (CorpusError, ValueError) as exc:
        raise CLIError(EXIT_CONFIG if isinstance(exc, ValueError) else EXIT_ERROR,
                       "corpus", str(exc)) from exc
    return {"corpus": str(out), "clips": args.clips}


def cmd_train_vae(args) -> dict:
    from .latent.rig import load_rig, make_rig
    from .latent.vae import GeometryVAE

    rig = load_rig(args.rig) if args.rig else make_rig(args.vertices, args.blendshapes, seed=args.seed)
    vae = GeometryVAE(latent_dim=args.latent_dim, hidden=args.hidden, beta=args.beta,
                      steps=args.steps, batch_size=args.batch_size, lr=args.lr,
                      n_identities=args.identities, seed=args.seed).fit(rig)
    vae.save(args.out)
    h = vae.history_
    return {"checkpoint": str(args.out), "steps": args.steps,
            "final_loss": h["total"][-1] if h["total"] else None}


def cmd_train_diffusion(args) -> dict:
    from .corpus.dataset import load_corpus
    from .pipeline import train_denoiser

    corpus = load_corpus(args.corpus)
    train = corpus.split("train")
    if not train:
        raise CLIError(EXIT_CONFIG, "config", f"{args.corpus} has no training clips")
    vae = _load_checkpoint("vae", args.vae) if args.bypass_latent or args.vae else None
    est = train_denoiser(train, vae, bypass_latent=args.bypass_latent,
                         no_cfg_masking=args.no_cfg, preset=args.preset, steps=args.steps,
                         batch_size=args.batch_size, lr=args.lr, seed=args.seed,
                         s_audio=args.s_audio, s_prompt=args.s_prompt, ddim_steps=args.ddim_steps)
    est.save(args.out, bypass_latent=args.bypass_latent)
    h = est.history_["simple"]
    return {"checkpoint": str(args.out), "steps": args.steps,
            "simple_first": float(np.mean(h[:50])) if h else None,
            "simple_last": float(np.mean(h[-50:])) if h else None}


def _generate(args, require_edit: bool) -> dict:
    from .conditioning.audio import FPS
    from .conditioning.prompt import embed_prompt
    from .editing.ops import keyframe_hook
    from .editing.spec import EditSpec, StyleTrack
    from .latent.rig import triangulation, write_obj
    from .pipeline import motion_geometry
    from .scheduler.longform import denoise_long

    if require_edit and not (args.edit_spec or args.style_track):
        raise CLIError(EXIT_CONFIG, "config", "edit needs --edit-spec and/or --style-track")
    vae = _load_checkpoint("vae", args.vae)
    est = _load_checkpoint("diffusion", args.model)
    feats = _read_audio(args.audio)
    sampler = est.sampler(s_audio=args.s_audio, s_prompt=args.s_prompt,
                          ddim_steps=args.ddim_steps, capacity=args.capacity, threads=args.threads)
    prompt = embed_prompt(args.prompt) if args.prompt else None
    if args.style_track:
        prompt = _edit_file(StyleTrack.load, args.style_track)
    overlap = est.default_overlap if args.overlap is None else args.overlap
    if args.edit_spec:
        spec = _edit_file(EditSpec.load, args.edit_spec)
        try:
            spec.validate(feats.shape[0], sampler.motion_dim)
        except ValueError as exc:
            raise CLIError(EXIT_CONFIG, "config", str(exc)) from exc
        motion = denoise_long(sampler, feats, prompt, args.seed, overlap=overlap,
                              post_step=keyframe_hook(sampler, spec, args.seed),
                              resample=spec.resample)
    else:
        motion = denoise_long(sampler, feats, prompt, args.seed, overlap=overlap)
    bypass = est.bypass_latent_
    _write_json(args.out, animation_document(motion, vae, bypass, FPS, args.include_latents))
    result = {"animation": str(args.out), "frames": int(motion.shape[0])}
    if args.obj_dir:
        geom, _ = motion_geometry(motion, vae, bypass)
        faces = triangulation(geom.shape[1])
        out = Path(args.obj_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, g in enumerate(geom):
            write_obj(out / f"frame_{i:05d}.obj", g, faces)
        result["obj_dir"] = str(out)
    return result


def cmd_generate(args) -> dict:
    return _generate(args, require_edit=False)


def cmd_edit(args) -> dict:
    return _generate(args, require_edit=True)


def cmd_evaluate(args) -> dict:
    from .corpus.dataset import load_corpus
    from .metrics.report import format_table, reports_to_json
    from .pipeline import evaluate_generator, evaluate_mean_baseline, evaluate_model

    if not (args.model or args.ground_truth or args.baseline):
        raise CLIError(EXIT_CONFIG, "config", "give --model, --ground-truth or --baseline")
    vae = _load_checkpoint("vae", args.vae)
    corpus = load_corpus(args.corpus)
    samples = corpus.split(args.split)
    if args.limit:
        samples = samples[:args.limit]
    reports = []
    if args.ground_truth:
        reports.append(evaluate_generator(lambda s: s.motion, samples, vae, "ground truth"))
    if args.baseline:
        reports.append(evaluate_mean_baseline(corpus.split("train"), samples, vae))
    for item in args.model or []:
        name, _, path = item.rpartition("=")
        est = _load_checkpoint("diffusion", path)
        reports.append(evaluate_model(est, samples, vae, name or Path(path).stem, seed=args.seed,
                                      ddim_steps=args.ddim_steps, threads=args.threads))
    table = format_table(reports)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(reports_to_json(reports) + "\n")
    if args.table:
        Path(args.table).write_text(table)
    sys.stdout.write(table)
    return {"reports": [r.summary() for r in reports]}


def cmd_bench(args) -> dict:
    from .scheduler.bench import bench_throughput

    est = _load_checkpoint("diffusion", args.model)
    sampler = est.sampler(ddim_steps=args.ddim_steps)
    caps = [int(c) for c in str(args.capacities).split(",")]
    threads = [int(t) for t in str(args.bench_threads).split(",")]
    report = bench_throughput(sampler, L=args.frames, overlap=args.overlap, capacities=caps,
                              threads=threads, repeats=args.repeats, seed=args.seed)
    _write_json(args.out, report)
    return {"report": str(args.out), "speedup": report["speedup"],
            "scaling_ratio": report["scaling"]["ratio"]}


# -- parser --------------------------------------------------------------------

def _common(p, seed=True):
    p.add_argument("--config", help="JSON file of option defaults")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _sampling(p):
    p.add_argument("--sA", dest="s_audio", type=float, default=2.5, help="audio guidance strength")
    p.add_argument("--sP", dest="s_prompt", type=float, default=1.5, help="prompt guidance strength")
    p.add_argument("--ddim-steps", type=int, default=50)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cospeech", description="Speech-driven facial animation toolkit.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("gen-corpus", help="synthesise a training corpus")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=200)
    p.add_argument("--min-duration", type=float, default=2.5)
    p.add_argument("--max-duration", type=float, default=6.0)
    p.add_argument("--latent-dim", type=int, default=16)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-vae", help="train the geometry VAE and mapping networks")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--rig", help="rig directory (default: synthesise one)")
    p.add_argument("--vertices", type=int, default=512)
    p.add_argument("--blendshapes", type=int, default=24)
    p.add_argument("--latent-dim", type=int, default=16)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--beta", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--identities", type=int, default=4)
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("train-diffusion", help="train the motion denoiser")
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vae", help="VAE checkpoint (required with --bypass-latent)")
    p.add_argument("--preset", choices=["toy", "full"], default="toy")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--no-cfg", action="store_true", help="train without condition dropout")
    p.add_argument("--bypass-latent", action="store_true", help="diffuse blendshape weights")
    _sampling(p)
    p.set_defaults(func=cmd_train_diffusion)

    for name, func, text in (("generate", cmd_generate, "animate an audio file"),
                             ("edit", cmd_edit, "animate with keyframes or a style track")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--audio", required=True)
        p.add_argument("--model", required=True, help="diffusion checkpoint")
        p.add_argument("--vae", required=True, help="VAE checkpoint")
        p.add_argument("--out", required=True, help="animation JSON path")
        p.add_argument("--prompt")
        p.add_argument("--edit-spec")
        p.add_argument("--style-track")
        p.add_argument("--overlap", type=int)
        p.add_argument("--capacity", type=int, default=8)
        p.add_argument("--include-latents", action="store_true")
        p.add_argument("--obj-dir")
        _sampling(p)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="score models on a corpus split")
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vae", required=True)
    p.add_argument("--model", action="append", help="[name=]checkpoint, repeatable")
    p.add_argument("--ground-truth", action="store_true", help="score ground truth against itself")
    p.add_argument("--baseline", action="store_true", help="add the mean-predictor row")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--limit", type=int)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--table", help="plain-text table path")
    _sampling(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="overlapped batching throughput")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=1200)
    p.add_argument("--overlap", type=int)
    p.add_argument("--capacities", default="1,8")
    p.add_argument("--bench-threads", default="1")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--ddim-steps", type=int, default=50)
    p.set_defaults(func=cmd_bench)
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(EXIT_CONFIG, "config", f"{args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise CLIError(EXIT_CONFIG, "config", f"{args.config}: expected a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(config) - known - {"config"})
        if unknown:
            raise CLIError(EXIT_CONFIG, "config", f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else [str(a) for a in argv])
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        result = args.func(args)
    except CLIError as exc:
        err = {"error": exc.kind, "code": exc.code, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.code
    except Exception as exc:  # noqa: BLE001 - last-resort single-line report
        err = {"error": type(exc).__name__, "code": EXIT_ERROR, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_ERROR
    sys.stderr.write(json.dumps({"ok": True, **result}) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
