"""Command-line entry point.

Subcommands realize the two-step pipeline plus evaluation and verification:
gen-real (synthesize real samples), train (adversarial generator training),
stylize, aesl (temporal-smoothness metric), gradcheck, and make-fixture.
Logs are JSON lines on stdout unless --quiet; every run starts by logging
its resolved configuration.  Flag precedence: flags > config file > defaults.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import verify
from .config import ConfigError, TrainConfig, config_dict, config_text, parse_config, parse_config_text
from .encoders import EncoderSpec, build_encoder
from .evolvesync import DEFAULT_AESL_ORDERS, LossWeights, aesl
from .generator import GeneratorParams, stylize, train_gan
from .mdan import synthesize_real_samples
from .video import (
    load_frames,
    load_real_samples,
    load_style,
    make_fixture,
    save_frames,
    save_real_samples,
)

__all__ = ["main"]


class _Emitter:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, **event) -> None:
        if not self.quiet:
            print(json.dumps(event, sort_keys=True, default=float))


def _load_cfg(args) -> TrainConfig:
    cfg = TrainConfig()
    if getattr(args, "config", None):
        cfg = parse_config(args.config, cfg)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _write_jsonl(rows, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, default=float) + "\n")


def _cmd_gen_real(args) -> int:
    cfg = _load_cfg(args)
    emit = _Emitter(args.quiet)
    emit(event="config", command="gen-real", config=config_dict(cfg))
    video = load_frames(args.video)
    style = load_style(args.style)
    samples = synthesize_real_samples(video, style, cfg)
    out = Path(args.out)
    save_real_samples(samples, out)
    _write_jsonl(samples.history, out / "log.jsonl")
    for row in samples.history:
        emit(event="loss", **row)
    emit(event="done", command="gen-real", frames=len(samples.frames), out=str(out))
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    emit = _Emitter(args.quiet)
    emit(event="config", command="train", config=config_dict(cfg))
    video = load_frames(args.video)
    real = load_real_samples(args.real)
    style = load_style(args.style)
    g, history = train_gan(video, real, style, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tensors = dict(g.named())
    tensors.update(build_encoder(cfg.encoder_seed).named_weights())
    ckpt.save_checkpoint(out / "checkpoint.vstg", tensors,
                         config_echo=config_text(cfg), seed=cfg.seed)
    _write_jsonl(history, out / "history.jsonl")
    for row in history:
        emit(event="loss", **row)
    emit(event="done", command="train", iterations=len(history),
         checkpoint=str(out / "checkpoint.vstg"))
    return 0


def _load_generator(path) -> tuple[GeneratorParams, EncoderSpec, TrainConfig]:
    snap = ckpt.load_checkpoint(path)
    cfg = parse_config_text(snap.config_echo) if snap.config_echo else TrainConfig()
    g = GeneratorParams.from_named(snap.tensors, recurrent=cfg.recurrent)
    spec = EncoderSpec.from_named(snap.tensors, seed=cfg.encoder_seed)
    return g, spec, cfg


def _cmd_stylize(args) -> int:
    emit = _Emitter(args.quiet)
    g, spec, cfg = _load_generator(args.checkpoint)
    emit(event="config", command="stylize", config=config_dict(cfg))
    video = load_frames(args.video)
    out_video = stylize(video, g, spec)
    save_frames(out_video, args.out)
    emit(event="done", command="stylize", frames=len(out_video), out=str(args.out))
    return 0


def _cmd_aesl(args) -> int:
    cfg = _load_cfg(args)
    emit = _Emitter(args.quiet)
    emit(event="config", command="aesl", config=config_dict(cfg))
    source = load_frames(args.video)
    synth = load_frames(args.synth)
    orders = [int(tok) for tok in args.orders.split(",") if tok.strip()]
    label = args.label or Path(args.synth).name
    spec = build_encoder(cfg.encoder_seed)
    rows = []
    for order in orders:
        value = aesl(source, synth, order, cfg.weights, spec, cfg.kernel)
        rows.append((source.id, label, order, value))
        emit(event="aesl", video_id=source.id, method_label=label, order=order, value=value)
    with open(args.csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "method_label", "order", "value"])
        for vid, lab, order, value in rows:
            writer.writerow([vid, lab, order, f"{value:.6g}"])
    emit(event="done", command="aesl", csv=str(args.csv))
    return 0


def _cmd_gradcheck(args) -> int:
    emit = _Emitter(args.quiet)
    emit(event="config", command="gradcheck", target=args.target, seed=args.seed or 0)
    report = verify.run_target(args.target, seed=args.seed or 0)
    for check in report["checks"]:
        emit(event="gradcheck", **check)
    emit(event="summary", target=args.target, passed=report["passed"],
         max_rel_err=report["max_rel_err"], tolerance=report["tolerance"],
         worst=report["worst"])
    return 0 if report["passed"] else 1


def _cmd_make_fixture(args) -> int:
    emit = _Emitter(args.quiet)
    emit(event="config", command="make-fixture", kind=args.kind, seed=args.seed or 0,
         frames=args.frames, size=args.size, noise_sigma=args.noise_sigma)
    video = make_fixture(args.kind, args.seed or 0, args.frames, args.size,
                         noise_sigma=args.noise_sigma)
    save_frames(video, args.out)
    emit(event="done", command="make-fixture", frames=len(video), out=str(args.out))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vstgan",
        description="Video style transfer with an evolve-sync temporal loss (desk scale).")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="config file (flat key = value with [sections])")
        p.add_argument("--seed", type=int, help="seed override (flags > config > defaults)")
        p.add_argument("--quiet", action="store_true", help="suppress JSON-lines logging")
        if out_required:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-real", help="synthesize real samples on every other frame")
    p.add_argument("--video", required=True)
    p.add_argument("--style", required=True)
    common(p)
    p.set_defaults(fn=_cmd_gen_real)

    p = sub.add_parser("train", help="train the generator against the real samples")
    p.add_argument("--video", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--style", required=True)
    common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("stylize", help="run a trained generator over a video")
    p.add_argument("--video", required=True)
    p.add_argument("--checkpoint", required=True)
    common(p)
    p.set_defaults(fn=_cmd_stylize)

    p = sub.add_parser("aesl", help="averaging evolve-sync loss between two frame dirs")
    p.add_argument("--video", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--orders", default=",".join(str(k) for k in DEFAULT_AESL_ORDERS))
    p.add_argument("--csv", required=True)
    p.add_argument("--label", help="method label for the CSV (default: synth dir name)")
    common(p, out_required=False)
    p.set_defaults(fn=_cmd_aesl)

    p = sub.add_parser("gradcheck", help="finite-difference verification suites")
    p.add_argument("--target", required=True, choices=("ops", "eq4", "eq7"))
    p.add_argument("--seed", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("make-fixture", help="deterministic synthetic test video")
    p.add_argument("--kind", required=True,
                   choices=("translating-square", "translating-texture", "static-plus-noise"))
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_make_fixture)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(json.dumps({"event": "error", "component": "config", "message": str(e)}),
              file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - boundary: name the failing component
        component = type(e).__module__.rsplit(".", 1)[-1]
        print(json.dumps({"event": "error", "component": component,
                          "error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
