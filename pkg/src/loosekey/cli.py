"""Command-line interface: datagen / train / sample / eval / serve."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import make_generator
from .config import ConfigError, load_config
from .datagen import build_dataset, config_hash, load_dataset, synth_source_motions
from .denoiser import Denoiser, load_checkpoint, param_count, save_checkpoint
from .diffusion import SamplerConfig, make_schedule, sample_batch
from .longform import constrained_sample
from .metrics import evaluate, keypose_best_frame
from .motion import Motion, PoseLayout, write_motion
from .observation import place_on_timeline, read_keyframes
from .report import render_table, write_loss_curve, write_report, write_retiming_figure
from .skeleton import Skeleton, default_skeleton, smpl_like_skeleton
from .training import train


def _skeleton_from_config(cfg) -> Skeleton:
    if cfg.skeleton.preset == "smpl":
        return smpl_like_skeleton()
    if cfg.skeleton.preset == "desk":
        return default_skeleton()
    raise ConfigError([f"skeleton.preset: unknown preset {cfg.skeleton.preset!r}"])


def _layout_for(skeleton: Skeleton, cfg) -> PoseLayout:
    return PoseLayout(
        num_joints=skeleton.num_joints,
        shape_dims=cfg.skeleton.shape_dims,
        contact_dims=len(skeleton.contact_joints),
    )


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for raw in pairs or []:
        if "=" not in raw:
            raise ConfigError([f"override {raw!r} must look like section.key=value"])
        key, value = raw.split("=", 1)
        out[key] = yaml_value(value)
    return out


def yaml_value(text: str):
    import yaml

    return yaml.safe_load(text)


def _echo_config(cfg, seed) -> None:
    print(f"config_hash={cfg.hash} seed={seed}", file=sys.stderr)


def cmd_datagen(args) -> int:
    cfg = load_config(args.config, _parse_overrides(args.set))
    seed = args.seed if args.seed is not None else cfg.datagen.seed
    _echo_config(cfg, seed)
    skeleton = _skeleton_from_config(cfg)
    layout = _layout_for(skeleton, cfg)
    if args.sources_dir:
        from .datagen import load_source_motions

        paths = sorted(Path(args.sources_dir).glob("*.json")) + sorted(
            Path(args.sources_dir).glob("*.lkm")
        )
        sources = load_source_motions(paths, layout)
    else:
        sources = synth_source_motions(
            cfg.synth.sources,
            skeleton,
            cfg.synth.frames_per_source,
            seed=cfg.synth.seed,
            fps=cfg.skeleton.fps,
            layout=layout,
        )
    from dataclasses import replace

    dg = replace(cfg.datagen, seed=seed, zero_shift=args.zero_shift or cfg.datagen.zero_shift)
    manifest = build_dataset(sources, dg, args.out, skeleton=skeleton)
    print(json.dumps({"out": str(args.out), "pairs": manifest["pairs"], "config_hash": manifest["config_hash"]}))
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, _parse_overrides(args.set))
    seed = args.seed if args.seed is not None else cfg.train.seed
    _echo_config(cfg, seed)
    manifest, pairs = load_dataset(args.dataset)
    layout = PoseLayout.from_dict(manifest["layout"])
    from dataclasses import replace

    net_cfg = replace(
        cfg.net,
        frames=manifest["config"]["clip_frames"],
        dim=layout.dim,
        mode=args.mode or cfg.net.mode,
    )
    train_cfg = replace(cfg.train, seed=seed)
    schedule = make_schedule(cfg.sampler.schedule, cfg.sampler.num_steps)
    import torch

    torch.manual_seed(seed)
    model = Denoiser(net_cfg)
    print(f"training {net_cfg.mode} model: {param_count(model)} parameters on {len(pairs)} pairs",
          file=sys.stderr)
    history = train(pairs, model, schedule, train_cfg, progress=not args.quiet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        model,
        out,
        extra={
            "schedule": {"kind": cfg.sampler.schedule, "num_steps": cfg.sampler.num_steps},
            "layout": layout.to_dict(),
            "skeleton": manifest["skeleton"],
            "fps": manifest["fps"],
            "max_shift": manifest["config"]["max_shift"],
            "config_hash": cfg.hash,
            "dataset_hash": manifest["config_hash"],
        },
    )
    write_loss_curve(history, out.parent)
    print(json.dumps({"checkpoint": str(out), "final_loss": history[-1][1]}))
    return 0


def cmd_sample(args) -> int:
    model, header = load_checkpoint(args.ckpt)
    layout = PoseLayout.from_dict(header["layout"])
    skeleton = Skeleton.from_dict(header["skeleton"])
    schedule = make_schedule(header["schedule"]["kind"], header["schedule"]["num_steps"])
    keys = read_keyframes(args.keyframes, layout)
    total = args.f_total or keys.length
    signal = place_on_timeline(keys, total)
    cfg = SamplerConfig(
        num_steps=header["schedule"]["num_steps"],
        schedule=header["schedule"]["kind"],
        imputation_c=args.imputation_c,
        seed=args.seed or 0,
        num_samples=args.num_samples,
    )
    print(f"sampling {cfg.num_samples} motion(s), F_total={total}, seed={cfg.seed}", file=sys.stderr)
    if total == model.config.frames:
        frames = sample_batch([signal] * cfg.num_samples, model, schedule, cfg)
        motions = [Motion(layout=layout, fps=signal.fps, frames=f) for f in frames]
    else:
        motions = [
            constrained_sample(signal, model, schedule, cfg, sample_index=i)
            for i in range(cfg.num_samples)
        ]
    out = Path(args.out)
    if len(motions) == 1 and out.suffix in (".json", ".lkm"):
        out.parent.mkdir(parents=True, exist_ok=True)
        write_motion(motions[0], out, skeleton=skeleton)
        written = [str(out)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for i, m in enumerate(motions):
            p = out / f"motion_{i:03d}.json"
            write_motion(m, p, skeleton=skeleton)
            written.append(str(p))
    print(json.dumps({"motions": written}))
    return 0


def cmd_eval(args) -> int:
    manifest, pairs = load_dataset(args.testset)
    if args.max_pairs:
        pairs = pairs[: args.max_pairs]
    layout = PoseLayout.from_dict(manifest["layout"])
    if manifest.get("skeleton"):
        skeleton = Skeleton.from_dict(manifest["skeleton"])
    else:
        skeleton = default_skeleton()
    model = schedule = None
    sampler_cfg = None
    if args.baseline != "interp":
        if not args.ckpt:
            print("error: baseline requires --ckpt", file=sys.stderr)
            return 2
        model, header = load_checkpoint(args.ckpt)
        schedule = make_schedule(header["schedule"]["kind"], header["schedule"]["num_steps"])
        sampler_cfg = SamplerConfig(
            num_steps=header["schedule"]["num_steps"],
            schedule=header["schedule"]["kind"],
            seed=args.seed or 0,
            num_samples=args.num_samples,
        )
    generator = make_generator(
        args.baseline,
        model=model,
        schedule=schedule,
        sampler_cfg=sampler_cfg,
        imputation_c=args.imputation_c,
    )
    name = args.baseline if args.baseline != "imp" else f"IMP({args.imputation_c})"
    print(f"evaluating {name} on {len(pairs)} pairs", file=sys.stderr)
    report = evaluate(generator, pairs, skeleton, num_samples=args.num_samples)

    if args.retiming:
        errors = []
        for i, pair in enumerate(pairs):
            gen = generator(pair.signal, 1, i)[0]
            for kf in pair.keyframes:
                best = keypose_best_frame(gen, pair.target.pose(kf["k"]), skeleton)
                errors.append(best - kf["k"])
        report.extra["retime_mean_abs_error"] = float(np.mean(np.abs(errors)))
        write_retiming_figure(errors, tolerance=2, out_dir=Path(args.out) / "figures")

    reports = {name: report}
    write_report(
        reports,
        args.out,
        extra={
            "testset": str(args.testset),
            "pairs": len(pairs),
            "config_hash": manifest.get("config_hash"),
        },
    )
    print(render_table(reports))
    print(json.dumps({"report": str(Path(args.out) / "report.json")}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.addr.partition(":")
    ui = args.ui
    if ui is None and Path("frontend/index.html").exists():
        ui = "frontend"
    app = create_app(args.ckpt, artifacts=args.artifacts, queue_depth=args.queue_depth, ui_dir=ui)
    if ui:
        print(f"studio UI at http://{host or '127.0.0.1'}:{port or 8000}/studio/", file=sys.stderr)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loosekey", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="YAML/JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted config override, e.g. datagen.seed=3")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("datagen", help="synthesize source motions and build a pair dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--zero-shift", action="store_true", help="NoTime ablation: dk = 0")
    p.add_argument("--sources-dir", default=None,
                   help="load motion files from here instead of synthesizing")
    p.set_defaults(fn=cmd_datagen)

    p = sub.add_parser("train", help="train a denoiser on a dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("LT", "NoWarp", "NoTime"), default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="generate motion from a keyframe file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--keyframes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--num-samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f-total", type=int, default=None)
    p.add_argument("--imputation-c", type=int, default=-1)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("eval", help="evaluate a checkpoint or baseline on a testset")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--baseline", default="LT",
                   choices=("LT", "NoWarp", "NoTime", "imp", "interp"))
    p.add_argument("--imputation-c", type=int, default=0, help="C for the imp baseline")
    p.add_argument("--testset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--num-samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-pairs", type=int, default=None)
    p.add_argument("--retiming", action="store_true",
                   help="also report keypose placement error and its histogram")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="serve the HTTP API for a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--artifacts", default=None)
    p.add_argument("--queue-depth", type=int, default=8)
    p.add_argument("--ui", default=None, help="serve a studio build from this directory at /studio")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(json.dumps({"error": "config", "problems": e.problems}), file=sys.stderr)
        return 2
    except Exception as e:  # structured failure for scripting
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
