"""Command-line entry point.

    percepvid <verb> [--config run.yaml] [overrides...]

Verbs map one-to-one onto pipeline stages, plus `ablate` (sweeps) and
`run-pipeline` (all stages with manifest-based skipping).  Relative output
directories resolve against $PERCEPVID_OUT when set.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .ablate import AXES, ablate
from .config import PipelineConfig, load_config, resolve_out_dir
from .pipeline import STAGES, StageError, run_pipeline, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

log = logging.getLogger("percepvid")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run config (defaults used when omitted)")
    p.add_argument("--out", help="override the run output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percepvid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        _add_common(p)
        if stage == "gen-data":
            p.add_argument("--n-clips", type=int, help="override clip count")
        if stage == "curate":
            p.add_argument("--n-out", type=int, help="override resample size")
        if stage == "sample":
            p.add_argument("--steps", type=int, help="override sampler steps")
            p.add_argument("--n-videos", type=int)
            p.add_argument("--scene-class", help="conditioning class")
            p.add_argument("--guidance", type=float, help="classifier-free guidance scale")

    p = sub.add_parser("ablate", help="run one ablation axis")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=sorted(AXES))
    p.add_argument("--data", help="clip corpus directory (default: <run>/data)")

    p = sub.add_parser("run-pipeline", help="run all stages in order")
    _add_common(p)
    p.add_argument("--skip-to", choices=STAGES, help="jump to this stage")
    p.add_argument("--force", action="store_true", help="rerun even up-to-date stages")

    return parser


def _load(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.out:
        cfg.out_dir = args.out
    if getattr(args, "n_clips", None):
        cfg.data.n_clips = args.n_clips
    if getattr(args, "n_out", None):
        cfg.curation.n_out = args.n_out
    if getattr(args, "steps", None):
        cfg.sample.steps = args.steps
    if getattr(args, "n_videos", None):
        cfg.sample.n_videos = args.n_videos
    if getattr(args, "scene_class", None):
        cfg.sample.scene_class = args.scene_class
    if getattr(args, "guidance", None) is not None:
        cfg.sample.guidance_scale = args.guidance
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load(args)
    except (OSError, ValueError, TypeError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.verb == "run-pipeline":
            run_dir = run_pipeline(cfg, skip_to=args.skip_to, force=args.force)
            print(f"pipeline complete: {run_dir}")
        elif args.verb == "ablate":
            run_dir = resolve_out_dir(cfg.out_dir)
            data_dir = args.data or (run_dir / "data")
            rows = ablate(cfg, args.axis, data_dir, run_dir / f"ablate-{args.axis}")
            failed = [r.name for r in rows if r.status != "ok"]
            for r in rows:
                print(f"{r.axis}/{r.name}: status={r.status} eval_loss={r.eval_loss:.4f}")
            if failed:
                print(f"failed rows: {', '.join(failed)}", file=sys.stderr)
                return EXIT_STAGE
        else:
            run_dir = run_stage(cfg, args.verb)
            print(f"{args.verb} complete: {run_dir}")
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
