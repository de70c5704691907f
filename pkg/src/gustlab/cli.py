"""Command-line entry points: train, eval, sweep, report.

Exit codes: 0 on success, 2 on configuration problems (including
unreadable checkpoints), 3 on numerical failures during training or
simulation. Relative output directories resolve under $GUSTLAB_OUT when
that variable is set.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import ChecksumMismatch
from .config import ConfigError, load_config
from .dynamics import NonFiniteState
from .harness import (
    AXIS_MULTIPLIERS,
    GRID_MULTIPLIERS,
    EvalReport,
    NonFiniteLoss,
    evaluate,
    robustness_sweep,
    train,
)
from .report import MissingData, report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the config output directory")


def _load(args) -> "RunConfig":
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    return cfg


def _multiplier_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _cmd_train(args) -> int:
    cfg = _load(args)
    result = train(cfg)
    print(f"best checkpoint: {result.best_checkpoint}")
    print(f"best eval xy std: {result.best_xy_std:.4f} m at env step {result.best_step}")
    print(f"training log: {result.log_path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _load(args)
    baseline = None
    if args.baseline:
        baseline = EvalReport.from_json(Path(args.baseline).read_text())
    checkpoint = None if args.pid_only else args.checkpoint
    tag = "pid_only" if args.pid_only else "eval"
    rep = evaluate(cfg, checkpoint, out_dir=cfg.out_dir, baseline=baseline, tag=tag)
    print(f"controller: {rep.controller}  crashed: {rep.crashed}")
    for i, axis in enumerate("xyz"):
        line = f"  {axis}: mean {rep.axis_mean[i]:+.4f}  std {rep.axis_std[i]:.4f}  max {rep.max_abs_error[i]:.4f} m"
        if rep.improvement_pct:
            line += f"  improvement {rep.improvement_pct[i]:+.1f}%"
        print(line)
    print(f"  xy std: {rep.xy_std:.4f} m")
    print(f"report written under {cfg.out_dir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    defaults = GRID_MULTIPLIERS if args.mode == "grid" else AXIS_MULTIPLIERS
    mass = _multiplier_list(args.mass) if args.mass else list(defaults)
    lift = _multiplier_list(args.lift) if args.lift else list(defaults)
    baseline = None
    if args.baseline:
        baseline = EvalReport.from_json(Path(args.baseline).read_text())
    rep = robustness_sweep(
        cfg,
        args.checkpoint,
        mass_multipliers=mass,
        lift_multipliers=lift,
        mode=args.mode,
        workers=args.workers,
        baseline=baseline,
        out_dir=cfg.out_dir,
    )
    for cell in rep.cells:
        mark = " CRASH" if cell["crashed"] else ""
        print(
            f"mass x{cell['mass_scale']:.2f} lift x{cell['lift_scale']:.2f}: "
            f"xy std {cell['xy_std']:.4f} m ({cell['xy_improvement_pct']:+.1f}%){mark}"
        )
    print(f"sweep report written under {cfg.out_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    artifacts = report(args.run_dir, args.out)
    for a in artifacts:
        print(a)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gustlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the residual training loop")
    _add_common(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="run the 26-gust evaluation protocol")
    _add_common(p_eval)
    group = p_eval.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint", help="checkpoint to evaluate")
    group.add_argument("--pid-only", action="store_true", help="evaluate the bare PID stack")
    p_eval.add_argument("--baseline", default=None, help="baseline eval report JSON for improvements")
    p_eval.add_argument("--workers", type=int, default=1, help="accepted for symmetry; evaluation is one episode")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="mass/lift robustness sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--checkpoint", required=True)
    p_sweep.add_argument("--mode", choices=("axis", "grid"), default="axis")
    p_sweep.add_argument("--mass", default=None, help="comma-separated mass multipliers")
    p_sweep.add_argument("--lift", default=None, help="comma-separated lift multipliers")
    p_sweep.add_argument("--baseline", default=None, help="baseline eval report JSON (default: run PID-only)")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_report = sub.add_parser("report", help="render plots and summaries for a run directory")
    p_report.add_argument("run_dir")
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ChecksumMismatch, MissingData, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteLoss, NonFiniteState) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
