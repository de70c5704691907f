"""End-to-end smoke run: short training, evaluation, rendered report.

Uses the shipped smoke configuration (miniature networks, a couple of
minutes). The resulting policy is not expected to beat the baseline; use
configs/desk.yaml for a run that does.

Run:  python demos/05_train_smoke.py [out_dir]
"""

import sys
from pathlib import Path

from gustlab.config import load_config
from gustlab.harness import evaluate, train
from gustlab.report import report

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo_smoke")
cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "smoke.yaml")
cfg.out_dir = out

print(f"training {cfg.total_steps} steps into {out} ...")
result = train(cfg)
print(f"best checkpoint: {result.best_checkpoint} (xy std {result.best_xy_std:.4f} m)")

print("evaluating the PID baseline ...")
baseline = evaluate(cfg, None, out_dir=out, tag="pid_only")
print(f"  pid-only xy std: {baseline.xy_std:.4f} m")

print("evaluating the trained checkpoint ...")
rep = evaluate(cfg, result.best_checkpoint, out_dir=out, baseline=baseline, tag="trained")
print(f"  trained  xy std: {rep.xy_std:.4f} m ({rep.xy_improvement_pct:+.1f}% vs baseline)")

artifacts = report(out)
print("report artifacts:")
for a in artifacts:
    print(f"  {a}")
