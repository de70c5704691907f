"""Rendering: plots and plain-text summaries from a run directory.

Everything is recomputed from the raw CSVs; where a stored report exists
the recomputation is cross-checked against it (to 1e-12) so reports can
never drift from the underlying data.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .env import RewardWeights

AXES = ("x", "y", "z")


class MissingData(RuntimeError):
    """The run directory holds none of the expected CSV files."""


def read_csv(path: Path) -> np.ndarray:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.size == 0:
        raise MissingData(f"{path} is empty")
    return np.atleast_1d(data)


def recompute_rewards(rows: np.ndarray, weights: RewardWeights | None = None) -> np.ndarray:
    """Rewards recomputed from consecutive trajectory rows (rows 1..n)."""
    w = weights or RewardWeights()
    err = np.stack([rows["err_x"], rows["err_y"], rows["err_z"]], axis=1)
    delta = np.linalg.norm(err, axis=1)
    a = np.stack([rows["a_thrust"], rows["a_roll"], rows["a_pitch"], rows["a_yaw"]], axis=1)
    out = np.empty(len(rows) - 1)
    for i in range(1, len(rows)):
        r_pos = min(delta[i - 1] - delta[i], 0.0)
        r_rp = -(abs(a[i, 1] - a[i - 1, 1]) + abs(a[i, 2] - a[i - 1, 2]))
        r_yt = -(abs(a[i, 3] - a[i - 1, 3]) + abs(a[i, 0] - a[i - 1, 0]))
        out[i - 1] = w.pos * r_pos + w.rp * r_rp + w.yt * r_yt
    return out


def verify_trajectory_rewards(path: Path, weights: RewardWeights | None = None) -> float:
    """Max |stored - recomputed| reward over a trajectory CSV."""
    rows = read_csv(path)
    recomputed = recompute_rewards(rows, weights)
    stored = rows["reward"][1:]
    return float(np.abs(stored - recomputed).max())


def _render_trajectory(traj_path: Path, out_dir: Path) -> list[Path]:
    rows = read_csv(traj_path)
    t = rows["time_s"]
    wind_on = np.linalg.norm(
        np.stack([rows["wind_x"], rows["wind_y"], rows["wind_z"]], axis=1), axis=1
    ) > 1e-9
    artifacts = []
    stem = traj_path.stem.replace("_trajectory", "")
    for axis in AXES:
        fig, ax = plt.subplots(figsize=(10, 3))
        ax.plot(t, rows[f"err_{axis}"], lw=0.8)
        if wind_on.any():
            ax.fill_between(t, 0, 1, where=wind_on, transform=ax.get_xaxis_transform(),
                            alpha=0.15, color="tab:orange", label="gust active")
            ax.legend(loc="upper right", fontsize=8)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(f"{axis} error [m]")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"{stem}_error_{axis}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        artifacts.append(path)
    return artifacts


def _summarize_eval(report_path: Path, out_dir: Path, lines: list[str]) -> None:
    rep = json.loads(report_path.read_text())
    traj = report_path.with_name(report_path.name.replace("_report.json", "_trajectory.csv"))
    lines.append(f"== {report_path.stem} ==")
    lines.append(f"controller: {rep['controller']}  steps: {rep['steps']}  crashed: {rep['crashed']}")
    for i, axis in enumerate(AXES):
        row = f"  {axis}: mean {rep['axis_mean'][i]:+.4f} m  std {rep['axis_std'][i]:.4f} m  max |err| {rep['max_abs_error'][i]:.4f} m"
        if rep.get("improvement_pct"):
            row += f"  improvement {rep['improvement_pct'][i]:+.1f}%"
        lines.append(row)
    lines.append(f"  xy std: {rep['xy_std']:.4f} m")
    if rep.get("xy_improvement_pct") is not None:
        lines.append(f"  xy improvement vs {rep['baseline']}: {rep['xy_improvement_pct']:+.1f}%")

    if traj.exists():
        rows = read_csv(traj)
        err = np.stack([rows["err_x"], rows["err_y"], rows["err_z"]], axis=1)[1:]
        std = err.std(axis=0)
        for i in range(3):
            if not math.isclose(std[i], rep["axis_std"][i], abs_tol=1e-12):
                raise MissingData(
                    f"{report_path}: stored axis_std[{i}] diverges from the raw CSV recomputation"
                )
        xy = math.sqrt(err[:, 0].var() + err[:, 1].var())
        if not math.isclose(xy, rep["xy_std"], abs_tol=1e-12):
            raise MissingData(f"{report_path}: stored xy_std diverges from the raw CSV recomputation")
        reward_err = verify_trajectory_rewards(traj)
        lines.append(f"  reward recompute max |diff|: {reward_err:.3e}")


def _render_sweep(sweep_json: Path, out_dir: Path, lines: list[str]) -> list[Path]:
    rep = json.loads(sweep_json.read_text())
    cells = rep["cells"]
    artifacts = []
    lines.append("== robustness sweep ==")
    lines.append(f"mode: {rep['mode']}  baseline xy std: {rep['baseline_xy_std']:.4f} m")
    for c in cells:
        mark = " CRASH" if c["crashed"] else ""
        lines.append(
            f"  mass x{c['mass_scale']:.2f} lift x{c['lift_scale']:.2f}: "
            f"xy std {c['xy_std']:.4f} m  improvement {c['xy_improvement_pct']:+.1f}%{mark}"
        )

    masses = sorted({c["mass_scale"] for c in cells})
    lifts = sorted({c["lift_scale"] for c in cells})
    if rep["mode"] == "grid":
        mat = np.full((len(masses), len(lifts)), np.nan)
        crashed = np.zeros_like(mat, dtype=bool)
        for c in cells:
            i, j = masses.index(c["mass_scale"]), lifts.index(c["lift_scale"])
            mat[i, j] = c["xy_improvement_pct"]
            crashed[i, j] = c["crashed"]
        fig, ax = plt.subplots(figsize=(1.2 * len(lifts) + 2, 1.0 * len(masses) + 2))
        im = ax.imshow(mat, cmap="RdYlGn", origin="lower", vmin=-100, vmax=100)
        for i in range(len(masses)):
            for j in range(len(lifts)):
                if crashed[i, j]:
                    ax.text(j, i, "X", ha="center", va="center", fontsize=18, color="black")
                elif np.isfinite(mat[i, j]):
                    ax.text(j, i, f"{mat[i, j]:+.0f}%", ha="center", va="center", fontsize=8)
        ax.set_xticks(range(len(lifts)), [f"{v:.0%}" for v in lifts])
        ax.set_yticks(range(len(masses)), [f"{v:.0%}" for v in masses])
        ax.set_xlabel("lift coefficient")
        ax.set_ylabel("mass")
        fig.colorbar(im, label="xy improvement vs nominal PID [%]")
        fig.tight_layout()
        path = out_dir / "sweep_matrix.png"
    else:
        fig, axes = plt.subplots(1, 2, figsize=(10, 3.5), sharey=True)
        for ax, key, label in ((axes[0], "mass_scale", "mass"), (axes[1], "lift_scale", "lift coefficient")):
            other = "lift_scale" if key == "mass_scale" else "mass_scale"
            pts = [c for c in cells if abs(c[other] - 1.0) < 1e-12]
            xs = [c[key] for c in pts]
            ys = [c["xy_std"] for c in pts]
            ax.plot(xs, ys, "o-", label="residual controller")
            for c in pts:
                if c["crashed"]:
                    ax.plot(c[key], c["xy_std"], "x", color="red", markersize=12)
            ax.axhline(rep["baseline_xy_std"], ls="--", color="gray", label="nominal PID")
            ax.set_xlabel(f"{label} multiplier")
            ax.grid(alpha=0.3)
        axes[0].set_ylabel("xy positional std [m]")
        axes[0].legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / "sweep_axis.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    artifacts.append(path)
    return artifacts


def _render_training(log_path: Path, out_dir: Path) -> list[Path]:
    rows = read_csv(log_path)
    fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    axes[0].plot(rows["env_step"], rows["critic_loss_0"], lw=0.5, label="critic 0")
    axes[0].plot(rows["env_step"], rows["critic_loss_1"], lw=0.5, label="critic 1")
    axes[0].set_yscale("log")
    axes[0].set_ylabel("critic loss")
    axes[0].legend(fontsize=8)
    axes[1].plot(rows["env_step"], rows["actor_loss"], lw=0.5)
    axes[1].set_ylabel("actor loss")
    axes[2].plot(rows["env_step"], rows["alpha"], lw=0.8)
    axes[2].set_ylabel("alpha")
    axes[2].set_xlabel("environment step")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "training_curves.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)

    artifacts = [path]
    evals = log_path.parent / "evals.csv"
    if evals.exists():
        rows = read_csv(evals)
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(rows["env_step"], rows["xy_std"], "o-")
        ax.set_xlabel("environment step")
        ax.set_ylabel("eval xy std [m]")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out_dir / "eval_progress.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        artifacts.append(path)
    return artifacts


def report(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render every recognized artifact in a run directory."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "report"
    if not run_dir.exists():
        raise MissingData(f"run directory {run_dir} does not exist")
    out_dir.mkdir(parents=True, exist_ok=True)

    artifacts: list[Path] = []
    lines: list[str] = []

    for traj in sorted(run_dir.glob("*_trajectory.csv")):
        artifacts += _render_trajectory(traj, out_dir)
    for rep in sorted(run_dir.glob("*_report.json")):
        if rep.name == "sweep_report.json":
            continue
        _summarize_eval(rep, out_dir, lines)
    sweep = run_dir / "sweep_report.json"
    if sweep.exists():
        artifacts += _render_sweep(sweep, out_dir, lines)
    log = run_dir / "training_log.csv"
    if log.exists():
        artifacts += _render_training(log, out_dir)

    if not artifacts and not lines:
        raise MissingData(f"{run_dir} holds no trajectory, report, sweep or training files")

    summary = out_dir / "summary.txt"
    summary.write_text("\n".join(lines) + "\n" if lines else "no tabular reports found\n")
    artifacts.append(summary)
    return artifacts
