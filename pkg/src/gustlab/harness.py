"""Training, evaluation and robustness-sweep workflows.

Everything lands in a run directory as CSV/JSON and every number in any
report is recomputable from those raw files alone. Floats are written
with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import json
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, resolve_config
from .env import HoverGustEnv, wind_directions
from .features import inject_noise, map_action, noise_profile
from .sac import ReplayBuffer, SacState, Transition, sac_update, sample_action

FLOAT_FMT = "{:.17g}"

TRAJECTORY_COLUMNS = (
    "step", "time_s",
    "err_x", "err_y", "err_z",
    "wind_x", "wind_y", "wind_z",
    "pid_thrust", "pid_roll", "pid_pitch", "pid_yaw",
    "rl_thrust", "rl_roll", "rl_pitch", "rl_yaw",
    "a_thrust", "a_roll", "a_pitch", "a_yaw",
    "r_pos", "r_rp", "r_yt", "reward",
    "crash",
)

TRAIN_LOG_COLUMNS = (
    "env_step", "updates", "episode", "reward",
    "critic_loss_0", "critic_loss_1", "actor_loss", "alpha",
    "mean_log_prob", "mean_target",
)


class NonFiniteLoss(RuntimeError):
    """A training loss went non-finite; the run aborts with a diagnostic dump."""


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT.format(float(x))


def _csv_row(values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


# ----------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    """Per-axis positional error statistics over the 26-gust protocol."""

    controller: str
    seed: int
    steps: int
    axis_mean: list[float]
    axis_std: list[float]
    max_abs_error: list[float]
    xy_std: float
    crashed: bool
    crash_step: int
    gust_peaks: list[dict]
    mass_scale: float = 1.0
    lift_scale: float = 1.0
    baseline: str | None = None
    improvement_pct: list[float] | None = None
    xy_improvement_pct: float | None = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))

    @staticmethod
    def improvement(base_std: float, prop_std: float) -> float:
        return (1.0 - prop_std / base_std) * 100.0


def _xy_std(errors: np.ndarray) -> float:
    return float(math.sqrt(errors[:, 0].var() + errors[:, 1].var()))


class CheckpointPolicy:
    """Deterministic residual policy loaded from a checkpoint."""

    def __init__(self, path: str | Path):
        sac, scales, bounds, meta = load_checkpoint(path)
        self.actor = sac.actor
        self.scales = scales
        self.bounds = bounds
        self.meta = meta

    def residual(self, obs: np.ndarray) -> np.ndarray:
        _, squashed, _ = sample_action(self.actor, obs, "deterministic")
        return map_action(squashed, self.bounds)


def _actor_residual(actor, bounds):
    def residual(obs: np.ndarray) -> np.ndarray:
        _, squashed, _ = sample_action(actor, obs, "deterministic")
        return map_action(squashed, bounds)

    return residual


def run_protocol(
    cfg: RunConfig,
    residual_fn,
    trajectory_path: Path | None = None,
    mass_scale: float = 1.0,
    lift_scale: float = 1.0,
) -> tuple[np.ndarray, bool, int]:
    """Run the 26-gust evaluation episode; returns (errors, crashed, steps).

    errors is (steps, 3) sampled at RL boundaries. A trajectory CSV with
    the full per-step schema is written when a path is given.
    """
    env = HoverGustEnv(
        episode=cfg.episode,
        schedule=cfg.schedule,
        vehicle=cfg.scaled_vehicle(mass_scale, lift_scale),
        reference=cfg.reference,
        gains=cfg.gains,
        scales=cfg.scales,
        bounds=cfg.bounds,
        weights=cfg.weights,
        mode="eval",
    )
    obs = env.reset()
    writer = None
    if trajectory_path is not None:
        trajectory_path.parent.mkdir(parents=True, exist_ok=True)
        writer = trajectory_path.open("w")
        writer.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        state = env.state
        err0 = state.position - cfg.episode.target.position
        a0 = env.pid.wrench_array()
        writer.write(
            _csv_row(
                [0, 0.0, *err0, 0.0, 0.0, 0.0, *a0, 0.0, 0.0, 0.0, 0.0, *a0, 0.0, 0.0, 0.0, 0.0, False]
            )
        )

    errors = []
    crashed = False
    crash_step = -1
    step = 0
    done = False
    while not done:
        a_rl = residual_fn(obs)
        obs, reward, done, info = env.step(a_rl)
        step += 1
        errors.append(info["position_error"])
        if writer is not None:
            r_pos, r_rp, r_yt = info["reward_terms"]
            writer.write(
                _csv_row(
                    [
                        step, info["time_s"],
                        *info["position_error"], *info["wind"],
                        *info["a_pid"], *info["a_rl"], *info["action"],
                        r_pos, r_rp, r_yt, reward,
                        info["crash"],
                    ]
                )
            )
        if info["crash"]:
            crashed = True
            crash_step = step
    if writer is not None:
        writer.close()
    return np.asarray(errors), crashed, crash_step if crashed else -1


def evaluate(
    cfg: RunConfig,
    checkpoint: str | Path | None,
    out_dir: str | Path | None = None,
    baseline: EvalReport | None = None,
    mass_scale: float = 1.0,
    lift_scale: float = 1.0,
    tag: str = "eval",
) -> EvalReport:
    """Evaluate a checkpoint (or the bare PID stack) on the gust protocol."""
    if checkpoint is None:
        residual_fn = lambda obs: np.zeros(4)
        controller = "pid-only"
    else:
        policy = CheckpointPolicy(checkpoint)
        residual_fn = policy.residual
        controller = Path(checkpoint).name

    traj_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        traj_path = out_dir / f"{tag}_trajectory.csv"

    errors, crashed, crash_step = run_protocol(cfg, residual_fn, traj_path, mass_scale, lift_scale)

    cycle = cfg.schedule.eval_gust_steps + cfg.schedule.eval_interval_steps
    dirs = wind_directions()
    peaks = []
    for g in range(len(dirs)):
        lo, hi = g * cycle, min((g + 1) * cycle, len(errors))
        if lo >= len(errors):
            break
        window = errors[lo:hi]
        peaks.append(
            {
                "gust": g,
                "direction": [float(v) for v in dirs[g]],
                "peak_abs": [float(v) for v in np.abs(window).max(axis=0)],
                "peak_delta": float(np.linalg.norm(window, axis=1).max()),
            }
        )

    report = EvalReport(
        controller=controller,
        seed=cfg.seed,
        steps=len(errors),
        axis_mean=[float(v) for v in errors.mean(axis=0)],
        axis_std=[float(v) for v in errors.std(axis=0)],
        max_abs_error=[float(v) for v in np.abs(errors).max(axis=0)],
        xy_std=_xy_std(errors),
        crashed=crashed,
        crash_step=crash_step,
        gust_peaks=peaks,
        mass_scale=mass_scale,
        lift_scale=lift_scale,
    )
    if baseline is not None:
        report.baseline = baseline.controller
        report.improvement_pct = [
            EvalReport.improvement(b, p) for b, p in zip(baseline.axis_std, report.axis_std)
        ]
        report.xy_improvement_pct = EvalReport.improvement(baseline.xy_std, report.xy_std)
    if out_dir is not None:
        (out_dir / f"{tag}_report.json").write_text(report.to_json())
    return report


# ----------------------------------------------------------------------
# robustness sweep

AXIS_MULTIPLIERS = (0.5, 1.0, 1.5)
GRID_MULTIPLIERS = (0.5, 0.75, 1.0, 1.25, 1.5)


def sweep_cells(mass_multipliers, lift_multipliers, mode: str) -> list[tuple[float, float]]:
    if mode == "grid":
        return [(m, l) for m in mass_multipliers for l in lift_multipliers]
    if mode == "axis":
        cells = [(m, 1.0) for m in mass_multipliers]
        cells += [(1.0, l) for l in lift_multipliers if (1.0, l) not in cells]
        return cells
    raise ValueError("sweep mode must be 'axis' or 'grid'")


def _sweep_cell_worker(args) -> dict:
    raw, checkpoint, mass_scale, lift_scale = args
    cfg = resolve_config(raw)
    report = evaluate(cfg, checkpoint, out_dir=None, mass_scale=mass_scale, lift_scale=lift_scale)
    return report.__dict__


@dataclass
class SweepReport:
    mode: str
    checkpoint: str
    baseline_xy_std: float
    baseline_axis_std: list[float]
    cells: list[dict]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        return cls(**json.loads(text))


def robustness_sweep(
    cfg: RunConfig,
    checkpoint: str | Path,
    mass_multipliers=AXIS_MULTIPLIERS,
    lift_multipliers=AXIS_MULTIPLIERS,
    mode: str = "axis",
    workers: int = 1,
    baseline: EvalReport | None = None,
    out_dir: str | Path | None = None,
) -> SweepReport:
    """Evaluate a checkpoint across vehicle-parameter multipliers.

    Each cell runs the full gust protocol on a plant with scaled mass and
    lift coefficient, compared against the nominal PID-only baseline.
    Crashed cells are data, not errors. Results are reduced in cell-index
    order, so reports are identical at any worker count.
    """
    for m in (*mass_multipliers, *lift_multipliers):
        if not (0.25 <= m <= 2.0):
            raise ValueError(f"sweep multiplier {m} outside [0.25, 2.0]")
    if baseline is None:
        baseline = evaluate(cfg, None, out_dir=None)

    cells = sweep_cells(mass_multipliers, lift_multipliers, mode)
    jobs = [(cfg.raw, str(checkpoint), m, l) for (m, l) in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell_worker, jobs))
    else:
        results = [_sweep_cell_worker(j) for j in jobs]

    rows = []
    for (m, l), rep in zip(cells, results):
        rows.append(
            {
                "mass_scale": m,
                "lift_scale": l,
                "xy_std": rep["xy_std"],
                "axis_std": rep["axis_std"],
                "improvement_pct": [
                    EvalReport.improvement(b, p) for b, p in zip(baseline.axis_std, rep["axis_std"])
                ],
                "xy_improvement_pct": EvalReport.improvement(baseline.xy_std, rep["xy_std"]),
                "crashed": rep["crashed"],
                "crash_step": rep["crash_step"],
            }
        )
    report = SweepReport(
        mode=mode,
        checkpoint=str(checkpoint),
        baseline_xy_std=baseline.xy_std,
        baseline_axis_std=baseline.axis_std,
        cells=rows,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep_report.json").write_text(report.to_json())
        with (out_dir / "sweep_matrix.csv").open("w") as f:
            f.write("mass_scale,lift_scale,xy_std,imp_x,imp_y,imp_z,xy_improvement,crashed\n")
            for row in rows:
                f.write(
                    _csv_row(
                        [
                            row["mass_scale"], row["lift_scale"], row["xy_std"],
                            *row["improvement_pct"], row["xy_improvement_pct"],
                            row["crashed"],
                        ]
                    )
                )
    return report


# ----------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    best_checkpoint: Path
    best_xy_std: float
    best_step: int
    log_path: Path
    evals: list[dict] = field(default_factory=list)


def train(cfg: RunConfig) -> TrainResult:
    """Synchronous collect/update loop with periodic protocol evaluations.

    Checkpoints are written at every evaluation; the one with the lowest
    xy positional error standard deviation is copied to best.glab.
    """
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)

    init_ss, env_ss, act_ss, sac_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    rng_init = np.random.default_rng(init_ss)
    rng_env = np.random.default_rng(env_ss)
    rng_act = np.random.default_rng(act_ss)
    rng_sac = np.random.default_rng(sac_ss)

    sac = SacState.create(
        rng_init,
        actor_hidden=cfg.actor_hidden,
        critic_hidden=cfg.critic_hidden,
        config=cfg.sac,
        actor_final_scale=cfg.actor_final_scale,
        log_std_bias_init=cfg.log_std_bias_init,
    )
    env = HoverGustEnv(
        episode=cfg.episode,
        schedule=cfg.schedule,
        vehicle=cfg.vehicle,
        reference=cfg.reference,
        gains=cfg.gains,
        scales=cfg.scales,
        bounds=cfg.bounds,
        weights=cfg.weights,
        mode="train",
    )
    replay = ReplayBuffer(capacity=cfg.replay_capacity)
    amp = noise_profile(cfg.scales, cfg.noise)
    noise_fn = lambda obs, rng: inject_noise(obs, rng, amp)

    log_path = out / "training_log.csv"
    evals_path = out / "evals.csv"
    log = log_path.open("w")
    log.write(",".join(TRAIN_LOG_COLUMNS) + "\n")
    evals_csv = evals_path.open("w")
    evals_csv.write("env_step,xy_std,std_x,std_y,std_z,crashed\n")

    best_xy = math.inf
    best_step = -1
    best_path = ckpt_dir / "best.glab"
    evals: list[dict] = []

    def run_eval(step: int) -> None:
        nonlocal best_xy, best_step
        residual_fn = _actor_residual(sac.actor, cfg.bounds)
        errors, crashed, _ = run_protocol(cfg, residual_fn)
        xy = _xy_std(errors)
        std = errors.std(axis=0)
        evals_csv.write(_csv_row([step, xy, std[0], std[1], std[2], crashed]))
        evals_csv.flush()
        path = ckpt_dir / f"ckpt_{step:08d}.glab"
        save_checkpoint(path, sac, cfg.scales, cfg.bounds, env_steps=step)
        evals.append({"env_step": step, "xy_std": xy, "crashed": crashed, "path": str(path)})
        if not crashed and xy < best_xy:
            best_xy = xy
            best_step = step
            shutil.copyfile(path, best_path)

    obs = env.reset(rng_env)
    episode = 0
    update_budget = 0.0
    try:
        for step in range(1, cfg.total_steps + 1):
            if len(replay) < cfg.warmup_transitions:
                presquash, squashed, _ = sample_action(sac.actor, obs, "deterministic")
            else:
                presquash, squashed, _ = sample_action(sac.actor, obs, "stochastic", rng_act)
            a_rl = map_action(squashed, cfg.bounds)
            next_obs, reward, done, info = env.step(a_rl)
            replay.push(Transition(obs, presquash, reward, next_obs, done=info["crash"]))

            diag = None
            if len(replay) >= cfg.warmup_transitions:
                update_budget += cfg.updates_per_step
                while update_budget >= 1.0:
                    sac, diag = sac_update(sac, replay, rng_sac, noise_fn)
                    update_budget -= 1.0
                    if not all(math.isfinite(v) for v in diag.values()):
                        dump = {"env_step": step, "updates": sac.updates, "diagnostics": diag}
                        (out / "nonfinite_dump.json").write_text(json.dumps(dump, indent=2, default=str))
                        raise NonFiniteLoss(f"non-finite loss at env step {step}")
                    if sac.updates % cfg.log_every_updates == 0:
                        log.write(
                            _csv_row(
                                [
                                    step, sac.updates, episode, reward,
                                    diag["critic_loss_0"], diag["critic_loss_1"],
                                    diag["actor_loss"], diag["alpha"],
                                    diag["mean_log_prob"], diag["mean_target"],
                                ]
                            )
                        )

            if done:
                episode += 1
                obs = env.reset(rng_env)
            else:
                obs = next_obs

            if step % cfg.eval_interval_steps == 0 or step == cfg.total_steps:
                run_eval(step)
    finally:
        log.close()
        evals_csv.close()

    if best_step < 0:
        raise NonFiniteLoss("no evaluation produced a usable checkpoint")
    (out / "best.json").write_text(
        json.dumps({"env_step": best_step, "xy_std": best_xy, "path": str(best_path)}, sort_keys=True, indent=2)
        + "\n"
    )
    return TrainResult(
        best_checkpoint=best_path,
        best_xy_std=best_xy,
        best_step=best_step,
        log_path=log_path,
        evals=evals,
    )
