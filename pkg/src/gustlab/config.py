"""Run configuration: a single YAML document, validated strictly.

The file separates `paper` (hyperparameters and protocol constants taken
from the published study) from `assumed` (everything this artifact had to
choose itself: vehicle geometry, PID gains, SAC plumbing, episode
bounds). Unknown keys are rejected so typos cannot silently fall back to
defaults. A seed is mandatory; nothing in the stack seeds from the clock.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import VehicleParams
from .env import EpisodeConfig, RewardWeights, WindSchedule
from .features import FeatureScales, NoiseScales, ResidualBounds
from .pid import PidGains, TargetPose
from .sac import SacConfig

SCHEMA_VERSION = 1

OUT_ROOT_ENV = "GUSTLAB_OUT"


class ConfigError(ValueError):
    """Configuration file is missing, malformed or inconsistent."""


def default_config() -> dict:
    """The full default configuration as a plain dict (desk-scale run)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": 0,
        "out_dir": "runs/run",
        "paper": {
            "vehicle_mass_kg": 3.53,
            "rl_rate_hz": 10.0,
            "actor_hidden": [30, 20, 5],
            "critic_hidden": [400, 200, 100],
            "sac": {
                "gamma": 0.95,
                "tau": 1.0e-4,
                "batch_size": 128,
                "learning_rate": 2.0e-4,
            },
            "reward_weights": {"pos": 1.0, "rp": 2.5e-2, "yt": 5.0e-3},
            "residual_bounds": {
                "a_max": [0.25, 0.1, 0.1, 0.1],
                "beta": 1.2,
                "epsilon": 0.1,
            },
            "noise_scales": {
                "position": 0.1,
                "velocity": 0.5,
                "angle": 0.05,
                "angular_velocity": 1.25,
                "pid_output": 0.1,
            },
            "wind": {
                "train_speed_range": [15.0, 25.0],
                "eval_speed": 20.0,
                "ramp_s": 1.0,
                "hold_s": 3.0,
                "eval_gust_steps": 30,
                "eval_interval_steps": 70,
            },
        },
        "assumed": {
            "vehicle": {
                "inertia_diag": [0.12, 0.12, 0.20],
                "arm_length_m": 0.33,
                "lift_coefficient": 2.4048125e-05,
                "yaw_torque_coefficient": 4.0e-07,
                "linear_drag_area": [0.055, 0.055, 0.08],
                "motor_time_constant_s": 0.02,
                "max_motor_speed_rad_s": 1000.0,
                "mass_scale": 1.0,
                "lift_scale": 1.0,
            },
            "pid": PidGains().as_dict(),
            "sac": {
                "alpha_mode": "auto",
                "alpha_init": 0.2,
                "target_entropy": -4.0,
                "twin_critics": True,
                "replay_capacity": 1_000_000,
                "warmup_transitions": 1000,
                "updates_per_step": 1.0,
                "actor_final_scale": 0.01,
                "log_std_bias_init": -1.0,
            },
            "features": {
                "position_m": 5.0,
                "velocity_mps": 10.0,
                "angle_rad": math.pi,
                "angular_velocity_radps": 2.0 * math.pi,
                "clamp": 10.0,
            },
            "episode": {
                "physics_dt": 0.001,
                "train_max_rl_steps": 70,
                "crash_altitude_m": 0.05,
                "crash_tilt_deg": 80.0,
                "crash_position_error_m": 10.0,
                "target_position": [0.0, 0.0, 2.0],
                "target_yaw": 0.0,
                "start_jitter_m": 0.0,
            },
            "train": {
                "total_steps": 40_000,
                "eval_interval_steps": 4000,
                "log_every_updates": 1,
            },
        },
    }


def _merge_strict(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            out[key] = _merge_strict(base[key], value, where)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """Fully resolved run settings built from the YAML document."""

    seed: int
    out_dir: Path
    vehicle: VehicleParams  # simulated plant (sweep multipliers applied)
    reference: VehicleParams  # what the controller believes
    mass_scale: float
    lift_scale: float
    gains: PidGains
    sac: SacConfig
    actor_hidden: tuple[int, ...]
    critic_hidden: tuple[int, ...]
    actor_final_scale: float
    log_std_bias_init: float
    replay_capacity: int
    warmup_transitions: int
    updates_per_step: float
    bounds: ResidualBounds
    scales: FeatureScales
    noise: NoiseScales
    weights: RewardWeights
    schedule: WindSchedule
    episode: EpisodeConfig
    total_steps: int
    eval_interval_steps: int
    log_every_updates: int
    raw: dict = field(repr=False, default_factory=dict)

    def scaled_vehicle(self, mass_scale: float = 1.0, lift_scale: float = 1.0) -> VehicleParams:
        """Plant with extra sweep multipliers stacked on the configured ones."""
        return self.reference.scaled(self.mass_scale * mass_scale, self.lift_scale * lift_scale)


def _resolve_out_dir(out_dir: str) -> Path:
    p = Path(out_dir)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def resolve_config(doc: dict) -> RunConfig:
    merged = _merge_strict(default_config(), doc)
    if merged["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {merged['schema_version']}")
    if merged["seed"] is None:
        raise ConfigError("a seed is required; wall-clock seeding is not supported")

    paper = merged["paper"]
    assumed = merged["assumed"]
    veh = assumed["vehicle"]

    try:
        reference = VehicleParams(
            mass=float(paper["vehicle_mass_kg"]),
            inertia_diag=np.asarray(veh["inertia_diag"], dtype=float),
            arm_length=float(veh["arm_length_m"]),
            lift_coefficient=float(veh["lift_coefficient"]),
            yaw_torque_coefficient=float(veh["yaw_torque_coefficient"]),
            linear_drag_area=np.asarray(veh["linear_drag_area"], dtype=float),
            motor_time_constant=float(veh["motor_time_constant_s"]),
            max_motor_speed=float(veh["max_motor_speed_rad_s"]),
        )
        mass_scale = float(veh["mass_scale"])
        lift_scale = float(veh["lift_scale"])
        vehicle = reference.scaled(mass_scale, lift_scale)
        gains = PidGains.from_dict(assumed["pid"])
        psac = paper["sac"]
        asac = assumed["sac"]
        sac = SacConfig(
            gamma=float(psac["gamma"]),
            tau=float(psac["tau"]),
            batch_size=int(psac["batch_size"]),
            learning_rate=float(psac["learning_rate"]),
            alpha_mode=str(asac["alpha_mode"]),
            alpha_init=float(asac["alpha_init"]),
            target_entropy=float(asac["target_entropy"]),
            twin_critics=bool(asac["twin_critics"]),
        )
        rb = paper["residual_bounds"]
        bounds = ResidualBounds(
            a_max=np.asarray(rb["a_max"], dtype=float), beta=float(rb["beta"]), epsilon=float(rb["epsilon"])
        )
        feats = assumed["features"]
        scales = FeatureScales(
            position_m=float(feats["position_m"]),
            velocity_mps=float(feats["velocity_mps"]),
            angle_rad=float(feats["angle_rad"]),
            angular_velocity_radps=float(feats["angular_velocity_radps"]),
            clamp=float(feats["clamp"]),
        )
        ns = paper["noise_scales"]
        noise = NoiseScales(
            position=float(ns["position"]),
            velocity=float(ns["velocity"]),
            angle=float(ns["angle"]),
            angular_velocity=float(ns["angular_velocity"]),
            pid_output=float(ns["pid_output"]),
        )
        rw = paper["reward_weights"]
        weights = RewardWeights(pos=float(rw["pos"]), rp=float(rw["rp"]), yt=float(rw["yt"]))
        wind = paper["wind"]
        lo, hi = (float(x) for x in wind["train_speed_range"])
        schedule = WindSchedule(
            speed_lo=lo,
            speed_hi=hi,
            eval_speed=float(wind["eval_speed"]),
            ramp_s=float(wind["ramp_s"]),
            hold_s=float(wind["hold_s"]),
            eval_gust_steps=int(wind["eval_gust_steps"]),
            eval_interval_steps=int(wind["eval_interval_steps"]),
        )
        ep = assumed["episode"]
        rl_period = 1.0 / float(paper["rl_rate_hz"])
        episode = EpisodeConfig(
            rl_period_s=rl_period,
            physics_dt=float(ep["physics_dt"]),
            max_rl_steps=int(ep["train_max_rl_steps"]),
            crash_altitude_m=float(ep["crash_altitude_m"]),
            crash_tilt_deg=float(ep["crash_tilt_deg"]),
            crash_position_error_m=float(ep["crash_position_error_m"]),
            target=TargetPose(
                position=np.asarray(ep["target_position"], dtype=float), yaw=float(ep["target_yaw"])
            ),
            start_jitter_m=float(ep["start_jitter_m"]),
        )
        train = assumed["train"]
        run = RunConfig(
            seed=int(merged["seed"]),
            out_dir=_resolve_out_dir(str(merged["out_dir"])),
            vehicle=vehicle,
            reference=reference,
            mass_scale=mass_scale,
            lift_scale=lift_scale,
            gains=gains,
            sac=sac,
            actor_hidden=tuple(int(x) for x in paper["actor_hidden"]),
            critic_hidden=tuple(int(x) for x in paper["critic_hidden"]),
            actor_final_scale=float(asac["actor_final_scale"]),
            log_std_bias_init=float(asac["log_std_bias_init"]),
            replay_capacity=int(asac["replay_capacity"]),
            warmup_transitions=int(asac["warmup_transitions"]),
            updates_per_step=float(asac["updates_per_step"]),
            bounds=bounds,
            scales=scales,
            noise=noise,
            weights=weights,
            schedule=schedule,
            episode=episode,
            total_steps=int(train["total_steps"]),
            eval_interval_steps=int(train["eval_interval_steps"]),
            log_every_updates=int(train["log_every_updates"]),
            raw=merged,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if run.total_steps < 1 or run.warmup_transitions < 0:
        raise ConfigError("train.total_steps must be >= 1 and warmup nonnegative")
    if run.updates_per_step < 0:
        raise ConfigError("sac.updates_per_step must be nonnegative")
    return run


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return resolve_config(doc)


def write_config(path: str | Path, doc: dict | None = None) -> None:
    Path(path).write_text(yaml.safe_dump(doc or default_config(), sort_keys=False))
