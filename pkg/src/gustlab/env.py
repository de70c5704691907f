"""Episode orchestration: multi-rate loop, wind schedule, reward.

One env step covers a full 0.1 s residual-controller period: 100 physics
substeps at 1 kHz, position/velocity PID ticks at 100 Hz, attitude at
250 Hz and the rate loop at 1 kHz. The residual action is held constant
across the window (zero-order hold); the composed wrench recorded for the
step is the one produced at the window's opening tick.

Rewards are computed from RL-rate boundary states:

    r = w_pos * min(delta_prev - delta, 0)
      + w_rp  * -( |d roll|  + |d pitch| )
      + w_yt  * -( |d yaw|   + |d thrust| )

with delta the Euclidean distance to the target and the deltas taken on
the composed wrench between consecutive steps. Every term is a penalty,
so rewards are never positive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import attitude
from .dynamics import (
    NonFiniteState,
    QuadState,
    VehicleParams,
    WindState,
    derivative_constants,
    step_vector,
)
from .features import Featurizer, FeatureScales, ResidualBounds, combine_arrays, map_action
from .mixer import MixerPipeline, WrenchScale
from .pid import CascadePid, LoopTicks, PidGains, TargetPose


def wind_directions() -> np.ndarray:
    """The 26 unit gust directions: sign combinations of {-,0,+}^3 minus
    the zero vector, in lexicographic order, each normalized."""
    dirs = [
        np.array(d, dtype=float)
        for d in itertools.product((-1, 0, 1), repeat=3)
        if d != (0, 0, 0)
    ]
    return np.stack([d / np.linalg.norm(d) for d in dirs])


@dataclass
class WindSchedule:
    """Gust shape constants shared by training and evaluation."""

    speed_lo: float = 15.0  # training speeds drawn uniformly in [lo, hi]
    speed_hi: float = 25.0
    eval_speed: float = 20.0
    ramp_s: float = 1.0
    hold_s: float = 3.0  # training hold after the ramp
    eval_gust_steps: int = 30  # RL steps of wind per evaluation gust, ramp included
    eval_interval_steps: int = 70  # calm RL steps between evaluation gusts

    def __post_init__(self) -> None:
        if not (0.0 <= self.speed_lo <= self.speed_hi):
            raise ValueError("wind speed range must satisfy 0 <= lo <= hi")


@dataclass
class GustSpec:
    """One gust: linear ramp to full speed, hold, then calm."""

    direction: np.ndarray
    speed: float
    start_s: float = 0.0
    duration_s: float = 4.0  # total on-time including the ramp
    ramp_s: float = 1.0


def wind_at(gust: GustSpec | None, t: float) -> WindState:
    """Wind at episode time t under a single gust spec (calm outside it)."""
    if gust is None:
        return WindState.calm()
    rel = t - gust.start_s
    if rel < 0.0 or rel >= gust.duration_s:
        return WindState.calm()
    speed = gust.speed * min(rel / gust.ramp_s, 1.0)
    if speed == 0.0:
        return WindState.calm()
    return WindState(direction=gust.direction.copy(), speed=speed)


@dataclass
class RewardWeights:
    pos: float = 1.0
    rp: float = 2.5e-2
    yt: float = 5.0e-3


def reward_terms(
    prev_delta: float,
    delta: float,
    prev_action: np.ndarray,
    action: np.ndarray,
    weights: RewardWeights,
) -> tuple[float, float, float, float]:
    """Total reward and its three penalty terms (all <= 0)."""
    r_pos = min(prev_delta - delta, 0.0)
    r_rp = -(abs(action[1] - prev_action[1]) + abs(action[2] - prev_action[2]))
    r_yt = -(abs(action[3] - prev_action[3]) + abs(action[0] - prev_action[0]))
    r = weights.pos * r_pos + weights.rp * r_rp + weights.yt * r_yt
    return r, r_pos, r_rp, r_yt


@dataclass
class EpisodeConfig:
    rl_period_s: float = 0.1
    physics_dt: float = 0.001
    max_rl_steps: int = 70
    crash_altitude_m: float = 0.05
    crash_tilt_deg: float = 80.0
    crash_position_error_m: float = 10.0
    target: TargetPose = field(default_factory=lambda: TargetPose(position=np.array([0.0, 0.0, 2.0])))
    start_jitter_m: float = 0.0  # optional reset randomization, off by default

    def __post_init__(self) -> None:
        ratio = self.rl_period_s / self.physics_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("rl_period_s must be an integer multiple of physics_dt")

    @property
    def substeps(self) -> int:
        return round(self.rl_period_s / self.physics_dt)


class HoverGustEnv:
    """Hover-keeping under scheduled gusts, residual action in, reward out.

    The simulated vehicle may differ from the controller's reference
    vehicle (robustness sweeps); the PID cascade, wrench normalization
    and mixer always use the reference.
    """

    def __init__(
        self,
        episode: EpisodeConfig,
        schedule: WindSchedule,
        vehicle: VehicleParams,
        reference: VehicleParams | None = None,
        gains: PidGains | None = None,
        scales: FeatureScales | None = None,
        bounds: ResidualBounds | None = None,
        weights: RewardWeights | None = None,
        mode: str = "train",
    ):
        if mode not in ("train", "eval"):
            raise ValueError("mode must be 'train' or 'eval'")
        self.episode = episode
        self.schedule = schedule
        self.vehicle = vehicle
        self.reference = reference or vehicle
        self.gains = gains or PidGains()
        self.scales = scales or FeatureScales()
        self.bounds = bounds or ResidualBounds()
        self.weights = weights or RewardWeights()
        self.mode = mode

        self.pid = CascadePid(self.gains, self.reference, episode.target)
        self.featurizer = Featurizer(episode.target, self.scales)
        self._pipeline = MixerPipeline(self.reference, WrenchScale.from_params(self.reference))
        self._consts = derivative_constants(vehicle)
        self._directions = wind_directions()
        if mode == "eval":
            cycle = schedule.eval_gust_steps + schedule.eval_interval_steps
            self.max_rl_steps = cycle * len(self._directions)
        else:
            self.max_rl_steps = episode.max_rl_steps
        self._tilt_cos_limit = math.cos(math.radians(episode.crash_tilt_deg))

    # -- episode control -------------------------------------------------

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        """Start a new episode; returns the (all-zero) initial observation."""
        ep = self.episode
        state = QuadState.hover(self.reference, position=ep.target.position.copy(), yaw=ep.target.yaw)
        if ep.start_jitter_m > 0.0:
            if rng is None:
                raise ValueError("start_jitter_m > 0 requires an rng at reset")
            state.position += rng.uniform(-ep.start_jitter_m, ep.start_jitter_m, size=3)

        self._y = state.as_vector()
        self.pid.reset(state)
        self.featurizer.reset()
        self._n = 0  # global physics substep index
        self._rl_step = 0

        if self.mode == "eval":
            self._gusts = self._eval_gusts()
        else:
            if rng is None:
                raise ValueError("training reset requires an rng to draw the gust")
            d = self._directions[rng.integers(0, len(self._directions))]
            speed = rng.uniform(self.schedule.speed_lo, self.schedule.speed_hi)
            self._gusts = [
                GustSpec(
                    direction=d.copy(),
                    speed=speed,
                    start_s=0.0,
                    duration_s=self.schedule.ramp_s + self.schedule.hold_s,
                    ramp_s=self.schedule.ramp_s,
                )
            ]
        self._gust_idx = 0

        self._prev_delta = float(np.linalg.norm(state.position - ep.target.position))
        # reward baseline: the base controller's latched wrench, zero residual
        self._prev_action = self.pid.wrench_array()
        return self.featurizer.observation()

    def _eval_gusts(self) -> list[GustSpec]:
        s = self.schedule
        cycle_s = (s.eval_gust_steps + s.eval_interval_steps) * self.episode.rl_period_s
        return [
            GustSpec(
                direction=d.copy(),
                speed=s.eval_speed,
                start_s=k * cycle_s,
                duration_s=s.eval_gust_steps * self.episode.rl_period_s,
                ramp_s=s.ramp_s,
            )
            for k, d in enumerate(self._directions)
        ]

    def wind_now(self, t: float) -> WindState:
        """Scheduled wind at episode time t."""
        while self._gust_idx < len(self._gusts) - 1 and t >= self._gusts[self._gust_idx + 1].start_s:
            self._gust_idx += 1
        return wind_at(self._gusts[self._gust_idx] if self._gusts else None, t)

    # -- stepping ---------------------------------------------------------

    def step(self, a_rl: np.ndarray) -> tuple[np.ndarray, float, bool, dict]:
        """Advance one RL period under a constant residual wrench a_rl."""
        ep = self.episode
        dt = ep.physics_dt
        y = self._y
        a_pid_first = None
        a_first = None
        nonfinite = False

        for k in range(ep.substeps):
            state = QuadState.view(y)
            self.pid.step(state, LoopTicks.for_substep(self._n))
            a_pid = self.pid.wrench_array()
            a = combine_arrays(a_pid, a_rl)
            if k == 0:
                a_pid_first = a_pid
                a_first = a.copy()
            speeds = self._pipeline.speeds(a)
            wind = self.wind_now(self._n * dt)
            try:
                y = step_vector(y, speeds, wind.velocity, self.vehicle, dt, self._consts)
            except NonFiniteState:
                nonfinite = True
                self._n += 1
                break
            self._n += 1

        self._y = y
        self._rl_step += 1
        state = QuadState.view(y)
        err = state.position - ep.target.position
        delta = float(np.linalg.norm(err))

        r, r_pos, r_rp, r_yt = reward_terms(self._prev_delta, delta, self._prev_action, a_first, self.weights)

        crash = (
            nonfinite
            or state.position[2] < ep.crash_altitude_m
            or attitude.body_z_world(state.orientation)[2] < self._tilt_cos_limit
            or delta > ep.crash_position_error_m
        )
        done = crash or self._rl_step >= self.max_rl_steps

        self.featurizer.push(state, a_pid_first, np.asarray(a_rl, dtype=float))
        obs = self.featurizer.observation()

        info = {
            "time_s": self._rl_step * ep.rl_period_s,
            "position_error": err.copy(),
            "delta": delta,
            "wind": self.wind_now(self._rl_step * ep.rl_period_s).velocity,
            "a_pid": a_pid_first,
            "a_rl": np.asarray(a_rl, dtype=float).copy(),
            "action": a_first,
            "reward_terms": (r_pos, r_rp, r_yt),
            "crash": crash,
            "nonfinite": nonfinite,
            "time_limit": not crash and self._rl_step >= self.max_rl_steps,
        }

        self._prev_delta = delta
        self._prev_action = a_first
        return obs, r, done, info

    @property
    def state(self) -> QuadState:
        return QuadState.from_vector(self._y)

    def residual_from_squashed(self, squashed: np.ndarray) -> np.ndarray:
        return map_action(squashed, self.bounds)
