"""Observation featurization and the residual action layer.

The policy sees a 68-entry vector: histories sampled at the 0.1 s RL
period, most recent first, in this fixed order:

    [ 0: 9)  relative position to target, 3 steps x 3   (world frame, m)
    [ 9:18)  vehicle velocity,            3 steps x 3   (world frame, m/s)
    [18:27)  relative angle to target,    3 steps x 3   (roll/pitch/yaw
             error to level attitude at the target yaw, rad)
    [27:36)  angular velocity,            3 steps x 3   (body frame, rad/s)
    [36:48)  base-controller output,      3 steps x 4   (normalized wrench)
    [48:68)  residual-controller output,  5 steps x 4   (mapped residual)

Raw physical values are divided by per-group constants and clamped to
[-10, 10] before entering the network; training-time sensor noise is
specified in raw units and scaled into normalized units here, so the raw
scales apply verbatim. See FEATURES.md for the full contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import attitude
from .dynamics import QuadState
from .mixer import WrenchAction
from .pid import TargetPose

OBS_DIM = 68

POSITION_SLICE = slice(0, 9)
VELOCITY_SLICE = slice(9, 18)
ANGLE_SLICE = slice(18, 27)
ANGULAR_VELOCITY_SLICE = slice(27, 36)
PID_OUTPUT_SLICE = slice(36, 48)
RL_OUTPUT_SLICE = slice(48, 68)

POSITION_STEPS = 3
WRENCH_STEPS = 3
RL_STEPS = 5


@dataclass
class FeatureScales:
    """Divisors taking raw units to network units, plus the input clamp."""

    position_m: float = 5.0
    velocity_mps: float = 10.0
    angle_rad: float = math.pi
    angular_velocity_radps: float = 2.0 * math.pi
    clamp: float = 10.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.position_m, self.velocity_mps, self.angle_rad, self.angular_velocity_radps, self.clamp]
        )

    @classmethod
    def from_array(cls, a: np.ndarray) -> "FeatureScales":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]), float(a[4]))


@dataclass
class NoiseScales:
    """Raw-unit sensor-noise amplitudes applied to training batches.

    Uniform noise in [-1, 1) is scaled per feature group; the residual
    controller's own output history is never noised.
    """

    position: float = 0.1
    velocity: float = 0.5
    angle: float = 0.05
    angular_velocity: float = 1.25
    pid_output: float = 0.1


@dataclass
class ResidualBounds:
    """Residual action box and the tanh shift constants."""

    a_max: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.1, 0.1, 0.1]))
    beta: float = 1.2
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        self.a_max = np.asarray(self.a_max, dtype=float)
        if (self.a_max <= 0.0).any():
            raise ValueError("a_max must be strictly positive")

    @property
    def a_min(self) -> np.ndarray:
        return -self.a_max


def map_action(squashed: np.ndarray, bounds: ResidualBounds) -> np.ndarray:
    """Shift, scale and clip a tanh output onto the residual box.

    The shift widens the reachable range so the box edges are attained at
    squashed values of exactly +-1 instead of only asymptotically.
    """
    a_min = bounds.a_min
    shifted = 0.5 * (squashed + 1.0) * bounds.beta - bounds.epsilon
    scaled = shifted * (bounds.a_max - a_min) + a_min
    return np.clip(scaled, a_min, bounds.a_max)


def combine_arrays(a_pid: np.ndarray, a_rl: np.ndarray) -> np.ndarray:
    """Base wrench plus residual as 4-vectors, clamped to the wrench box."""
    a = a_pid + a_rl
    if a[0] < 0.0:
        a[0] = 0.0
    elif a[0] > 1.0:
        a[0] = 1.0
    for i in (1, 2, 3):
        if a[i] < -1.0:
            a[i] = -1.0
        elif a[i] > 1.0:
            a[i] = 1.0
    return a


def combine(a_pid: WrenchAction, a_rl: np.ndarray) -> WrenchAction:
    """Base wrench plus residual, clamped to the normalized wrench box."""
    return WrenchAction.from_array(combine_arrays(a_pid.as_array(), np.asarray(a_rl, dtype=float)))


class Featurizer:
    """Per-episode history buffers producing the 68-entry observation.

    Owned by a single rollout; push() once per RL step, observation() at
    any time. Buffers are zero-padded until enough steps have been seen.
    """

    def __init__(self, target: TargetPose, scales: FeatureScales | None = None):
        self.target = target
        self.scales = scales or FeatureScales()
        self._yaw_ref = attitude.from_yaw(target.yaw)
        self.reset()

    def reset(self) -> None:
        self._pos = np.zeros((POSITION_STEPS, 3))
        self._vel = np.zeros((POSITION_STEPS, 3))
        self._ang = np.zeros((POSITION_STEPS, 3))
        self._angvel = np.zeros((POSITION_STEPS, 3))
        self._pid = np.zeros((WRENCH_STEPS, 4))
        self._rl = np.zeros((RL_STEPS, 4))

    def push(self, state: QuadState, a_pid: WrenchAction | np.ndarray, a_rl: np.ndarray) -> None:
        """Record one RL-rate sample (most recent sample sits in slot 0)."""
        q_err = attitude.multiply(attitude.conjugate(self._yaw_ref), state.orientation)
        a_pid_arr = a_pid.as_array() if isinstance(a_pid, WrenchAction) else np.asarray(a_pid, dtype=float)
        sample_by_buffer = (
            (self._pos, state.position - self.target.position),
            (self._vel, state.velocity),
            (self._ang, attitude.to_euler(q_err)),
            (self._angvel, state.angular_velocity),
            (self._pid, a_pid_arr),
            (self._rl, np.asarray(a_rl, dtype=float)),
        )
        for buf, sample in sample_by_buffer:
            buf[1:] = buf[:-1]
            buf[0] = sample

    def observation(self) -> np.ndarray:
        s = self.scales
        obs = np.concatenate(
            [
                (self._pos / s.position_m).ravel(),
                (self._vel / s.velocity_mps).ravel(),
                (self._ang / s.angle_rad).ravel(),
                (self._angvel / s.angular_velocity_radps).ravel(),
                self._pid.ravel(),
                self._rl.ravel(),
            ]
        )
        return np.clip(obs, -s.clamp, s.clamp)


def noise_profile(scales: FeatureScales, noise: NoiseScales | None = None) -> np.ndarray:
    """Per-slot noise amplitude in normalized units (0 on residual slots)."""
    noise = noise or NoiseScales()
    amp = np.zeros(OBS_DIM)
    amp[POSITION_SLICE] = noise.position / scales.position_m
    amp[VELOCITY_SLICE] = noise.velocity / scales.velocity_mps
    amp[ANGLE_SLICE] = noise.angle / scales.angle_rad
    amp[ANGULAR_VELOCITY_SLICE] = noise.angular_velocity / scales.angular_velocity_radps
    amp[PID_OUTPUT_SLICE] = noise.pid_output
    return amp


def inject_noise(
    observations: np.ndarray, rng: np.random.Generator, amplitude: np.ndarray
) -> np.ndarray:
    """Add uniform [-1, 1) sensor noise to a training batch.

    Applied only inside update batches, never on the rollout path; the
    residual-output slots have zero amplitude and are returned bit-equal.
    """
    obs = np.asarray(observations, dtype=float)
    u = rng.uniform(-1.0, 1.0, size=obs.shape)
    return obs + u * amplitude
