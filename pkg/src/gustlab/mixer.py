"""Control allocation between wrench commands and squared rotor speeds.

The allocation matrix (c = 1/sqrt(2))

        [ 1   1   1   1 ]
    M = [-c   c   c  -c ]
        [ c  -c   c  -c ]
        [ 1   1  -1  -1 ]

maps squared rotor speeds to a unitless wrench; physical thrust/torques
additionally carry the lift, lever-arm and yaw-torque coefficients (see
gustlab.dynamics.propeller_wrench). Controllers exchange wrenches in
normalized units: thrust 1.0 equals twice the reference hover thrust and
torque 1.0 equals the torque of a full differential rotor pair at hover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import GRAVITY, VehicleParams

_C = 1.0 / math.sqrt(2.0)

MIXER_MATRIX = np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [-_C, _C, _C, -_C],
        [_C, -_C, _C, -_C],
        [1.0, 1.0, -1.0, -1.0],
    ]
)

# M @ M.T = diag(4, 2, 2, 4), so the exact inverse is M.T scaled per row.
MIXER_INVERSE_MATRIX = MIXER_MATRIX.T @ np.diag([0.25, 0.5, 0.5, 0.25])


@dataclass
class WrenchAction:
    """Normalized wrench: thrust in [0, 1], torques in [-1, 1]."""

    thrust: float = 0.0
    roll_torque: float = 0.0
    pitch_torque: float = 0.0
    yaw_torque: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust, self.roll_torque, self.pitch_torque, self.yaw_torque])

    @classmethod
    def from_array(cls, a: np.ndarray) -> "WrenchAction":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def clamped(self) -> "WrenchAction":
        return WrenchAction(
            thrust=min(1.0, max(0.0, self.thrust)),
            roll_torque=min(1.0, max(-1.0, self.roll_torque)),
            pitch_torque=min(1.0, max(-1.0, self.pitch_torque)),
            yaw_torque=min(1.0, max(-1.0, self.yaw_torque)),
        )


@dataclass
class WrenchScale:
    """Physical units per normalized wrench unit, fixed by reference params.

    Built from the controller's *reference* vehicle, not the simulated one,
    so that parameter sweeps change the plant without retuning the stack.
    """

    thrust_n: float
    roll_pitch_nm: float
    yaw_nm: float

    @classmethod
    def from_params(cls, ref: VehicleParams) -> "WrenchScale":
        hover = ref.mass * GRAVITY
        return cls(
            thrust_n=2.0 * hover,
            roll_pitch_nm=_C * ref.arm_length * hover,
            yaw_nm=ref.yaw_torque_coefficient / ref.lift_coefficient * hover,
        )

    def to_physical(self, wrench: WrenchAction) -> np.ndarray:
        return np.array(
            [
                wrench.thrust * self.thrust_n,
                wrench.roll_torque * self.roll_pitch_nm,
                wrench.pitch_torque * self.roll_pitch_nm,
                wrench.yaw_torque * self.yaw_nm,
            ]
        )

    def to_normalized(self, physical: np.ndarray) -> WrenchAction:
        return WrenchAction(
            thrust=physical[0] / self.thrust_n,
            roll_torque=physical[1] / self.roll_pitch_nm,
            pitch_torque=physical[2] / self.roll_pitch_nm,
            yaw_torque=physical[3] / self.yaw_nm,
        )


@dataclass
class MixerDiagnostics:
    """Clamping applied while realizing a wrench."""

    negative_clipped: bool = False
    negative_deficit: float = 0.0  # sum of squared-speed demand clipped below zero
    speed_saturated: bool = False

    @property
    def saturated(self) -> bool:
        return self.negative_clipped or self.speed_saturated


def mixer_forward(motor_speeds_squared: np.ndarray) -> np.ndarray:
    """Unitless wrench from squared rotor speeds (diagnostic counterpart)."""
    return MIXER_MATRIX @ np.asarray(motor_speeds_squared, dtype=float)


def mixer_solve(wrench_unitless: np.ndarray) -> np.ndarray:
    """Exact inverse of the allocation matrix, no clamping."""
    return MIXER_INVERSE_MATRIX @ np.asarray(wrench_unitless, dtype=float)


def mixer_inverse(
    wrench: WrenchAction, params: VehicleParams, scale: WrenchScale | None = None
) -> tuple[np.ndarray, MixerDiagnostics]:
    """Rotor speeds in rad/s realizing a normalized wrench.

    De-normalizes the wrench to physical units, solves the allocation
    matrix exactly, clamps negative squared speeds to zero (recording the
    deficit) and caps speeds at the vehicle maximum.
    """
    pipeline = MixerPipeline(params, scale)
    return pipeline.solve(wrench.clamped().as_array())


class MixerPipeline:
    """Normalized wrench to rotor speeds, with the de-normalization and
    matrix inverse fused into one 4x4 map (precomputed per vehicle)."""

    def __init__(self, params: VehicleParams, scale: WrenchScale | None = None):
        if scale is None:
            scale = WrenchScale.from_params(params)
        kf = params.lift_coefficient
        # torque rows of the allocation matrix already carry the factor c,
        # so only lift and arm length divide out of the physical torques
        denorm = np.array(
            [
                scale.thrust_n / kf,
                scale.roll_pitch_nm / (kf * params.arm_length),
                scale.roll_pitch_nm / (kf * params.arm_length),
                scale.yaw_nm / params.yaw_torque_coefficient,
            ]
        )
        self.matrix = MIXER_INVERSE_MATRIX * denorm  # (Minv @ diag(denorm))
        self.max_speed = params.max_motor_speed

    def solve(self, wrench_normalized: np.ndarray) -> tuple[np.ndarray, MixerDiagnostics]:
        """Full solve with clamping diagnostics."""
        squared = self.matrix @ wrench_normalized
        diag = MixerDiagnostics()
        negative = squared < 0.0
        if negative.any():
            diag.negative_clipped = True
            diag.negative_deficit = float(-squared[negative].sum())
            squared = np.where(negative, 0.0, squared)
        speeds = np.sqrt(squared)
        if (speeds > self.max_speed).any():
            diag.speed_saturated = True
            speeds = np.minimum(speeds, self.max_speed)
        return speeds, diag

    def speeds(self, wrench_normalized: np.ndarray) -> np.ndarray:
        """Clamped speeds without diagnostics (per-substep call)."""
        squared = self.matrix @ wrench_normalized
        np.clip(squared, 0.0, None, out=squared)
        out = np.sqrt(squared)
        return np.minimum(out, self.max_speed, out=out)
