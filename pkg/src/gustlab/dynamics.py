"""Rigid-body quadcopter simulator.

6-DOF dynamics with a quadratic propeller model, first-order motor lag,
quadratic aerodynamic drag against the relative airspeed (which doubles as
the wind forcing), integrated with fixed-step RK4.

Motor layout is an X configuration, numbered so that

    motor 0: rear-right,  spins so its reaction torque is +yaw
    motor 1: front-left,  +yaw
    motor 2: rear-left,   -yaw
    motor 3: front-right, -yaw

which makes the thrust/torque allocation rows carry the sign pattern
(1,1,1,1), (-c,c,c,-c), (c,-c,c,-c), (1,1,-1,-1) with c = 1/sqrt(2)
(see gustlab.mixer). Body frame: x forward, y left, z up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import attitude

GRAVITY = 9.81  # m/s^2
AIR_DENSITY = 1.225  # kg/m^3

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# Sweep multipliers outside this range are rejected.
SCALE_RANGE = (0.25, 2.0)


class NonFiniteState(RuntimeError):
    """Integration produced a non-finite state; the episode must terminate."""


@dataclass
class VehicleParams:
    """Physical parameters of the simulated vehicle.

    ``lift_coefficient`` maps squared rotor speed to thrust per rotor;
    ``yaw_torque_coefficient`` maps squared rotor speed to reaction torque.
    ``linear_drag_area`` is the effective drag area (C_d * A) per body axis.
    """

    mass: float = 3.53  # kg
    inertia_diag: np.ndarray = field(default_factory=lambda: np.array([0.12, 0.12, 0.20]))  # kg m^2
    arm_length: float = 0.33  # m, hub to motor
    lift_coefficient: float = 2.4048125e-05  # N/(rad/s)^2, hover at 60% max speed
    yaw_torque_coefficient: float = 4.0e-07  # N m/(rad/s)^2
    linear_drag_area: np.ndarray = field(default_factory=lambda: np.array([0.055, 0.055, 0.08]))  # m^2
    motor_time_constant: float = 0.02  # s
    max_motor_speed: float = 1000.0  # rad/s

    def __post_init__(self) -> None:
        self.inertia_diag = np.asarray(self.inertia_diag, dtype=float)
        self.linear_drag_area = np.asarray(self.linear_drag_area, dtype=float)
        scalars = (
            self.mass,
            self.arm_length,
            self.lift_coefficient,
            self.yaw_torque_coefficient,
            self.motor_time_constant,
            self.max_motor_speed,
        )
        if any(s <= 0.0 for s in scalars) or (self.inertia_diag <= 0.0).any() or (self.linear_drag_area <= 0.0).any():
            raise ValueError("all vehicle parameters must be strictly positive")

    def scaled(self, mass_scale: float = 1.0, lift_scale: float = 1.0) -> "VehicleParams":
        """Vehicle with mass and lift coefficient multiplied for robustness sweeps."""
        lo, hi = SCALE_RANGE
        for s in (mass_scale, lift_scale):
            if not (lo <= s <= hi):
                raise ValueError(f"sweep multiplier {s} outside [{lo}, {hi}]")
        return replace(
            self,
            mass=self.mass * mass_scale,
            lift_coefficient=self.lift_coefficient * lift_scale,
            inertia_diag=self.inertia_diag.copy(),
            linear_drag_area=self.linear_drag_area.copy(),
        )

    @property
    def hover_speed(self) -> float:
        """Rotor speed at which four rotors balance gravity, rad/s."""
        return math.sqrt(self.mass * GRAVITY / (4.0 * self.lift_coefficient))

    @property
    def hover_thrust(self) -> float:
        return self.mass * GRAVITY


@dataclass
class QuadState:
    """Full vehicle state: pose, twist and rotor speeds.

    position/velocity are world frame; orientation is a body-to-world unit
    quaternion [w,x,y,z]; angular_velocity is body frame.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: attitude.IDENTITY.copy())
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    motor_speeds: np.ndarray = field(default_factory=lambda: np.zeros(4))

    @classmethod
    def hover(cls, params: VehicleParams, position: np.ndarray | None = None, yaw: float = 0.0) -> "QuadState":
        pos = np.zeros(3) if position is None else np.asarray(position, dtype=float).copy()
        return cls(
            position=pos,
            orientation=attitude.from_yaw(yaw),
            motor_speeds=np.full(4, params.hover_speed),
        )

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.position, self.velocity, self.orientation, self.angular_velocity, self.motor_speeds]
        )

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "QuadState":
        return cls(
            position=y[0:3].copy(),
            velocity=y[3:6].copy(),
            orientation=y[6:10].copy(),
            angular_velocity=y[10:13].copy(),
            motor_speeds=y[13:17].copy(),
        )

    @classmethod
    def view(cls, y: np.ndarray) -> "QuadState":
        """Non-copying view over a flat state vector (hot-path helper)."""
        return cls(
            position=y[0:3],
            velocity=y[3:6],
            orientation=y[6:10],
            angular_velocity=y[10:13],
            motor_speeds=y[13:17],
        )

    def copy(self) -> "QuadState":
        return QuadState.from_vector(self.as_vector())


@dataclass
class WindState:
    """Steady wind: unit direction (world frame) and speed in m/s."""

    direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    speed: float = 0.0

    def __post_init__(self) -> None:
        self.direction = np.asarray(self.direction, dtype=float)
        if self.speed < 0.0:
            raise ValueError("wind speed must be nonnegative")
        if self.speed > 0.0 and abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise ValueError("wind direction must be a unit vector when speed > 0")

    @classmethod
    def calm(cls) -> "WindState":
        return cls(speed=0.0)

    @property
    def velocity(self) -> np.ndarray:
        return self.direction * self.speed


def propeller_wrench(motor_speeds: np.ndarray, params: VehicleParams) -> tuple[float, np.ndarray]:
    """Thrust [N] along body +z and body torques [N m] from rotor speeds."""
    u0, u1, u2, u3 = (w * w for w in motor_speeds)
    kf = params.lift_coefficient
    km = params.yaw_torque_coefficient
    lever = params.arm_length * _INV_SQRT2
    thrust = kf * (u0 + u1 + u2 + u3)
    torque = np.array(
        [
            kf * lever * (-u0 + u1 + u2 - u3),
            kf * lever * (u0 - u1 + u2 - u3),
            km * (u0 + u1 - u2 - u3),
        ]
    )
    return thrust, torque


def wind_force(state: QuadState, wind: WindState, params: VehicleParams) -> np.ndarray:
    """Quadratic drag on the relative airspeed, returned in the world frame.

    The relative velocity is expressed in the body frame, each axis sees
    0.5 * rho * area_i * |v_i| * v_i, and the result is rotated back.
    """
    v_rel_world = wind.velocity - state.velocity
    v_rel = attitude.rotate_inverse(state.orientation, v_rel_world)
    f_body = 0.5 * AIR_DENSITY * params.linear_drag_area * np.abs(v_rel) * v_rel
    return attitude.rotate(state.orientation, f_body)


def derivative_constants(params: VehicleParams) -> tuple:
    """Precomputed scalar constants consumed by the state derivative."""
    ix, iy, iz = params.inertia_diag
    a = params.linear_drag_area
    return (
        params.lift_coefficient,
        params.lift_coefficient * params.arm_length * _INV_SQRT2,
        params.yaw_torque_coefficient,
        0.5 * AIR_DENSITY * a[0],
        0.5 * AIR_DENSITY * a[1],
        0.5 * AIR_DENSITY * a[2],
        1.0 / params.mass,
        ix, iy, iz,
        1.0 / params.motor_time_constant,
    )


def _derivative(y: np.ndarray, cmd: np.ndarray, wind_vel: np.ndarray, c: tuple) -> np.ndarray:
    kf, kf_lever, km, ha0, ha1, ha2, inv_m, ix, iy, iz, inv_tau = c
    vx, vy, vz = y[3], y[4], y[5]
    qw, qx, qy, qz = y[6], y[7], y[8], y[9]
    wx, wy, wz = y[10], y[11], y[12]
    m0, m1, m2, m3 = y[13], y[14], y[15], y[16]

    u0, u1, u2, u3 = m0 * m0, m1 * m1, m2 * m2, m3 * m3
    thrust = kf * (u0 + u1 + u2 + u3)
    tau_x = kf_lever * (-u0 + u1 + u2 - u3)
    tau_y = kf_lever * (u0 - u1 + u2 - u3)
    tau_z = km * (u0 + u1 - u2 - u3)

    # rotation matrix entries from the quaternion
    r00 = 1.0 - 2.0 * (qy * qy + qz * qz)
    r01 = 2.0 * (qx * qy - qw * qz)
    r02 = 2.0 * (qx * qz + qw * qy)
    r10 = 2.0 * (qx * qy + qw * qz)
    r11 = 1.0 - 2.0 * (qx * qx + qz * qz)
    r12 = 2.0 * (qy * qz - qw * qx)
    r20 = 2.0 * (qx * qz - qw * qy)
    r21 = 2.0 * (qy * qz + qw * qx)
    r22 = 1.0 - 2.0 * (qx * qx + qy * qy)

    # drag on relative airspeed, evaluated per body axis
    rxw = wind_vel[0] - vx
    ryw = wind_vel[1] - vy
    rzw = wind_vel[2] - vz
    rbx = r00 * rxw + r10 * ryw + r20 * rzw
    rby = r01 * rxw + r11 * ryw + r21 * rzw
    rbz = r02 * rxw + r12 * ryw + r22 * rzw
    fbx = ha0 * abs(rbx) * rbx
    fby = ha1 * abs(rby) * rby
    fbz = ha2 * abs(rbz) * rbz + thrust

    ax = (r00 * fbx + r01 * fby + r02 * fbz) * inv_m
    ay = (r10 * fbx + r11 * fby + r12 * fbz) * inv_m
    az = (r20 * fbx + r21 * fby + r22 * fbz) * inv_m - GRAVITY

    # quaternion kinematics: qdot = 0.5 * q ⊗ (0, omega)
    qdw = 0.5 * (-qx * wx - qy * wy - qz * wz)
    qdx = 0.5 * (qw * wx + qy * wz - qz * wy)
    qdy = 0.5 * (qw * wy + qz * wx - qx * wz)
    qdz = 0.5 * (qw * wz + qx * wy - qy * wx)

    wdx = (tau_x - (iz - iy) * wy * wz) / ix
    wdy = (tau_y - (ix - iz) * wz * wx) / iy
    wdz = (tau_z - (iy - ix) * wx * wy) / iz

    return np.array(
        [
            vx, vy, vz,
            ax, ay, az,
            qdw, qdx, qdy, qdz,
            wdx, wdy, wdz,
            (cmd[0] - m0) * inv_tau,
            (cmd[1] - m1) * inv_tau,
            (cmd[2] - m2) * inv_tau,
            (cmd[3] - m3) * inv_tau,
        ]
    )


def step_vector(
    y: np.ndarray,
    cmd: np.ndarray,
    wind_vel: np.ndarray,
    params: VehicleParams,
    dt: float,
    consts: tuple | None = None,
) -> np.ndarray:
    """RK4 step on the flat 17-component state vector (hot path).

    Callers stepping in a loop should precompute consts once with
    derivative_constants(params).
    """
    c = consts if consts is not None else derivative_constants(params)
    k1 = _derivative(y, cmd, wind_vel, c)
    k2 = _derivative(y + (0.5 * dt) * k1, cmd, wind_vel, c)
    k3 = _derivative(y + (0.5 * dt) * k2, cmd, wind_vel, c)
    k4 = _derivative(y + dt * k3, cmd, wind_vel, c)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    qn = math.sqrt(out[6] * out[6] + out[7] * out[7] + out[8] * out[8] + out[9] * out[9])
    out[6:10] /= qn
    np.clip(out[13:17], 0.0, params.max_motor_speed, out=out[13:17])

    if not np.isfinite(out).all():
        raise NonFiniteState("state became non-finite during integration")
    return out


def step(
    state: QuadState,
    commanded_speeds: np.ndarray,
    wind: WindState,
    params: VehicleParams,
    dt: float,
) -> QuadState:
    """Advance the vehicle by dt seconds under fixed motor commands and wind.

    Motor speeds follow a first-order lag toward ``commanded_speeds``
    (clipped into [0, max_motor_speed]); the quaternion is renormalized
    after the step. Raises NonFiniteState if integration blows up.
    """
    if not (0.0 < dt <= 0.002):
        raise ValueError("dt must be in (0, 0.002] seconds")
    cmd = np.clip(np.asarray(commanded_speeds, dtype=float), 0.0, params.max_motor_speed)
    y = step_vector(state.as_vector(), cmd, wind.velocity, params, dt)
    return QuadState.from_vector(y)
