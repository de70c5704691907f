"""Cascaded PID flight controller.

Four nested loops in the PX4 style: position P feeding a velocity PID
(both 100 Hz), an attitude P loop (250 Hz) and an angular-rate PID
(1000 Hz). The output is a normalized WrenchAction; derivative terms act
on measurements (no setpoint kick) and integrators use clamping
anti-windup. The controller is built against a *reference* vehicle, so a
perturbed plant (robustness sweeps) does not silently retune it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import attitude
from .dynamics import GRAVITY, QuadState, VehicleParams
from .mixer import WrenchAction

POSITION_RATE_HZ = 100.0
ATTITUDE_RATE_HZ = 250.0
RATE_RATE_HZ = 1000.0


@dataclass
class TargetPose:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)


@dataclass
class LoopTicks:
    """Which cascade stages update on this call (multi-rate scheduling)."""

    position: bool = True
    attitude: bool = True
    rate: bool = True

    @classmethod
    def for_substep(cls, n: int) -> "LoopTicks":
        """Ticks for global 1 kHz substep index n (100/250/1000 Hz nesting)."""
        return cls(position=n % 10 == 0, attitude=n % 4 == 0, rate=True)


@dataclass
class PidGains:
    """Gains and per-loop limits of the cascade.

    Units: pos_p maps meters to m/s setpoints; vel_* map m/s to m/s^2;
    att_p maps radians to rad/s setpoints; rate_* map rad/s to normalized
    torque. Limits clamp each stage's output and integrator.
    """

    pos_p: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.8, 1.1]))
    vel_p: np.ndarray = field(default_factory=lambda: np.array([2.2, 2.2, 3.5]))
    vel_i: np.ndarray = field(default_factory=lambda: np.array([0.6, 0.6, 1.5]))
    vel_d: np.ndarray = field(default_factory=lambda: np.array([0.12, 0.12, 0.0]))
    att_p: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 3.0]))
    rate_p: np.ndarray = field(default_factory=lambda: np.array([0.20, 0.20, 0.40]))
    rate_i: np.ndarray = field(default_factory=lambda: np.array([0.05, 0.05, 0.10]))
    rate_d: np.ndarray = field(default_factory=lambda: np.array([0.0015, 0.0015, 0.0]))
    vel_limit: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 4.0]))
    accel_limit: np.ndarray = field(default_factory=lambda: np.array([8.0, 8.0, 14.0]))
    vel_int_limit: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 5.0]))
    rate_sp_limit: np.ndarray = field(default_factory=lambda: np.array([3.5, 3.5, 1.5]))
    rate_int_limit: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.25, 0.25]))
    torque_limit: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0]))
    tilt_limit: float = math.radians(40.0)

    _VECTORS = (
        "pos_p", "vel_p", "vel_i", "vel_d", "att_p", "rate_p", "rate_i", "rate_d",
        "vel_limit", "accel_limit", "vel_int_limit", "rate_sp_limit",
        "rate_int_limit", "torque_limit",
    )

    def __post_init__(self) -> None:
        for name in self._VECTORS:
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.isfinite(v).all():
                raise ValueError(f"gain {name} must be a finite 3-vector")
            setattr(self, name, v)
        limits = np.concatenate([self.vel_int_limit, self.rate_int_limit])
        if (limits <= 0.0).any():
            raise ValueError("integrator limits must be positive")
        if (self.torque_limit > 1.0).any():
            raise ValueError("torque_limit must stay within the normalized wrench box")

    def as_dict(self) -> dict:
        d = {name: getattr(self, name).tolist() for name in self._VECTORS}
        d["tilt_limit_deg"] = math.degrees(self.tilt_limit)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PidGains":
        kwargs = {k: np.asarray(v, dtype=float) for k, v in d.items() if k in cls._VECTORS}
        if "tilt_limit_deg" in d:
            kwargs["tilt_limit"] = math.radians(float(d["tilt_limit_deg"]))
        return cls(**kwargs)


def _attitude_setpoint(thrust_dir: np.ndarray, yaw: float) -> np.ndarray:
    """Quaternion whose body z axis is thrust_dir at the given heading."""
    fx, fy, fz = thrust_dir
    fn = math.sqrt(fx * fx + fy * fy + fz * fz)
    b3 = np.array([fx / fn, fy / fn, fz / fn])
    cy, sy = math.cos(yaw), math.sin(yaw)
    # y_b = b3 x heading, x_b = y_b x b3 (hand-rolled 3-vector crosses)
    yb0 = b3[1] * 0.0 - b3[2] * sy
    yb1 = b3[2] * cy - b3[0] * 0.0
    yb2 = b3[0] * sy - b3[1] * cy
    n = math.sqrt(yb0 * yb0 + yb1 * yb1 + yb2 * yb2)
    if n < 1e-6:
        # thrust nearly along the heading: fall back to the yaw-frame y axis
        y_b = np.array([-sy, cy, 0.0])
    else:
        y_b = np.array([yb0 / n, yb1 / n, yb2 / n])
    x_b = np.array(
        [
            y_b[1] * b3[2] - y_b[2] * b3[1],
            y_b[2] * b3[0] - y_b[0] * b3[2],
            y_b[0] * b3[1] - y_b[1] * b3[0],
        ]
    )
    return attitude.from_rotation_matrix(np.column_stack([x_b, y_b, b3]))


class CascadePid:
    """Multi-rate cascade holding its own integrator/latch state.

    One instance is owned by exactly one rollout; call reset() at episode
    start and step() once per 1 kHz substep with the matching LoopTicks.
    """

    def __init__(self, gains: PidGains, reference: VehicleParams, target: TargetPose):
        self.gains = gains
        self.reference = reference
        self.target = target
        self._hover_thrust_norm = 0.5  # reference hover over the 2x-hover scale
        self.reset()

    def reset(self, state: QuadState | None = None) -> None:
        g = self.gains
        self._vel_int = np.zeros(3)
        self._rate_int = np.zeros(3)
        self._prev_vel = state.velocity.copy() if state is not None else np.zeros(3)
        self._prev_rate = state.angular_velocity.copy() if state is not None else np.zeros(3)
        self._att_sp = attitude.from_yaw(self.target.yaw)
        self._rate_sp = np.zeros(3)
        self._thrust_norm = self._hover_thrust_norm
        self._torque = np.zeros(3)

    @property
    def wrench(self) -> WrenchAction:
        return WrenchAction.from_array(self.wrench_array())

    def wrench_array(self) -> np.ndarray:
        """Latched output as [thrust, roll, pitch, yaw], already clamped.

        Thrust is clamped inside the position loop and the rate loop
        clamps torques at +-torque_limit <= 1, so no extra work is needed
        beyond assembling the vector.
        """
        t = self._torque
        return np.array([self._thrust_norm, t[0], t[1], t[2]])

    def step(self, state: QuadState, ticks: LoopTicks) -> WrenchAction:
        if ticks.position:
            self._position_velocity_loop(state, 1.0 / POSITION_RATE_HZ)
        if ticks.attitude:
            self._attitude_loop(state)
        if ticks.rate:
            self._rate_loop(state, 1.0 / RATE_RATE_HZ)
        return self.wrench

    def _position_velocity_loop(self, state: QuadState, dt: float) -> None:
        g = self.gains
        vel_sp = g.pos_p * (self.target.position - state.position)
        vel_sp = np.clip(vel_sp, -g.vel_limit, g.vel_limit)

        vel_err = vel_sp - state.velocity
        accel_meas = (state.velocity - self._prev_vel) / dt
        self._prev_vel = state.velocity.copy()

        self._vel_int = np.clip(self._vel_int + g.vel_i * vel_err * dt, -g.vel_int_limit, g.vel_int_limit)
        accel_cmd = np.clip(
            g.vel_p * vel_err + self._vel_int - g.vel_d * accel_meas,
            -g.accel_limit,
            g.accel_limit,
        )

        force = self.reference.mass * (accel_cmd + np.array([0.0, 0.0, GRAVITY]))
        # keep the thrust vector pointing up and inside the tilt cone
        fz = max(force[2], 0.1 * self.reference.mass * GRAVITY)
        horiz = math.hypot(force[0], force[1])
        max_horiz = fz * math.tan(self.gains.tilt_limit)
        if horiz > max_horiz:
            force[0] *= max_horiz / horiz
            force[1] *= max_horiz / horiz
        force[2] = fz

        thrust_n = float(np.linalg.norm(force))
        self._thrust_norm = min(1.0, thrust_n / (2.0 * self.reference.mass * GRAVITY))
        self._att_sp = _attitude_setpoint(force, self.target.yaw)

    def _attitude_loop(self, state: QuadState) -> None:
        g = self.gains
        q_err = attitude.multiply(attitude.conjugate(state.orientation), self._att_sp)
        if q_err[0] < 0.0:
            q_err = -q_err
        axis = q_err[1:4]
        s = np.linalg.norm(axis)
        if s < 1e-12:
            angle_vec = np.zeros(3)
        else:
            angle_vec = axis / s * (2.0 * math.atan2(s, q_err[0]))
        self._rate_sp = np.clip(g.att_p * angle_vec, -g.rate_sp_limit, g.rate_sp_limit)

    def _rate_loop(self, state: QuadState, dt: float) -> None:
        # runs every 1 kHz substep: scalar math keeps it off the numpy
        # dispatch overhead, same formulas as the vector loops above
        g = self.gains
        sp = self._rate_sp
        w = state.angular_velocity
        prev = self._prev_rate
        integ = self._rate_int
        torque = self._torque
        for i in range(3):
            err = sp[i] - w[i]
            meas = (w[i] - prev[i]) / dt
            prev[i] = w[i]
            acc = integ[i] + g.rate_i[i] * err * dt
            lim = g.rate_int_limit[i]
            integ[i] = -lim if acc < -lim else (lim if acc > lim else acc)
            t = g.rate_p[i] * err + integ[i] - g.rate_d[i] * meas
            lim = g.torque_limit[i]
            torque[i] = -lim if t < -lim else (lim if t > lim else t)


def step_response(
    gains: PidGains,
    params: VehicleParams,
    axis: int = 0,
    amplitude: float = 1.0,
    duration_s: float = 8.0,
    csv_path=None,
):
    """Closed-loop setpoint-step diagnostic for a gain set.

    Flies the cascade against the rigid-body model from hover toward a
    target offset by `amplitude` meters along `axis`. Returns
    (times, position_errors (n,3), wrenches (n,4)) sampled at 100 Hz and
    optionally writes them as CSV.
    """
    from .dynamics import QuadState, derivative_constants, step_vector
    from .mixer import MixerPipeline

    start = np.array([0.0, 0.0, 2.0])
    offset = np.zeros(3)
    offset[axis] = amplitude
    pid = CascadePid(gains, params, TargetPose(position=start + offset))
    pipeline = MixerPipeline(params)
    consts = derivative_constants(params)
    state = QuadState.hover(params, position=start.copy())
    pid.reset(state)
    y = state.as_vector()
    times, errors, wrenches = [], [], []
    for n in range(round(duration_s * RATE_RATE_HZ)):
        pid.step(QuadState.view(y), LoopTicks.for_substep(n))
        wrench = pid.wrench_array()
        y = step_vector(y, pipeline.speeds(wrench), np.zeros(3), params, 1.0 / RATE_RATE_HZ, consts)
        if n % 10 == 0:
            times.append(n / RATE_RATE_HZ)
            errors.append(y[0:3] - pid.target.position)
            wrenches.append(wrench)
    times = np.asarray(times)
    errors = np.asarray(errors)
    wrenches = np.asarray(wrenches)
    if csv_path is not None:
        with open(csv_path, "w") as f:
            f.write("time_s,err_x,err_y,err_z,thrust,roll_torque,pitch_torque,yaw_torque\n")
            for t, e, w in zip(times, errors, wrenches):
                row = [t, *e, *w]
                f.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return times, errors, wrenches
