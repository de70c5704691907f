"""Closed-loop step response of the cascaded PID stack, with a plot.

Run:  python demos/02_pid_step_response.py [out.png]
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gustlab.dynamics import QuadState, VehicleParams, WindState, derivative_constants, step_vector
from gustlab.mixer import MixerPipeline
from gustlab.pid import CascadePid, LoopTicks, PidGains, TargetPose

params = VehicleParams()
target = TargetPose(position=np.array([1.0, 0.0, 2.0]))  # one meter sideways
pid = CascadePid(PidGains(), params, target)
pipeline = MixerPipeline(params)
consts = derivative_constants(params)

state = QuadState.hover(params, position=np.array([0.0, 0.0, 2.0]))
pid.reset(state)
y = state.as_vector()

times, err_x, thrust = [], [], []
for n in range(6000):  # six seconds at 1 kHz
    pid.step(QuadState.view(y), LoopTicks.for_substep(n))
    wrench = pid.wrench_array()
    y = step_vector(y, pipeline.speeds(wrench), WindState.calm().velocity, params, 0.001, consts)
    if n % 10 == 0:
        times.append(n * 0.001)
        err_x.append(y[0] - 1.0)
        thrust.append(wrench[0])

err_x = np.asarray(err_x)
settle = next(t for t, i in zip(times, range(len(times))) if (np.abs(err_x[i:]) <= 0.05).all())
print(f"1 m lateral step: settles within 5% at t = {settle:.2f} s, "
      f"overshoot {max(0.0, err_x.max()):.3f} m, final error {abs(err_x[-1])*1000:.1f} mm")

fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
axes[0].plot(times, 1.0 + err_x)
axes[0].axhline(1.0, ls="--", color="gray", lw=0.8)
axes[0].set_ylabel("x position [m]")
axes[1].plot(times, thrust)
axes[1].set_ylabel("normalized thrust")
axes[1].set_xlabel("time [s]")
for ax in axes:
    ax.grid(alpha=0.3)
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else "step_response.png"
fig.savefig(out, dpi=120)
print(f"plot written to {out}")
