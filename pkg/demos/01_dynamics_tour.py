"""Tour of the rigid-body simulator: hover balance, free fall, gust drag.

Run:  python demos/01_dynamics_tour.py
"""

import numpy as np

from gustlab.dynamics import QuadState, VehicleParams, WindState, propeller_wrench, step, wind_force

params = VehicleParams()
print(f"vehicle: {params.mass} kg, hover at {params.hover_speed:.1f} rad/s "
      f"({params.hover_speed / params.max_motor_speed:.0%} of max speed)")

# 1. hover: four rotors at hover speed exactly balance gravity
thrust, torque = propeller_wrench(np.full(4, params.hover_speed), params)
print(f"hover thrust {thrust:.3f} N vs weight {params.hover_thrust:.3f} N, torques {torque}")

state = QuadState.hover(params, position=np.array([0.0, 0.0, 2.0]))
for _ in range(1000):  # one second
    state = step(state, np.full(4, params.hover_speed), WindState.calm(), params, 0.001)
print(f"after 1 s of perfect hover the position moved {np.linalg.norm(state.position - [0, 0, 2]):.2e} m")

# 2. free fall: motors off, the vehicle accelerates at -g (minus drag)
state = QuadState(position=np.array([0.0, 0.0, 50.0]))
for _ in range(1000):
    state = step(state, np.zeros(4), WindState.calm(), params, 0.001)
print(f"after 1 s of free fall: altitude {state.position[2]:.2f} m, vertical speed {state.velocity[2]:.2f} m/s")

# 3. a 20 m/s side wind shoves a hovering vehicle with quadratic drag
wind = WindState(direction=np.array([1.0, 0.0, 0.0]), speed=20.0)
f = wind_force(QuadState(), wind, params)
print(f"20 m/s headwind force on a level vehicle: {f[0]:.1f} N "
      f"({f[0] / params.hover_thrust:.0%} of vehicle weight)")

state = QuadState.hover(params, position=np.array([0.0, 0.0, 2.0]))
for _ in range(2000):
    state = step(state, np.full(4, params.hover_speed), wind, params, 0.001)
print(f"uncontrolled, that wind drags the vehicle {state.position[0]:.1f} m downwind in 2 s")
