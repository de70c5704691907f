"""The residual action path: tanh shift/scale/clip, then motor allocation.

Run:  python demos/04_residual_action_mapping.py
"""

import numpy as np

from gustlab.dynamics import VehicleParams
from gustlab.features import ResidualBounds, combine, map_action
from gustlab.mixer import WrenchAction, mixer_forward, mixer_inverse

bounds = ResidualBounds()
print(f"residual box: +-{bounds.a_max} (thrust, roll, pitch, yaw), "
      f"beta={bounds.beta}, eps={bounds.epsilon}")

# the shift makes the box edges reachable at squashed = +-1 exactly
print("\nsquashed -> residual (thrust channel):")
for v in (-1.0, -0.5, 0.0, 0.5, 1.0):
    a = map_action(np.full(4, v), bounds)
    print(f"  {v:+.1f} -> {a[0]:+.4f}")

# the residual rides on top of the base controller's wrench
a_pid = WrenchAction(thrust=0.5)  # hover feed-forward
a_rl = map_action(np.array([0.6, -0.3, 0.0, 0.0]), bounds)
composed = combine(a_pid, a_rl)
print(f"\nbase wrench: thrust 0.5 (hover), residual {np.round(a_rl, 4)}")
print(f"composed:    thrust {composed.thrust:.4f}, roll {composed.roll_torque:+.4f}")

# allocation: the wrench maps to four rotor speeds and back
params = VehicleParams()
speeds, diag = mixer_inverse(composed, params)
print(f"\nrotor speeds: {np.round(speeds, 1)} rad/s (saturated: {diag.saturated})")
print(f"unitless wrench check M @ w^2: {np.round(mixer_forward(speeds**2), 1)}")
