"""gustlab: desk-scale quadcopter stack with a residual RL wind-rejection layer."""

__version__ = "0.1.0"
