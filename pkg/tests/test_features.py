import math

import numpy as np
import pytest

from gustlab import attitude
from gustlab.dynamics import QuadState, VehicleParams
from gustlab.features import (
    ANGULAR_VELOCITY_SLICE,
    OBS_DIM,
    PID_OUTPUT_SLICE,
    POSITION_SLICE,
    RL_OUTPUT_SLICE,
    FeatureScales,
    Featurizer,
    NoiseScales,
    ResidualBounds,
    combine,
    inject_noise,
    map_action,
    noise_profile,
)
from gustlab.mixer import WrenchAction
from gustlab.pid import TargetPose

A_MAX = np.array([0.25, 0.1, 0.1, 0.1])


class TestMapAction:
    def test_zero_maps_to_zero_exactly(self):
        out = map_action(np.zeros(4), ResidualBounds())
        assert (out == 0.0).all()

    def test_plus_one_saturates_to_a_max_exactly(self):
        out = map_action(np.ones(4), ResidualBounds())
        np.testing.assert_array_equal(out, A_MAX)

    def test_minus_one_saturates_to_a_min_exactly(self):
        out = map_action(-np.ones(4), ResidualBounds())
        np.testing.assert_array_equal(out, -A_MAX)

    def test_componentwise_nondecreasing(self, rng):
        bounds = ResidualBounds()
        prev = map_action(-np.ones(4), bounds)
        for v in np.linspace(-1.0, 1.0, 201):
            cur = map_action(np.full(4, v), bounds)
            assert (cur >= prev - 1e-15).all()
            prev = cur

    def test_range_covers_box_only(self, rng):
        bounds = ResidualBounds()
        for _ in range(500):
            a = map_action(rng.uniform(-1.0, 1.0, size=4), bounds)
            assert (a >= -A_MAX).all() and (a <= A_MAX).all()

    def test_midscale_value(self):
        # squashed 0.5: shifted 0.8, scaled 0.3*2*a_max - a_max = 0.6*a_max
        out = map_action(np.full(4, 0.5), ResidualBounds())
        np.testing.assert_allclose(out, 0.6 * A_MAX, atol=1e-12)


class TestCombine:
    def test_zero_residual_is_identity(self):
        a_pid = WrenchAction(0.47, -0.1, 0.22, 0.05)
        out = combine(a_pid, np.zeros(4))
        assert out == a_pid

    def test_thrust_clamped_at_one(self):
        out = combine(WrenchAction(thrust=0.9), np.array([0.25, 0, 0, 0]))
        assert out.thrust == 1.0

    def test_componentwise_sum(self):
        a_pid = WrenchAction(0.5, 0.0, 0.0, 0.0)
        out = combine(a_pid, np.array([0.1, 0.0, 0.0, 0.0]))
        assert out.thrust == pytest.approx(0.6)
        assert out.roll_torque == 0.0
        assert out.pitch_torque == 0.0
        assert out.yaw_torque == 0.0


class TestFeaturizer:
    def make(self):
        target = TargetPose(position=np.array([0.0, 0.0, 2.0]))
        return Featurizer(target), target

    def test_zero_observation_at_target_at_rest(self):
        feat, target = self.make()
        params = VehicleParams()
        state = QuadState.hover(params, position=target.position.copy())
        feat.push(state, WrenchAction(), np.zeros(4))
        obs = feat.observation()
        assert obs.shape == (OBS_DIM,)
        np.testing.assert_array_equal(obs, np.zeros(OBS_DIM))

    def test_length_68_at_every_fill_level(self, rng):
        feat, target = self.make()
        params = VehicleParams()
        for k in range(8):
            assert feat.observation().shape == (OBS_DIM,)
            state = QuadState.hover(params, position=target.position + rng.normal(size=3))
            feat.push(state, WrenchAction(thrust=0.5), rng.uniform(-0.1, 0.1, 4))

    def test_older_slots_zero_padded_after_one_push(self):
        feat, target = self.make()
        state = QuadState(position=target.position + np.array([1.0, 0.0, 0.0]))
        feat.push(state, WrenchAction(thrust=0.5), np.zeros(4))
        obs = feat.observation()
        pos = obs[POSITION_SLICE].reshape(3, 3)
        assert pos[0, 0] == pytest.approx(1.0 / 5.0)
        np.testing.assert_array_equal(pos[1:], 0.0)
        pid = obs[PID_OUTPUT_SLICE].reshape(3, 4)
        assert pid[0, 0] == 0.5
        np.testing.assert_array_equal(pid[1:], 0.0)

    def test_most_recent_first_ordering(self):
        feat, target = self.make()
        for k in (1.0, 2.0, 3.0, 4.0):
            state = QuadState(position=target.position + np.array([k, 0.0, 0.0]))
            feat.push(state, WrenchAction(), np.zeros(4))
        pos = feat.observation()[POSITION_SLICE].reshape(3, 3)
        np.testing.assert_allclose(pos[:, 0], np.array([4.0, 3.0, 2.0]) / 5.0)

    def test_relative_angle_zero_at_level_target_yaw(self):
        target = TargetPose(position=np.zeros(3), yaw=0.7)
        feat = Featurizer(target)
        state = QuadState(orientation=attitude.from_yaw(0.7))
        feat.push(state, WrenchAction(), np.zeros(4))
        obs = feat.observation()
        np.testing.assert_allclose(obs[18:27], 0.0, atol=1e-12)

    def test_clamp_applies(self):
        feat, target = self.make()
        state = QuadState(position=target.position + np.array([1e4, 0.0, 0.0]))
        feat.push(state, WrenchAction(), np.zeros(4))
        obs = feat.observation()
        assert obs.max() <= 10.0
        assert obs[0] == 10.0


class TestInjectNoise:
    def test_rl_slots_bit_identical(self, rng):
        amp = noise_profile(FeatureScales())
        obs = rng.normal(size=(32, OBS_DIM))
        noisy = inject_noise(obs, rng, amp)
        np.testing.assert_array_equal(noisy[:, RL_OUTPUT_SLICE], obs[:, RL_OUTPUT_SLICE])
        assert not np.array_equal(noisy[:, POSITION_SLICE], obs[:, POSITION_SLICE])

    def test_zero_noise_rng_leaves_batch_unchanged(self, rng):
        class ZeroRng:
            def uniform(self, lo, hi, size):
                return np.zeros(size)

        amp = noise_profile(FeatureScales())
        obs = rng.normal(size=(4, OBS_DIM))
        noisy = inject_noise(obs, ZeroRng(), amp)
        np.testing.assert_array_equal(noisy, obs)

    def test_raw_unit_scales_respected(self, rng):
        scales = FeatureScales()
        amp = noise_profile(scales)
        obs = np.zeros((5000, OBS_DIM))
        noisy = inject_noise(obs, rng, amp)
        delta = np.abs(noisy - obs)
        # per-group max perturbation in raw units stays within the scales
        raw = {
            "position": delta[:, POSITION_SLICE] * scales.position_m,
            "velocity": delta[:, 9:18] * scales.velocity_mps,
            "angle": delta[:, 18:27] * scales.angle_rad,
            "angular_velocity": delta[:, ANGULAR_VELOCITY_SLICE] * scales.angular_velocity_radps,
            "pid": delta[:, PID_OUTPUT_SLICE],
        }
        limits = {"position": 0.1, "velocity": 0.5, "angle": 0.05, "angular_velocity": 1.25, "pid": 0.1}
        for name, d in raw.items():
            assert d.max() <= limits[name] + 1e-12
            assert d.max() > 0.9 * limits[name]  # noise actually fills the band

    def test_noise_is_uniform_half_open(self, rng):
        amp = noise_profile(FeatureScales())
        obs = np.zeros((20000, OBS_DIM))
        noisy = inject_noise(obs, rng, amp)
        ang = noisy[:, ANGULAR_VELOCITY_SLICE] * (2.0 * math.pi) / 1.25
        assert ang.min() >= -1.0
        assert ang.max() < 1.0
        assert abs(ang.mean()) < 0.01


class TestBounds:
    def test_a_min_is_negated_a_max(self):
        b = ResidualBounds()
        np.testing.assert_array_equal(b.a_min, -b.a_max)

    def test_positive_a_max_required(self):
        with pytest.raises(ValueError):
            ResidualBounds(a_max=np.array([0.1, -0.1, 0.1, 0.1]))
