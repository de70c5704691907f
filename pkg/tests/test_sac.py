import math

import numpy as np
import pytest

from gustlab.nn import IDENTITY, Layer, MlpParams
from gustlab.sac import (
    ReplayBuffer,
    ReplayUnderflow,
    SacConfig,
    SacState,
    Transition,
    actor_loss_and_grads,
    alpha_loss_and_grad,
    critic_loss_and_grads,
    critic_target,
    polyak_update,
    sac_update,
    sample_action,
    squashed_log_prob,
    tanh_gaussian_log_density,
)


def normal_cdf(t):
    return 0.5 * (1.0 + math.erf(t / math.sqrt(2.0)))


def mini_sac(rng, **cfg_kwargs) -> SacState:
    cfg = SacConfig(**cfg_kwargs)
    return SacState.create(
        rng, obs_dim=4, action_dim=4, actor_hidden=(8, 8), critic_hidden=(8, 8), config=cfg,
        actor_final_scale=1.0,
    )


def fill_replay(rng, n=300, obs_dim=4):
    replay = ReplayBuffer(capacity=10_000, obs_dim=obs_dim, action_dim=4)
    for _ in range(n):
        replay.push(
            Transition(
                observation=rng.normal(size=obs_dim),
                action_presquash=rng.normal(size=4),
                reward=float(rng.normal()),
                next_observation=rng.normal(size=obs_dim),
                done=bool(rng.uniform() < 0.05),
            )
        )
    return replay


def constant_critic(in_dim: int, q: float) -> MlpParams:
    return MlpParams([Layer(np.zeros((1, in_dim)), np.array([q]), IDENTITY)])


class TestSampleAction:
    def test_deterministic_repeatable(self, rng):
        sac = mini_sac(rng)
        obs = rng.normal(size=4)
        a1 = sample_action(sac.actor, obs, "deterministic")
        a2 = sample_action(sac.actor, obs, "deterministic")
        np.testing.assert_array_equal(a1[0], a2[0])
        np.testing.assert_array_equal(a1[1], a2[1])
        assert a1[2] == a2[2]

    def test_squashed_in_open_interval(self, rng):
        sac = mini_sac(rng)
        for _ in range(50):
            _, squashed, _ = sample_action(sac.actor, rng.normal(size=4) * 5, "stochastic", rng)
            assert (np.abs(squashed) < 1.0).all()

    def test_log_prob_matches_cdf_oracle(self, rng):
        # 1-D cross-section: finite difference of the exact squashed CDF
        for _ in range(20):
            mu = float(rng.normal() * 0.5)
            log_std = float(rng.uniform(-1.0, 0.3))
            sigma = math.exp(log_std)
            x = mu + sigma * float(rng.uniform(-1.5, 1.5))
            y = math.tanh(x)
            h = 1e-6
            hi = normal_cdf((math.atanh(y + h) - mu) / sigma)
            lo = normal_cdf((math.atanh(y - h) - mu) / sigma)
            oracle = math.log((hi - lo) / (2.0 * h))
            ours = float(tanh_gaussian_log_density(np.array(x), np.array(mu), np.array(log_std)))
            assert ours == pytest.approx(oracle, abs=1e-3)

    def test_log_prob_stable_for_extreme_presquash(self):
        v = tanh_gaussian_log_density(np.array(30.0), np.array(0.0), np.array(0.0))
        assert np.isfinite(v)

    def test_entropy_sign_sigma_shrinks_log_prob_grows(self):
        mu = np.zeros(4)
        prev = -np.inf
        for log_std in (0.0, -1.0, -3.0, -6.0):
            lp = float(squashed_log_prob(mu, mu, np.full(4, log_std)))
            assert lp > prev
            prev = lp


class TestCriticTarget:
    def test_done_gives_reward_exactly(self, rng):
        sac = mini_sac(rng)
        from gustlab.sac import Batch

        batch = Batch(
            observations=rng.normal(size=(6, 4)),
            actions_presquash=rng.normal(size=(6, 4)),
            rewards=rng.normal(size=6),
            next_observations=rng.normal(size=(6, 4)),
            dones=np.ones(6),
        )
        y = critic_target(batch, sac, rng)
        np.testing.assert_array_equal(y, batch.rewards)

    def test_zero_gamma_gives_reward_exactly(self, rng):
        sac = mini_sac(rng, gamma=0.0)
        from gustlab.sac import Batch

        batch = Batch(
            observations=rng.normal(size=(6, 4)),
            actions_presquash=rng.normal(size=(6, 4)),
            rewards=rng.normal(size=6),
            next_observations=rng.normal(size=(6, 4)),
            dones=np.zeros(6),
        )
        y = critic_target(batch, sac, rng)
        np.testing.assert_array_equal(y, batch.rewards)

    def test_min_of_constant_critics(self, rng):
        sac = mini_sac(rng, alpha_mode="fixed", alpha_init=0.0)
        q1, q2 = -1.5, 2.0
        sac.targets = [constant_critic(8, q1), constant_critic(8, q2)]
        from gustlab.sac import Batch

        batch = Batch(
            observations=rng.normal(size=(5, 4)),
            actions_presquash=rng.normal(size=(5, 4)),
            rewards=rng.normal(size=5),
            next_observations=rng.normal(size=(5, 4)),
            dones=np.zeros(5),
        )
        y = critic_target(batch, sac, rng)
        np.testing.assert_allclose(y, batch.rewards + sac.config.gamma * q1, atol=1e-12)


class TestReplay:
    def test_push_counts(self, rng):
        replay = ReplayBuffer(capacity=100, obs_dim=4)
        for k in range(50):
            replay.push(Transition(np.zeros(4), np.zeros(4), 0.0, np.zeros(4), False))
            assert len(replay) == k + 1

    def test_overwrites_oldest_beyond_capacity(self):
        replay = ReplayBuffer(capacity=8, obs_dim=4)
        for k in range(9):
            replay.push(Transition(np.full(4, float(k)), np.zeros(4), float(k), np.zeros(4), False))
        assert len(replay) == 8
        stored = sorted(replay._rew.tolist())
        assert stored == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]

    def test_seeded_sampling_reproducible(self, rng):
        replay = fill_replay(rng, n=64)
        b1 = replay.sample(32, np.random.default_rng(7))
        b2 = replay.sample(32, np.random.default_rng(7))
        np.testing.assert_array_equal(b1.observations, b2.observations)
        np.testing.assert_array_equal(b1.rewards, b2.rewards)

    def test_underflow(self, rng):
        replay = fill_replay(rng, n=10)
        with pytest.raises(ReplayUnderflow):
            replay.sample(11, rng)


class TestPolyak:
    def test_tau_zero_keeps_targets(self, rng):
        sac = mini_sac(rng)
        new = polyak_update(sac.targets, sac.critics, 0.0)
        # critics start as copies; perturb one critic to make the check real
        sac.critics[0].layers[0].weight += 1.0
        new = polyak_update(sac.targets, sac.critics, 0.0)
        for t_old, t_new in zip(sac.targets, new):
            for l0, l1 in zip(t_old.layers, t_new.layers):
                np.testing.assert_array_equal(l0.weight, l1.weight)

    def test_tau_one_copies_critics(self, rng):
        sac = mini_sac(rng)
        sac.critics[0].layers[0].weight += 0.5
        new = polyak_update(sac.targets, sac.critics, 1.0)
        for c, t in zip(sac.critics, new):
            for lc, lt in zip(c.layers, t.layers):
                np.testing.assert_array_equal(lc.weight, lt.weight)

    def test_fraction_tau_exactly(self, rng):
        sac = mini_sac(rng)
        tau = 1e-4
        old = [t.copy() for t in sac.targets]
        for c in sac.critics:
            for l in c.layers:
                l.weight += rng.normal(size=l.weight.shape)
        new = polyak_update(sac.targets, sac.critics, tau)
        for t0, t1, c in zip(old, new, sac.critics):
            for l0, l1, lc in zip(t0.layers, t1.layers, c.layers):
                moved = np.abs(lc.weight - l0.weight) > 1e-9
                frac = (l1.weight - l0.weight)[moved] / (lc.weight - l0.weight)[moved]
                np.testing.assert_allclose(frac, tau, rtol=1e-9)


class TestGradients:
    def test_critic_gradients_match_finite_differences(self, rng):
        sac = mini_sac(rng)
        obs = rng.normal(size=(8, 4))
        act = np.tanh(rng.normal(size=(8, 4)))
        y = rng.normal(size=8)
        _, grads = critic_loss_and_grads(sac.critics[0], obs, act, y)

        def loss_of(p):
            l, _ = critic_loss_and_grads(p, obs, act, y)
            return l

        self._check_fd(sac.critics[0], grads, loss_of)

    def test_actor_gradients_match_finite_differences(self, rng):
        sac = mini_sac(rng)
        obs = rng.normal(size=(8, 4))
        z = rng.standard_normal((8, 4))
        _, grads, _ = actor_loss_and_grads(sac.actor, sac.critics, sac.log_alpha, obs, z)

        def loss_of(p):
            l, _, _ = actor_loss_and_grads(p, sac.critics, sac.log_alpha, obs, z)
            return l

        self._check_fd(sac.actor, grads, loss_of)

    def test_alpha_gradient_matches_finite_differences(self, rng):
        log_p = rng.normal(size=16)
        la = 0.3
        _, g = alpha_loss_and_grad(la, log_p, -4.0)
        h = 1e-6
        lo, _ = alpha_loss_and_grad(la - h, log_p, -4.0)
        hi, _ = alpha_loss_and_grad(la + h, log_p, -4.0)
        assert g == pytest.approx((hi - lo) / (2 * h), rel=1e-6)

    @staticmethod
    def _check_fd(params, grads, loss_of, h=1e-5, rel=1e-4):
        for li, layer in enumerate(params.layers):
            for arr_name, g in (("weight", grads[li][0]), ("bias", grads[li][1])):
                arr = getattr(layer, arr_name)
                for idx in np.ndindex(*arr.shape):
                    p_hi = params.copy()
                    getattr(p_hi.layers[li], arr_name)[idx] += h
                    p_lo = params.copy()
                    getattr(p_lo.layers[li], arr_name)[idx] -= h
                    fd = (loss_of(p_hi) - loss_of(p_lo)) / (2 * h)
                    denom = max(1e-6, abs(fd), abs(g[idx]))
                    assert abs(fd - g[idx]) / denom < rel, f"layer {li} {arr_name}{idx}"

    def test_min_critic_swap_keeps_actor_gradient_bit_identical(self, rng):
        sac = mini_sac(rng)
        # make the critics genuinely different
        sac.critics[1].layers[0].weight += 0.3
        obs = rng.normal(size=(16, 4))
        z = rng.standard_normal((16, 4))
        _, g_ab, _ = actor_loss_and_grads(sac.actor, sac.critics, sac.log_alpha, obs, z)
        _, g_ba, _ = actor_loss_and_grads(sac.actor, sac.critics[::-1], sac.log_alpha, obs, z)
        for (w1, b1), (w2, b2) in zip(g_ab, g_ba):
            np.testing.assert_array_equal(w1, w2)
            np.testing.assert_array_equal(b1, b2)


class TestSacUpdate:
    def test_underflow_propagates(self, rng):
        sac = mini_sac(rng)
        replay = fill_replay(rng, n=10)
        with pytest.raises(ReplayUnderflow):
            sac_update(sac, replay, rng)

    def test_tau_zero_targets_unchanged(self, rng):
        sac = mini_sac(rng, tau=0.0)
        replay = fill_replay(rng, n=200)
        before = [t.copy() for t in sac.targets]
        sac2, _ = sac_update(sac, replay, rng)
        for t0, t1 in zip(before, sac2.targets):
            for l0, l1 in zip(t0.layers, t1.layers):
                np.testing.assert_array_equal(l0.weight, l1.weight)

    def test_tau_one_targets_equal_critics(self, rng):
        sac = mini_sac(rng, tau=1.0)
        replay = fill_replay(rng, n=200)
        sac2, _ = sac_update(sac, replay, rng)
        for c, t in zip(sac2.critics, sac2.targets):
            for lc, lt in zip(c.layers, t.layers):
                np.testing.assert_array_equal(lc.weight, lt.weight)

    def test_update_changes_parameters_and_counts(self, rng):
        sac = mini_sac(rng)
        replay = fill_replay(rng, n=200)
        sac2, diag = sac_update(sac, replay, rng)
        assert sac2.updates == 1
        assert not np.array_equal(sac2.actor.layers[0].weight, sac.actor.layers[0].weight)
        assert np.isfinite(list(diag.values())).all()

    def test_fixed_alpha_not_tuned(self, rng):
        sac = mini_sac(rng, alpha_mode="fixed", alpha_init=0.125)
        replay = fill_replay(rng, n=200)
        sac2, _ = sac_update(sac, replay, rng)
        assert sac2.log_alpha == sac.log_alpha
        assert sac2.alpha == pytest.approx(0.125, rel=1e-12)

    def test_single_critic_mode(self, rng):
        sac = mini_sac(rng, twin_critics=False)
        assert len(sac.critics) == 1
        replay = fill_replay(rng, n=200)
        sac2, diag = sac_update(sac, replay, rng)
        assert len(sac2.critics) == 1

    def test_thousand_updates_bit_reproducible(self, rng):
        def run():
            boot = np.random.default_rng(42)
            sac = mini_sac(boot)
            replay = fill_replay(np.random.default_rng(1), n=400)
            stream = np.random.default_rng(9)
            trace = []
            for _ in range(1000):
                sac, diag = sac_update(sac, replay, stream)
                trace.append((diag["critic_loss_0"], diag["actor_loss"], diag["alpha"]))
            return trace

        t1 = run()
        t2 = run()
        assert t1 == t2
