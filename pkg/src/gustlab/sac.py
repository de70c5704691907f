"""Soft actor-critic training engine.

Squashed-Gaussian actor, clipped double-Q critics, uniform replay,
entropy-regularized losses and Polyak-averaged targets. Everything is
driven by one numpy Generator passed explicitly; for a fixed draw order
(batch indices, observation noise, next-action noise, actor noise) a
seeded run is bit-reproducible.

Loss conventions (batch means):
    critic_k : mean_i (Q_k(s_i, a_i) - y_i)^2
    actor    : mean_i (alpha * log pi(a~_i | s_i) - min_k Q_k(s_i, a~_i))
    alpha    : mean_i (-alpha * (log pi_i + target_entropy)), log pi detached
with a~ = tanh(mu + sigma * z) reparameterized and y the entropy-bonused
bootstrap target from the Polyak-averaged critics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .nn import AdamState, Layer, MlpParams, adam_update, backward, forward, init_mlp, input_gradient

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = math.log(2.0 * math.pi)
_LOG_2 = math.log(2.0)

OBS_DIM = 68
ACTION_DIM = 4


class ReplayUnderflow(RuntimeError):
    """Not enough stored transitions to draw the requested sample."""


@dataclass
class Transition:
    observation: np.ndarray
    action_presquash: np.ndarray  # Gaussian sample before tanh
    reward: float
    next_observation: np.ndarray
    done: bool


@dataclass
class Batch:
    observations: np.ndarray  # (n, obs_dim)
    actions_presquash: np.ndarray  # (n, action_dim)
    rewards: np.ndarray  # (n,)
    next_observations: np.ndarray  # (n, obs_dim)
    dones: np.ndarray  # (n,) float 0/1


class ReplayBuffer:
    """Ring buffer over preallocated arrays, grown geometrically to capacity."""

    def __init__(self, capacity: int = 1_000_000, obs_dim: int = OBS_DIM, action_dim: int = ACTION_DIM):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self._allocated = 0
        self._cursor = 0
        self.size = 0
        self._grow(min(1024, self.capacity))

    def _grow(self, n: int) -> None:
        n = min(n, self.capacity)
        if n <= self._allocated:
            return
        def grown(old, width):
            new = np.zeros((n, width)) if width > 1 else np.zeros(n)
            if self._allocated:
                new[: self._allocated] = old
            return new

        if self._allocated == 0:
            self._obs = np.zeros((n, self.obs_dim))
            self._act = np.zeros((n, self.action_dim))
            self._rew = np.zeros(n)
            self._next = np.zeros((n, self.obs_dim))
            self._done = np.zeros(n)
        else:
            self._obs = grown(self._obs, self.obs_dim)
            self._act = grown(self._act, self.action_dim)
            self._rew = grown(self._rew, 1)
            self._next = grown(self._next, self.obs_dim)
            self._done = grown(self._done, 1)
        self._allocated = n

    def push(self, t: Transition) -> None:
        if self._cursor >= self._allocated and self._allocated < self.capacity:
            self._grow(self._allocated * 2)
        i = self._cursor
        self._obs[i] = t.observation
        self._act[i] = t.action_presquash
        self._rew[i] = t.reward
        self._next[i] = t.next_observation
        self._done[i] = 1.0 if t.done else 0.0
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self) -> int:
        return self.size

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """Uniform with replacement over filled slots."""
        if self.size < n:
            raise ReplayUnderflow(f"replay holds {self.size} < requested {n}")
        idx = rng.integers(0, self.size, size=n)
        return Batch(
            observations=self._obs[idx].copy(),
            actions_presquash=self._act[idx].copy(),
            rewards=self._rew[idx].copy(),
            next_observations=self._next[idx].copy(),
            dones=self._done[idx].copy(),
        )


@dataclass
class SacConfig:
    gamma: float = 0.95
    tau: float = 1.0e-4
    batch_size: int = 128
    learning_rate: float = 2.0e-4
    alpha_mode: str = "auto"  # "auto" tunes toward target_entropy, "fixed" keeps alpha_init
    alpha_init: float = 0.2
    target_entropy: float = -float(ACTION_DIM)
    twin_critics: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("gamma must lie in [0, 1)")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError("tau must lie in [0, 1]")
        if self.alpha_init < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.alpha_mode not in ("auto", "fixed"):
            raise ValueError("alpha_mode must be 'auto' or 'fixed'")


@dataclass
class ScalarAdam:
    m: float = 0.0
    v: float = 0.0
    step: int = 0

    def update(self, grad: float, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        t = self.step + 1
        m = beta1 * self.m + (1.0 - beta1) * grad
        v = beta2 * self.v + (1.0 - beta2) * grad * grad
        delta = lr * (m / (1.0 - beta1**t)) / (math.sqrt(v / (1.0 - beta2**t)) + eps)
        return delta, ScalarAdam(m=m, v=v, step=t)


@dataclass
class SacState:
    actor: MlpParams
    critics: list[MlpParams]
    targets: list[MlpParams]
    actor_opt: AdamState
    critic_opts: list[AdamState]
    log_alpha: float
    alpha_opt: ScalarAdam
    config: SacConfig
    updates: int = 0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        obs_dim: int = OBS_DIM,
        action_dim: int = ACTION_DIM,
        actor_hidden: tuple[int, ...] = (30, 20, 5),
        critic_hidden: tuple[int, ...] = (400, 200, 100),
        config: SacConfig | None = None,
        actor_final_scale: float = 0.01,
        log_std_bias_init: float = -1.0,
    ) -> "SacState":
        """Fresh training state.

        The actor's final layer is scaled down so the residual mean
        starts near zero, and the log-std head is biased negative so the
        exploration noise starts moderate instead of box-filling; both
        keep early training close to the base controller's behavior.
        """
        config = config or SacConfig()
        actor = init_mlp([obs_dim, *actor_hidden, 2 * action_dim], rng, final_scale=actor_final_scale)
        actor.layers[-1].bias[action_dim:] += log_std_bias_init
        n_critics = 2 if config.twin_critics else 1
        critic_sizes = [obs_dim + action_dim, *critic_hidden, 1]
        critics = [init_mlp(critic_sizes, rng) for _ in range(n_critics)]
        targets = [c.copy() for c in critics]
        return cls(
            actor=actor,
            critics=critics,
            targets=targets,
            actor_opt=AdamState.init_like(actor),
            critic_opts=[AdamState.init_like(c) for c in critics],
            log_alpha=math.log(max(config.alpha_init, 1e-12)),
            alpha_opt=ScalarAdam(),
            config=config,
        )


def actor_distribution(actor: MlpParams, obs: np.ndarray):
    """Mean and clamped log-std heads, plus the tape for backprop."""
    out, tape = forward(actor, obs)
    mu = out[..., :ACTION_DIM]
    log_std_raw = out[..., ACTION_DIM:]
    log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
    return mu, log_std, log_std_raw, tape


def tanh_gaussian_log_density(presquash: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Per-dimension log density of tanh(x), x ~ N(mu, sigma), at x=presquash.

    Uses the numerically stable form of log(1 - tanh(x)^2).
    """
    sigma = np.exp(log_std)
    z = (presquash - mu) / sigma
    log_normal = -0.5 * z * z - log_std - 0.5 * _LOG_2PI
    log_jac = 2.0 * (_LOG_2 - presquash - np.logaddexp(0.0, -2.0 * presquash))
    return log_normal - log_jac


def squashed_log_prob(presquash: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Joint log probability, summed over action dimensions."""
    return tanh_gaussian_log_density(presquash, mu, log_std).sum(axis=-1)


def sample_action(
    actor: MlpParams, obs: np.ndarray, mode: str, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray, float]:
    """Draw (presquash, squashed, log_prob) for one observation.

    'stochastic' samples the reparameterized Gaussian; 'deterministic'
    returns tanh(mu) (the testing branch of the policy).
    """
    mu, log_std, _, _ = actor_distribution(actor, obs)
    if mode == "deterministic":
        presquash = mu
    elif mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic sampling needs an rng")
        presquash = mu + np.exp(log_std) * rng.standard_normal(mu.shape)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    squashed = np.tanh(presquash)
    log_prob = float(squashed_log_prob(presquash, mu, log_std))
    return presquash, squashed, log_prob


def critic_forward(critic: MlpParams, obs: np.ndarray, action_squashed: np.ndarray):
    x = np.concatenate([obs, action_squashed], axis=-1)
    q, tape = forward(critic, x)
    return q[..., 0], tape


def critic_target(batch: Batch, sac: SacState, rng: np.random.Generator) -> np.ndarray:
    """Per-sample bootstrap target with entropy bonus and clipped double-Q.

    Draws fresh next actions from the current actor (one standard-normal
    block per call).
    """
    mu, log_std, _, _ = actor_distribution(sac.actor, batch.next_observations)
    z = rng.standard_normal(mu.shape)
    presquash = mu + np.exp(log_std) * z
    squashed = np.tanh(presquash)
    log_p = squashed_log_prob(presquash, mu, log_std)
    q_next = np.stack(
        [critic_forward(t, batch.next_observations, squashed)[0] for t in sac.targets]
    ).min(axis=0)
    cfg = sac.config
    return batch.rewards + cfg.gamma * (1.0 - batch.dones) * (q_next - sac.alpha * log_p)


def critic_loss_and_grads(critic: MlpParams, obs: np.ndarray, action_squashed: np.ndarray, targets: np.ndarray):
    """MSE critic loss against fixed targets, with parameter gradients."""
    q, tape = critic_forward(critic, obs, action_squashed)
    err = q - targets
    n = err.shape[0]
    loss = float(err @ err) / n
    gout = np.zeros((n, 1))
    gout[:, 0] = (2.0 / n) * err
    grads, _ = backward(critic, tape, gout)
    return loss, grads


def actor_loss_and_grads(
    actor: MlpParams,
    critics: list[MlpParams],
    log_alpha: float,
    obs: np.ndarray,
    noise: np.ndarray,
):
    """Reparameterized actor loss mean(alpha*logp - minQ) and its gradients.

    noise is the fixed standard-normal block defining the samples, so the
    loss is a deterministic function of the actor parameters (this is
    what finite-difference checks differentiate).
    """
    alpha = math.exp(log_alpha)
    mu, log_std, log_std_raw, tape = actor_distribution(actor, obs)
    sigma = np.exp(log_std)
    presquash = mu + sigma * noise
    squashed = np.tanh(presquash)
    log_p = squashed_log_prob(presquash, mu, log_std)

    n = obs.shape[0]
    qs = []
    tapes = []
    for critic in critics:
        q, ctape = critic_forward(critic, obs, squashed)
        qs.append(q)
        tapes.append(ctape)
    q_stack = np.stack(qs)
    which = np.argmin(q_stack, axis=0)
    q_min = q_stack[which, np.arange(n)]
    loss = float(np.mean(alpha * log_p - q_min))

    # dQmin/da through the argmin critic of each sample
    dq_da = np.zeros((n, ACTION_DIM))
    for k, (critic, ctape) in enumerate(zip(critics, tapes)):
        mask = (which == k).astype(float)
        if not mask.any():
            continue
        gout = np.zeros((n, 1))
        gout[:, 0] = mask
        gin = input_gradient(critic, ctape, gout)
        dq_da += gin[:, -ACTION_DIM:]

    tanh_x = squashed
    sech2 = 1.0 - squashed * squashed
    # d/dx of (alpha*logp - qmin): logp depends on x via the tanh correction
    dl_dx = (alpha * 2.0 * tanh_x - dq_da * sech2) / n
    dl_dmu = dl_dx
    dl_dlogstd = dl_dx * sigma * noise - (alpha / n)
    gate = (log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)
    dl_dlogstd = np.where(gate, dl_dlogstd, 0.0)

    gout_actor = np.concatenate([dl_dmu, dl_dlogstd], axis=-1)
    grads, _ = backward(actor, tape, gout_actor)
    return loss, grads, log_p


def alpha_loss_and_grad(log_alpha: float, log_p: np.ndarray, target_entropy: float):
    """Temperature loss mean(-alpha*(logp + H_target)) and d/dlog_alpha."""
    alpha = math.exp(log_alpha)
    drive = float(np.mean(log_p + target_entropy))
    return -alpha * drive, -alpha * drive


def polyak_update(targets: list[MlpParams], critics: list[MlpParams], tau: float) -> list[MlpParams]:
    """targets <- (1 - tau) * targets + tau * critics, elementwise."""
    out = []
    for t, c in zip(targets, critics):
        layers = []
        for lt, lc in zip(t.layers, c.layers):
            w = (1.0 - tau) * lt.weight + tau * lc.weight
            b = (1.0 - tau) * lt.bias + tau * lc.bias
            layers.append(Layer(w, b, lt.activation))
        out.append(MlpParams(layers))
    return out


def sac_update(
    sac: SacState,
    replay: ReplayBuffer,
    rng: np.random.Generator,
    noise_fn=None,
) -> tuple[SacState, dict]:
    """One full SAC step: both critics, actor, temperature, Polyak targets.

    noise_fn(batch_obs, rng) injects training-time sensor noise; it is
    applied to the stored observations and next observations only. The
    rng draw order is fixed: sample indices, obs noise, next-obs noise,
    target action noise, actor action noise.
    """
    cfg = sac.config
    batch = replay.sample(cfg.batch_size, rng)
    if noise_fn is not None:
        batch.observations = noise_fn(batch.observations, rng)
        batch.next_observations = noise_fn(batch.next_observations, rng)

    y = critic_target(batch, sac, rng)

    squashed_act = np.tanh(batch.actions_presquash)
    critic_losses = []
    new_critics = []
    new_copts = []
    for critic, copt in zip(sac.critics, sac.critic_opts):
        loss, grads = critic_loss_and_grads(critic, batch.observations, squashed_act, y)
        critic2, copt2 = adam_update(critic, grads, copt, cfg.learning_rate)
        critic_losses.append(loss)
        new_critics.append(critic2)
        new_copts.append(copt2)

    z = rng.standard_normal((cfg.batch_size, ACTION_DIM))
    actor_loss, actor_grads, log_p = actor_loss_and_grads(
        sac.actor, new_critics, sac.log_alpha, batch.observations, z
    )
    new_actor, new_aopt = adam_update(sac.actor, actor_grads, sac.actor_opt, cfg.learning_rate)

    log_alpha = sac.log_alpha
    alpha_opt = sac.alpha_opt
    if cfg.alpha_mode == "auto":
        _, dga = alpha_loss_and_grad(log_alpha, log_p, cfg.target_entropy)
        delta, alpha_opt = alpha_opt.update(dga, cfg.learning_rate)
        log_alpha = log_alpha - delta

    new_targets = polyak_update(sac.targets, new_critics, cfg.tau)

    new_state = replace(
        sac,
        actor=new_actor,
        critics=new_critics,
        targets=new_targets,
        actor_opt=new_aopt,
        critic_opts=new_copts,
        log_alpha=log_alpha,
        alpha_opt=alpha_opt,
        updates=sac.updates + 1,
    )
    diagnostics = {
        "critic_loss_0": critic_losses[0],
        "critic_loss_1": critic_losses[-1],
        "actor_loss": actor_loss,
        "alpha": math.exp(log_alpha),
        "mean_log_prob": float(np.mean(log_p)),
        "mean_target": float(np.mean(y)),
    }
    return new_state, diagnostics
