"""Versioned binary checkpoints for the training state.

Layout (all little-endian; floats are IEEE binary64):

    magic   4 bytes  "GLAB"
    version u32      format version, currently 1
    n_critics u8
    networks         actor, critic_0..n, target_0..n, each:
        n_layers u32
        per layer: out u32, in u32, activation u8 (0 relu, 1 identity),
                   weight f64[out*in] row-major, bias f64[out]
    adam             for actor then each critic:
        step u64
        per layer: m_w, v_w (f64[out*in]), m_b, v_b (f64[out])
    log_alpha f64
    alpha_adam       m f64, v f64, step u64
    updates u64      completed SAC updates
    env_steps u64    environment steps collected when saved
    features f64[5]  position, velocity, angle, angular-velocity divisors, clamp
    bounds           a_max f64[4], beta f64, epsilon f64
    sac config       gamma, tau, learning_rate, alpha_init, target_entropy f64,
                     alpha_mode u8 (0 auto, 1 fixed), batch_size u32
    crc32 u32        of every preceding byte

The feature divisors and residual bounds ride inside the checkpoint so
evaluation can never drift from the constants used in training.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .features import FeatureScales, ResidualBounds
from .nn import IDENTITY, RELU, AdamState, Layer, MlpParams
from .sac import SacConfig, SacState, ScalarAdam

MAGIC = b"GLAB"
FORMAT_VERSION = 1

_ACT_CODE = {RELU: 0, IDENTITY: 1}
_ACT_NAME = {0: RELU, 1: IDENTITY}


class ChecksumMismatch(RuntimeError):
    """Checkpoint bytes are corrupt or not a checkpoint at all."""


def _pack_network(out: bytearray, net: MlpParams) -> None:
    out += struct.pack("<I", len(net.layers))
    for layer in net.layers:
        rows, cols = layer.weight.shape
        out += struct.pack("<IIB", rows, cols, _ACT_CODE[layer.activation])
        out += np.ascontiguousarray(layer.weight, dtype="<f8").tobytes()
        out += np.ascontiguousarray(layer.bias, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        vals = struct.unpack_from("<" + fmt, self.buf, self.pos)
        self.pos += struct.calcsize("<" + fmt)
        return vals if len(vals) > 1 else vals[0]

    def floats(self, n: int) -> np.ndarray:
        a = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.pos).astype(float)
        self.pos += 8 * n
        return a


def _read_network(r: _Reader) -> MlpParams:
    n_layers = r.take("I")
    layers = []
    for _ in range(n_layers):
        rows, cols, act = r.take("IIB")
        w = r.floats(rows * cols).reshape(rows, cols)
        b = r.floats(rows)
        layers.append(Layer(w, b, _ACT_NAME[act]))
    return MlpParams(layers)


def _pack_adam(out: bytearray, state: AdamState) -> None:
    out += struct.pack("<Q", state.step)
    for (mw, mb), (vw, vb) in zip(state.m, state.v):
        out += np.ascontiguousarray(mw, dtype="<f8").tobytes()
        out += np.ascontiguousarray(vw, dtype="<f8").tobytes()
        out += np.ascontiguousarray(mb, dtype="<f8").tobytes()
        out += np.ascontiguousarray(vb, dtype="<f8").tobytes()


def _read_adam(r: _Reader, like: MlpParams) -> AdamState:
    step = r.take("Q")
    m, v = [], []
    for layer in like.layers:
        rows, cols = layer.weight.shape
        mw = r.floats(rows * cols).reshape(rows, cols)
        vw = r.floats(rows * cols).reshape(rows, cols)
        mb = r.floats(rows)
        vb = r.floats(rows)
        m.append((mw, mb))
        v.append((vw, vb))
    return AdamState(m=m, v=v, step=step)


def save_checkpoint(
    path: str | Path,
    sac: SacState,
    scales: FeatureScales,
    bounds: ResidualBounds,
    env_steps: int = 0,
) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<B", len(sac.critics))
    _pack_network(out, sac.actor)
    for c in sac.critics:
        _pack_network(out, c)
    for t in sac.targets:
        _pack_network(out, t)
    _pack_adam(out, sac.actor_opt)
    for copt in sac.critic_opts:
        _pack_adam(out, copt)
    out += struct.pack("<d", sac.log_alpha)
    out += struct.pack("<ddQ", sac.alpha_opt.m, sac.alpha_opt.v, sac.alpha_opt.step)
    out += struct.pack("<QQ", sac.updates, env_steps)
    out += np.asarray(scales.as_array(), dtype="<f8").tobytes()
    out += np.ascontiguousarray(bounds.a_max, dtype="<f8").tobytes()
    out += struct.pack("<dd", bounds.beta, bounds.epsilon)
    cfg = sac.config
    out += struct.pack(
        "<dddddBI",
        cfg.gamma,
        cfg.tau,
        cfg.learning_rate,
        cfg.alpha_init,
        cfg.target_entropy,
        0 if cfg.alpha_mode == "auto" else 1,
        cfg.batch_size,
    )
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path: str | Path) -> tuple[SacState, FeatureScales, ResidualBounds, dict]:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise ChecksumMismatch(f"{path}: not a checkpoint (bad magic)")
    stored_crc = struct.unpack_from("<I", buf, len(buf) - 4)[0]
    if zlib.crc32(buf[:-4]) != stored_crc:
        raise ChecksumMismatch(f"{path}: CRC mismatch, file is corrupt")
    r = _Reader(buf[:-4])
    r.pos = 4
    version = r.take("I")
    if version != FORMAT_VERSION:
        raise ChecksumMismatch(f"{path}: unsupported format version {version}")
    n_critics = r.take("B")
    actor = _read_network(r)
    critics = [_read_network(r) for _ in range(n_critics)]
    targets = [_read_network(r) for _ in range(n_critics)]
    actor_opt = _read_adam(r, actor)
    critic_opts = [_read_adam(r, c) for c in critics]
    log_alpha = r.take("d")
    am, av, astep = r.take("ddQ")
    updates, env_steps = r.take("QQ")
    scales = FeatureScales.from_array(r.floats(5))
    a_max = r.floats(4)
    beta, epsilon = r.take("dd")
    gamma, tau, lr, alpha_init, target_entropy, mode_code, batch_size = r.take("dddddBI")
    config = SacConfig(
        gamma=gamma,
        tau=tau,
        batch_size=batch_size,
        learning_rate=lr,
        alpha_mode="auto" if mode_code == 0 else "fixed",
        alpha_init=alpha_init,
        target_entropy=target_entropy,
        twin_critics=n_critics == 2,
    )
    sac = SacState(
        actor=actor,
        critics=critics,
        targets=targets,
        actor_opt=actor_opt,
        critic_opts=critic_opts,
        log_alpha=log_alpha,
        alpha_opt=ScalarAdam(m=am, v=av, step=astep),
        config=config,
        updates=updates,
    )
    bounds = ResidualBounds(a_max=a_max, beta=beta, epsilon=epsilon)
    return sac, scales, bounds, {"env_steps": env_steps}
