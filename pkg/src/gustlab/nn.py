"""Dense-MLP machinery: forward pass, reverse-mode gradients and Adam.

Hand-rolled on numpy only; the two network shapes used by the stack
(actor 68-30-20-5-8, critic 72-400-200-100-1) are small enough that no
framework is warranted. All math is float64. Parameter containers are
value types: forward/backward/adam_update never mutate their inputs.

Inputs may be a single vector (n,) or a batch (B, n); batched backward
returns parameter gradients summed over rows, so feeding an output
gradient scaled by 1/B yields batch-mean-loss gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
IDENTITY = "identity"


class DimensionMismatch(ValueError):
    """Input or gradient shape does not match the network."""


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = RELU

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionMismatch("layer weight must be (out, in) with matching bias")
        if self.activation not in (RELU, IDENTITY):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self) -> None:
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise DimensionMismatch("adjacent layer dimensions do not chain")
        if not all(np.isfinite(l.weight).all() and np.isfinite(l.bias).all() for l in self.layers):
            raise ValueError("parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


# Gradients mirror the parameter structure: one (dW, db) pair per layer.
Gradients = list[tuple[np.ndarray, np.ndarray]]


def init_mlp(
    sizes: list[int],
    rng: np.random.Generator,
    final_scale: float = 1.0,
    final_activation: str = IDENTITY,
) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init; hidden layers relu.

    final_scale shrinks the last layer so a residual policy starts close
    to the base controller's behavior.
    """
    layers = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        last = i == len(sizes) - 2
        if last:
            w *= final_scale
            b *= final_scale
        layers.append(Layer(w, b, final_activation if last else RELU))
    return MlpParams(layers)


def forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Evaluate the network; the tape holds every layer's post-activation.

    tape[0] is the input itself, tape[i] the output of layer i-1.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.in_dim:
        raise DimensionMismatch(f"input width {x.shape[-1]} != {params.in_dim}")
    tape = [x]
    h = x
    for layer in params.layers:
        z = h @ layer.weight.T
        z += layer.bias
        if layer.activation == RELU:
            np.maximum(z, 0.0, out=z)
        tape.append(z)
        h = z
    return h, tape


def backward(
    params: MlpParams, tape: list[np.ndarray], output_gradient: np.ndarray
) -> tuple[Gradients, np.ndarray]:
    """Exact reverse-mode gradients for the forward call that built the tape.

    Returns per-layer (dW, db) summed over batch rows and the gradient
    with respect to the input.
    """
    g = np.asarray(output_gradient, dtype=float)
    if g.shape != tape[-1].shape:
        raise DimensionMismatch("output gradient shape does not match forward output")
    squeeze = g.ndim == 1
    if squeeze:
        g = g[None, :]
    grads: Gradients = [None] * len(params.layers)  # type: ignore[list-item]
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        h_in = tape[i] if tape[i].ndim == 2 else tape[i][None, :]
        if layer.activation == RELU:
            out = tape[i + 1] if tape[i + 1].ndim == 2 else tape[i + 1][None, :]
            g = g * (out > 0.0)
        grads[i] = (g.T @ h_in, g.sum(axis=0))
        g = g @ layer.weight
    return grads, (g[0] if squeeze else g)


def input_gradient(params: MlpParams, tape: list[np.ndarray], output_gradient: np.ndarray) -> np.ndarray:
    """Input gradient only (skips parameter gradients; used for dQ/da)."""
    g = np.asarray(output_gradient, dtype=float)
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        if layer.activation == RELU:
            g = g * (tape[i + 1] > 0.0)
        g = g @ layer.weight
    return g


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the tracked MlpParams."""

    m: Gradients
    v: Gradients
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init_like(cls, params: MlpParams) -> "AdamState":
        zeros = lambda l: (np.zeros_like(l.weight), np.zeros_like(l.bias))
        return cls(m=[zeros(l) for l in params.layers], v=[zeros(l) for l in params.layers])


def adam_update(
    params: MlpParams, gradients: Gradients, state: AdamState, learning_rate: float
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam step; returns new params and state."""
    if len(gradients) != len(params.layers):
        raise DimensionMismatch("gradient structure does not match parameters")
    t = state.step + 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_layers = []
    new_m: Gradients = []
    new_v: Gradients = []
    for layer, (dw, db), (mw, mb), (vw, vb) in zip(params.layers, gradients, state.m, state.v):
        if dw.shape != layer.weight.shape or db.shape != layer.bias.shape:
            raise DimensionMismatch("gradient shapes do not match layer")
        mw2 = b1 * mw + (1.0 - b1) * dw
        mb2 = b1 * mb + (1.0 - b1) * db
        vw2 = b2 * vw + (1.0 - b2) * dw * dw
        vb2 = b2 * vb + (1.0 - b2) * db * db
        w = layer.weight - learning_rate * (mw2 / c1) / (np.sqrt(vw2 / c2) + eps)
        b = layer.bias - learning_rate * (mb2 / c1) / (np.sqrt(vb2 / c2) + eps)
        new_layers.append(Layer(w, b, layer.activation))
        new_m.append((mw2, mb2))
        new_v.append((vw2, vb2))
    return MlpParams(new_layers), AdamState(
        m=new_m, v=new_v, step=t, beta1=b1, beta2=b2, eps=eps
    )
