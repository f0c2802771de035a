"""Minimal dense neural kernel: fully connected nets, backprop, SGD, spectral norm.

Everything runs in float64 on numpy arrays. Nets are plain dataclasses with
no shared mutable state, so they can be copied and moved between workers
freely; training a single net is single-threaded.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity")


class DimensionError(ValueError):
    """Input shape does not match the network."""


class TrainingFault(RuntimeError):
    """Non-finite values encountered during an update."""


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"
    # persistent left singular vector for power iteration
    power_vec: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class FeedForwardNet:
    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "FeedForwardNet":
        return copy.deepcopy(self)


@dataclass
class SgdConfig:
    learning_rate: float = 1e-4
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    # "adam" is the default because the stock learning rate of 1e-4 only
    # trains these small nets in a reasonable number of epochs with
    # adaptive per-parameter steps; "sgd" gives the plain update.
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


def init_net(layer_dims: list[int], rng: np.random.Generator,
             hidden_activation: str = "relu") -> FeedForwardNet:
    """Build a net with uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights.

    `layer_dims` lists [input, hidden..., output] sizes. The output layer
    activation is identity; hidden layers use `hidden_activation`.
    """
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dims")
    layers = []
    for i in range(len(layer_dims) - 1):
        fan_in, fan_out = layer_dims[i], layer_dims[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        act = "identity" if i == len(layer_dims) - 2 else hidden_activation
        layers.append(Layer(weight=w, bias=b, activation=act))
    return FeedForwardNet(layers=layers)


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z


def forward_batch(net: FeedForwardNet, inputs: np.ndarray) -> np.ndarray:
    """Forward pass on a (n, in_dim) batch; returns (n, out_dim)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != net.in_dim:
        raise DimensionError(
            f"expected (n, {net.in_dim}) input, got {inputs.shape}")
    h = inputs
    for layer in net.layers:
        h = _apply_activation(h @ layer.weight.T + layer.bias, layer.activation)
    return h


def forward(net: FeedForwardNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.in_dim:
        raise DimensionError(f"expected ({net.in_dim},) input, got {x.shape}")
    return forward_batch(net, x[None, :])[0]


def _forward_trace(net: FeedForwardNet, inputs: np.ndarray):
    """Forward pass keeping pre-activations for backprop."""
    h = inputs
    pre = []
    post = [h]
    for layer in net.layers:
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        h = _apply_activation(z, layer.activation)
        post.append(h)
    return pre, post


def backward_batch(net: FeedForwardNet, inputs: np.ndarray,
                   output_grads: np.ndarray):
    """Batch backprop of a scalar objective whose per-output gradients are given.

    Parameter gradients are *summed* over the batch; divide by n upstream for
    mean objectives. Returns (list of (dW, db) per layer, input gradients).
    """
    inputs = np.asarray(inputs, dtype=float)
    output_grads = np.asarray(output_grads, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != net.in_dim:
        raise DimensionError(
            f"expected (n, {net.in_dim}) input, got {inputs.shape}")
    if output_grads.shape != (inputs.shape[0], net.out_dim):
        raise DimensionError(
            f"expected {(inputs.shape[0], net.out_dim)} gradient, "
            f"got {output_grads.shape}")
    pre, post = _forward_trace(net, inputs)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    g = output_grads
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation == "relu":
            g = g * (pre[i] > 0)
        grads[i] = (g.T @ post[i], g.sum(axis=0))
        g = g @ layer.weight
    return grads, g


def backward(net: FeedForwardNet, x: np.ndarray, output_grad: np.ndarray):
    """Single-input backprop; returns ([(dW, db) per layer], input gradient)."""
    x = np.asarray(x, dtype=float)
    output_grad = np.asarray(output_grad, dtype=float)
    if output_grad.shape != (net.out_dim,):
        raise DimensionError(
            f"expected ({net.out_dim},) output gradient, got {output_grad.shape}")
    grads, gin = backward_batch(net, x[None, :], output_grad[None, :])
    return grads, gin[0]


def sgd_step(net: FeedForwardNet, grads, config: SgdConfig) -> FeedForwardNet:
    """In-place SGD update p <- p - lr * grad. Returns the same net."""
    lr = config.learning_rate
    for layer, (dw, db) in zip(net.layers, grads):
        if dw.shape != layer.weight.shape or db.shape != layer.bias.shape:
            raise DimensionError("gradient shapes do not match parameters")
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise TrainingFault("non-finite gradient in sgd_step")
        layer.weight -= lr * dw
        layer.bias -= lr * db
    return net


@dataclass
class AdamState:
    """Per-layer first/second moment accumulators for Adam updates."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: FeedForwardNet) -> "AdamState":
        m = [(np.zeros_like(l.weight), np.zeros_like(l.bias))
             for l in net.layers]
        v = [(np.zeros_like(l.weight), np.zeros_like(l.bias))
             for l in net.layers]
        return cls(m=m, v=v)


def adam_step(net: FeedForwardNet, grads, config: SgdConfig,
              state: AdamState) -> FeedForwardNet:
    """In-place Adam update with bias correction. Returns the same net."""
    lr = config.learning_rate
    state.step += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for layer, (dw, db), (mw, mb), (vw, vb) in zip(net.layers, grads,
                                                   state.m, state.v):
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise TrainingFault("non-finite gradient in adam_step")
        mw[:] = b1 * mw + (1 - b1) * dw
        vw[:] = b2 * vw + (1 - b2) * dw ** 2
        mb[:] = b1 * mb + (1 - b1) * db
        vb[:] = b2 * vb + (1 - b2) * db ** 2
        layer.weight -= lr * (mw / c1) / (np.sqrt(vw / c2) + eps)
        layer.bias -= lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
    return net


def make_optimizer(net: FeedForwardNet, config: SgdConfig):
    """Closure applying one optimizer update per call, per config.optimizer."""
    if config.optimizer == "adam":
        state = AdamState.for_net(net)
        return lambda grads: adam_step(net, grads, config, state)
    return lambda grads: sgd_step(net, grads, config)


def spectral_normalize(weights: np.ndarray, power_iterations: int = 1,
                       power_vec: np.ndarray | None = None,
                       rng: np.random.Generator | None = None):
    """Divide a matrix by its power-iteration spectral-norm estimate.

    Returns (normalized matrix, updated power vector). A zero matrix is
    returned unchanged (degenerate case). Passing the previous `power_vec`
    makes single-iteration estimates converge across repeated calls.
    """
    if power_iterations < 1:
        raise ValueError("power_iterations must be >= 1")
    w = np.asarray(weights, dtype=float)
    if not np.any(w):
        return w.copy(), power_vec
    burn_in = power_vec is None
    if burn_in:
        rng = rng or np.random.default_rng(0)
        u = rng.standard_normal(w.shape[0])
        u /= np.linalg.norm(u)
        # burn in until the estimate stabilizes so even one requested
        # iteration per subsequent call stays a usable estimate
        power_iterations = max(power_iterations, 2000)
    else:
        u = power_vec
    sigma_prev = None
    for _ in range(power_iterations):
        v = w.T @ u
        v_norm = np.linalg.norm(v)
        if v_norm == 0:
            return w.copy(), u
        v /= v_norm
        u = w @ v
        u_norm = np.linalg.norm(u)
        if u_norm == 0:
            return w.copy(), u
        u /= u_norm
        if burn_in:
            sigma_now = float(u @ w @ v)
            if sigma_prev is not None and abs(sigma_now - sigma_prev) \
                    <= 1e-12 * abs(sigma_now):
                break
            sigma_prev = sigma_now
    sigma = float(u @ w @ v)
    if sigma <= 0:
        return w.copy(), u
    return w / sigma, u


def spectral_normalize_net(net: FeedForwardNet, power_iterations: int = 1) -> None:
    """Normalize every weight matrix in place, reusing persistent power vectors."""
    for layer in net.layers:
        normed, u = spectral_normalize(layer.weight, power_iterations,
                                       power_vec=layer.power_vec)
        layer.weight = normed
        layer.power_vec = u
