"""Conditional action distributions: uniform, softmax classifiers, logging-policy fits.

A policy maps a context vector to a probability vector over K actions.
Policies are immutable after construction/training and safe to evaluate
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import (
    FeedForwardNet,
    SgdConfig,
    backward_batch,
    forward_batch,
    init_net,
    make_optimizer,
    spectral_normalize_net,
)

#: probabilities of estimated policies are clamped to at least this value and
#: renormalized, so importance weights stay finite
PROB_FLOOR = 1e-4


class Policy:
    """Base interface: deterministic map context -> probability simplex."""

    n_actions: int

    def probs(self, x: np.ndarray) -> np.ndarray:
        return self.probs_matrix(np.asarray(x, dtype=float)[None, :])[0]

    def probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class UniformPolicy(Policy):
    n_actions: int

    def __post_init__(self):
        if self.n_actions < 2:
            raise ValueError("need at least 2 actions")

    def probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        n = np.asarray(contexts).shape[0]
        return np.full((n, self.n_actions), 1.0 / self.n_actions)


@dataclass
class TabularPolicy(Policy):
    """Explicit per-context probability table, for synthetic bandits and tests.

    Contexts are identified by their integer index in the first feature.
    """

    table: np.ndarray  # (n_contexts, K)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        if np.any(self.table < 0) or not np.allclose(self.table.sum(axis=1), 1.0):
            raise ValueError("rows must be probability distributions")

    @property
    def n_actions(self) -> int:
        return self.table.shape[1]

    def probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        idx = np.asarray(contexts)[:, 0].astype(int)
        return self.table[idx]


@dataclass
class SoftmaxClassifierPolicy(Policy):
    net: FeedForwardNet
    temperature: float = 1.0
    prob_floor: float = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def n_actions(self) -> int:
        return self.net.out_dim

    def probs_matrix(self, contexts: np.ndarray) -> np.ndarray:
        logits = forward_batch(self.net, contexts) / self.temperature
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        if self.prob_floor > 0:
            p = np.maximum(p, self.prob_floor)
            p /= p.sum(axis=1, keepdims=True)
        return p


def uniform_policy(n_actions: int) -> UniformPolicy:
    return UniformPolicy(n_actions)


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _train_softmax_net(contexts: np.ndarray, labels: np.ndarray, n_classes: int,
                       hidden_dims: list[int], config: SgdConfig,
                       spectral_norm: bool = True) -> FeedForwardNet:
    """Minimize multinomial log-loss with minibatch SGD."""
    contexts = np.asarray(contexts, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n, d = contexts.shape
    rng = np.random.default_rng(config.seed)
    net = init_net([d, *hidden_dims, n_classes], rng)
    step = make_optimizer(net, config)
    targets = _one_hot(labels, n_classes)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if spectral_norm:
                spectral_normalize_net(net)
            logits = forward_batch(net, contexts[idx])
            logits -= logits.max(axis=1, keepdims=True)
            p = np.exp(logits)
            p /= p.sum(axis=1, keepdims=True)
            # d(mean log-loss)/d(logits)
            g = (p - targets[idx]) / idx.shape[0]
            grads, _ = backward_batch(net, contexts[idx], g)
            step(grads)
    return net


def train_classifier_policy(contexts: np.ndarray, labels: np.ndarray,
                            n_classes: int, hidden_dims: list[int],
                            config: SgdConfig, temperature: float = 1.0,
                            prob_floor: float = PROB_FLOOR,
                            spectral_norm: bool = True) -> SoftmaxClassifierPolicy:
    """Fit a softmax classifier on fully observed (context, label) pairs."""
    contexts = np.asarray(contexts, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if contexts.shape[0] == 0:
        raise ValueError("empty dataset")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("labels out of range")
    net = _train_softmax_net(contexts, labels, n_classes, hidden_dims, config,
                             spectral_norm=spectral_norm)
    return SoftmaxClassifierPolicy(net=net, temperature=temperature,
                                   prob_floor=prob_floor)


def estimate_logging_policy(logged, hidden_dims: list[int],
                            config: SgdConfig,
                            prob_floor: float = PROB_FLOOR) -> SoftmaxClassifierPolicy:
    """Fit p-hat(a|x) by log-loss on the logged (context, action) pairs."""
    contexts = np.asarray(logged.contexts, dtype=float)
    actions = np.asarray(logged.actions, dtype=int)
    if contexts.shape[0] == 0:
        raise ValueError("empty logged dataset")
    if actions.max() >= logged.n_actions:
        raise ValueError("action index out of range")
    net = _train_softmax_net(contexts, actions, logged.n_actions, hidden_dims,
                             config)
    return SoftmaxClassifierPolicy(net=net, prob_floor=prob_floor)


def sample_action(policy: Policy, context: np.ndarray,
                  rng: np.random.Generator) -> int:
    p = policy.probs(context)
    return int(rng.choice(p.shape[0], p=p))


def sample_actions(policy: Policy, contexts: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Vectorized inverse-CDF sampling, one action per context row."""
    p = policy.probs_matrix(contexts)
    cdf = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0])
    return (u[:, None] > cdf).sum(axis=1).clip(0, p.shape[1] - 1)
