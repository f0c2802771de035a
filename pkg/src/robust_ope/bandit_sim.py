"""Supervised-to-bandit conversion and exact ground-truth policy values.

A multiclass dataset becomes a contextual bandit with binary reward
1{action == label}. Ground truth is the exact expectation of that reward
under the target policy, which reduces to the mean target probability of the
true label.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import LoggedDataset
from .policies import Policy, sample_actions


class ParseError(ValueError):
    pass


@dataclass
class LabeledDataset:
    contexts: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) int
    n_classes: int
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.contexts.shape[0] < 1:
            raise ValueError("dataset must be nonempty")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return self.contexts.shape[0]


@dataclass
class SplitConfig:
    train_fraction: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def load_csv(path, label_column: str) -> LabeledDataset:
    """Parse a comma-separated file with a header row and numeric features.

    Label values are re-indexed densely in sorted order (so e.g. character
    labels map to 0..K-1); K is the number of distinct labels.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        rows, raw_labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} "
                                 f"fields, got {len(row)}")
            raw_labels.append(row[label_idx].strip())
            feats = [v for i, v in enumerate(row) if i != label_idx]
            try:
                rows.append([float(v) for v in feats])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: non-numeric feature value") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    classes = sorted(set(raw_labels))
    index = {c: i for i, c in enumerate(classes)}
    labels = np.array([index[c] for c in raw_labels])
    return LabeledDataset(contexts=np.array(rows), labels=labels,
                          n_classes=len(classes), feature_names=feature_names)


def split(dataset: LabeledDataset,
          config: SplitConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Disjoint, exhaustive, seed-shuffled split; train size round(frac * n)."""
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    n_train = int(round(config.train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    tr, te = order[:n_train], order[n_train:]
    return (
        LabeledDataset(dataset.contexts[tr], dataset.labels[tr],
                       dataset.n_classes, dataset.feature_names),
        LabeledDataset(dataset.contexts[te], dataset.labels[te],
                       dataset.n_classes, dataset.feature_names),
    )


def standardize(train: LabeledDataset,
                *others: LabeledDataset) -> list[LabeledDataset]:
    """Zero-mean/unit-variance features using training-split statistics."""
    mean = train.contexts.mean(axis=0)
    std = train.contexts.std(axis=0)
    std[std == 0] = 1.0
    out = []
    for ds in (train, *others):
        out.append(LabeledDataset((ds.contexts - mean) / std, ds.labels,
                                  ds.n_classes, ds.feature_names))
    return out


def log_bandit_feedback(dataset: LabeledDataset, logging: Policy,
                        seed: int) -> LoggedDataset:
    """Sample one action per row from the logging policy; reward 1{a == label}.

    The logged propensity is the logging policy's exact probability of the
    sampled action.
    """
    if logging.n_actions != dataset.n_classes:
        raise ValueError("policy action count != number of classes")
    rng = np.random.default_rng(seed)
    actions = sample_actions(logging, dataset.contexts, rng)
    probs = logging.probs_matrix(dataset.contexts)
    propensities = probs[np.arange(len(dataset)), actions]
    rewards = (actions == dataset.labels).astype(float)
    return LoggedDataset(contexts=dataset.contexts, actions=actions,
                         rewards=rewards, n_actions=dataset.n_classes,
                         propensities=propensities)


def true_value(dataset: LabeledDataset, target: Policy) -> float:
    """Exact V under the target policy: mean of pi(label | x) over rows."""
    probs = target.probs_matrix(dataset.contexts)
    return float(np.mean(probs[np.arange(len(dataset)), dataset.labels]))


@dataclass
class SyntheticBandit:
    """Finite context set with an explicit reward table, for exact enumeration.

    Contexts are one-dimensional integer ids so TabularPolicy rows line up.
    """

    reward_table: np.ndarray  # (n_contexts, K)
    context_probs: np.ndarray  # (n_contexts,)

    def __post_init__(self):
        self.reward_table = np.asarray(self.reward_table, dtype=float)
        self.context_probs = np.asarray(self.context_probs, dtype=float)
        if not np.isclose(self.context_probs.sum(), 1.0):
            raise ValueError("context probabilities must sum to 1")

    @property
    def n_contexts(self) -> int:
        return self.reward_table.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward_table.shape[1]

    def contexts_matrix(self) -> np.ndarray:
        return np.arange(self.n_contexts, dtype=float)[:, None]

    def exact_value(self, policy: Policy) -> float:
        """V by exact enumeration over contexts and actions."""
        pi = policy.probs_matrix(self.contexts_matrix())
        return float(np.sum(self.context_probs[:, None] * pi
                            * self.reward_table))

    def sample_logged(self, n: int, logging: Policy,
                      rng: np.random.Generator) -> LoggedDataset:
        ctx_ids = rng.choice(self.n_contexts, size=n, p=self.context_probs)
        contexts = ctx_ids.astype(float)[:, None]
        actions = sample_actions(logging, contexts, rng)
        rewards = self.reward_table[ctx_ids, actions]
        probs = logging.probs_matrix(contexts)
        propensities = probs[np.arange(n), actions]
        lo, hi = float(self.reward_table.min()), float(self.reward_table.max())
        return LoggedDataset(contexts=contexts, actions=actions,
                             rewards=rewards, n_actions=self.n_actions,
                             propensities=propensities,
                             r_min=min(lo, 0.0), r_max=max(hi, 1.0))


def make_synthetic(n_contexts: int, n_actions: int,
                   seed: int = 0) -> SyntheticBandit:
    """Random small bandit with rewards in [0, 1] and uniform context draw."""
    if n_contexts > 50 or n_actions > 5:
        raise ValueError("synthetic bandits are meant to stay enumerable")
    rng = np.random.default_rng(seed)
    table = rng.random((n_contexts, n_actions))
    probs = np.full(n_contexts, 1.0 / n_contexts)
    return SyntheticBandit(reward_table=table, context_probs=probs)


def make_synthetic_labeled(n: int, d: int, n_classes: int,
                           seed: int = 0, spread: float = 2.0) -> LabeledDataset:
    """Gaussian class blobs, for end-to-end runs without a CSV on disk."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, spread, size=(n_classes, d))
    labels = rng.integers(0, n_classes, size=n)
    contexts = centers[labels] + rng.standard_normal((n, d))
    return LabeledDataset(contexts=contexts, labels=labels,
                          n_classes=n_classes)
