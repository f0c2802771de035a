"""Logged bandit data container shared across modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LoggedDataset:
    """Records of (context, chosen action, observed reward, optional propensity).

    `propensities`, when present, holds the logging policy's probability of
    the logged action and takes precedence over evaluating a logging Policy.
    """

    contexts: np.ndarray  # (n, d)
    actions: np.ndarray  # (n,) int
    rewards: np.ndarray  # (n,)
    n_actions: int
    propensities: np.ndarray | None = None  # (n,)
    r_min: float = 0.0
    r_max: float = 1.0

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=float)
        self.actions = np.asarray(self.actions, dtype=int)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.propensities is not None:
            self.propensities = np.asarray(self.propensities, dtype=float)
        n = self.contexts.shape[0]
        if self.actions.shape != (n,) or self.rewards.shape != (n,):
            raise ValueError("misaligned record arrays")
        if n and (self.actions.min() < 0 or self.actions.max() >= self.n_actions):
            raise ValueError("action index out of range")
        if n and (self.rewards.min() < self.r_min - 1e-12
                  or self.rewards.max() > self.r_max + 1e-12):
            raise ValueError("reward outside [r_min, r_max]")
        if self.propensities is not None:
            if self.propensities.shape != (n,):
                raise ValueError("misaligned propensities")
            if n and (self.propensities.min() <= 0 or self.propensities.max() > 1):
                raise ValueError("propensities must lie in (0, 1]")

    def __len__(self) -> int:
        return self.contexts.shape[0]
