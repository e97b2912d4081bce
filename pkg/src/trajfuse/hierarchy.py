"""Rank semantics of a rule hierarchy and the induced branch distribution.

A trajectory's rank is determined by which rules it satisfies, with more
important rules dominating: rank = 1 + sum_i violated_i * 2^(n-i) for rules
i = 1..n in decreasing importance (rank 1 is best, 2^n is worst).

The scalar reward

    R(rho) = sum_i ( a^(n-i+1) * step(rho_i) + (1/n) * rho_i ),   a > 2

preserves that ordering whenever the robustness components are bounded by 1
in magnitude: the geometric weights separate rank classes while the linear
term breaks ties within a class by total robustness. Components are clamped
to [-1, 1] before evaluation to keep the bound unconditional.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import ValidationError
from .rules import N_RULES, RobustnessVector
from .validation import check_count, check_positive, check_simplex

DEFAULT_REWARD_BASE = 4.0
DEFAULT_TEMPERATURE = 1.0


@dataclass(frozen=True)
class HierarchyConfig:
    """Rule count, reward base (> 2), and Boltzmann temperature (> 0)."""

    n: int = N_RULES
    base: float = DEFAULT_REWARD_BASE
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        check_count("n", self.n, minimum=1)
        if not np.isfinite(self.base) or self.base <= 2.0:
            raise ValidationError(f"reward base must be > 2, got {self.base}")
        check_positive("temperature", self.temperature)


@dataclass(frozen=True)
class BranchScores:
    """Rewards and the induced sampling distribution over tree branches."""

    rewards: Tuple[float, ...]
    probabilities: Tuple[float, ...]

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=float)
        if r.ndim != 1 or r.size < 1 or not np.all(np.isfinite(r)):
            raise ValidationError("rewards must be a non-empty finite vector")
        check_simplex("probabilities", self.probabilities, n=r.size)
        object.__setattr__(self, "rewards", tuple(float(x) for x in r))
        object.__setattr__(self, "probabilities",
                           tuple(float(p) for p in self.probabilities))

    @property
    def k(self) -> int:
        return len(self.rewards)


def _rho_matrix(rho) -> np.ndarray:
    if isinstance(rho, RobustnessVector):
        rho = rho.as_array()
    arr = np.atleast_2d(np.asarray(rho, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValidationError("robustness values must be finite")
    return arr


def rank(rho) -> int:
    """Rank of a robustness vector; rho_i < 0 counts as a violation.

    For two rules this is the classic table: (sat, sat) -> 1,
    (sat, viol) -> 2, (viol, sat) -> 3, (viol, viol) -> 4.
    """
    values = _rho_matrix(rho)[0]
    n = values.size
    weights = 2 ** np.arange(n - 1, -1, -1)
    return int(1 + ((values < 0.0) * weights).sum())


def reward_batch(rho_matrix: np.ndarray, cfg: HierarchyConfig) -> np.ndarray:
    """Rank-preserving rewards for (K, n) robustness rows."""
    rho = _rho_matrix(rho_matrix)
    n = rho.shape[1]
    if n != cfg.n:
        raise ValidationError(f"robustness has {n} rules, config expects {cfg.n}")
    clamped = np.clip(rho, -1.0, 1.0)
    powers = cfg.base ** np.arange(n, 0, -1)  # a^n .. a^1 for i = 1..n
    satisfied = (clamped >= 0.0).astype(float)
    return satisfied @ powers + clamped.sum(axis=1) / n


def reward(rho, cfg: HierarchyConfig) -> float:
    """Scalar rank-preserving reward of one robustness vector."""
    return float(reward_batch(_rho_matrix(rho), cfg)[0])


def boltzmann(rewards, temperature: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    """softmax(rewards / temperature), computed in the log domain.

    Max subtraction keeps the exponentials finite: with four rules and
    base 4 rewards reach ~341, far past exp overflow at unit temperature.
    """
    check_positive("temperature", temperature)
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ValidationError(f"rewards must be a non-empty vector, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValidationError("rewards must be finite")
    z = r / temperature
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def score_branches(rho_matrix: np.ndarray, cfg: HierarchyConfig) -> BranchScores:
    """Rewards plus Boltzmann probabilities for a robustness matrix."""
    rewards = reward_batch(rho_matrix, cfg)
    probs = boltzmann(rewards, cfg.temperature)
    return BranchScores(tuple(rewards), tuple(probs))
