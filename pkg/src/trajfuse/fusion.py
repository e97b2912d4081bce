"""Online fusion of a learned and a rule-based predictor.

A two-component belief tracks which predictor currently explains the target
agent best. Every step, each predictor's stored one-step-ahead samples are
scored against the newly observed state through a negative-exponential
performance metric; the tempered likelihood ratio updates the belief, which
is then mixed with the prior to account for behavior switches:

    alpha   = (Gamma_learned * b_l) / (Gamma_rule * b_r)
    sigma   = alpha^eta / (1 + alpha^eta)
    b_next  = (1 - gamma) * [sigma, 1 - sigma] + gamma * b0

Fused predictions draw sample counts from the belief and concatenate the
corresponding prefixes of each predictor's i.i.d. sample sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .core import (AgentState, PredictionScene, TrajectorySamples,
                   ValidationError, derive_seed)
from .predictors import TrajectoryPredictor
from .validation import (check_count, check_positive, check_scene,
                         check_simplex, check_unit_interval)

DEFAULT_ETA = 0.1
DEFAULT_GAMMA = 0.02
DEFAULT_PRIOR = (0.5, 0.5)
DEFAULT_SHARPNESS = 1.0  # 1/meters
FUSED_LABEL = "fused"


@dataclass(frozen=True)
class Belief:
    """Probability split between the learned (b_l) and rule-based (b_r) model."""

    b_l: float
    b_r: float

    def __post_init__(self):
        if not np.isfinite([self.b_l, self.b_r]).all():
            raise ValidationError("belief components must be finite")
        if self.b_l < 0.0 or self.b_r < 0.0:
            raise ValidationError("belief components must be >= 0")
        if abs(self.b_l + self.b_r - 1.0) > 1e-12:
            raise ValidationError(f"belief must sum to 1, got {self.b_l + self.b_r!r}")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.b_l, self.b_r)


@dataclass(frozen=True)
class FuserConfig:
    """Learning rate, switch probability, prior belief, and evidence sharpness."""

    eta: float = DEFAULT_ETA
    gamma: float = DEFAULT_GAMMA
    prior: Tuple[float, float] = DEFAULT_PRIOR
    sharpness: float = DEFAULT_SHARPNESS

    def __post_init__(self):
        check_unit_interval("eta", self.eta, open_left=True)
        check_unit_interval("gamma", self.gamma, open_left=True, open_right=True)
        check_positive("sharpness", self.sharpness)
        check_simplex("prior", self.prior, n=2)
        object.__setattr__(self, "prior", (float(self.prior[0]), float(self.prior[1])))

    @property
    def prior_belief(self) -> Belief:
        return Belief(*self.prior)


def perf_metric(one_step_predictions, observed: AgentState,
                sharpness: float = DEFAULT_SHARPNESS) -> float:
    """exp(-sharpness * min distance) between predictions and the observation.

    Strictly positive and bounded by 1, so it is usable as a likelihood
    surrogate. The min over samples rewards multimodal coverage: one good
    mode near the observation is enough.
    """
    check_positive("sharpness", sharpness)
    preds = np.asarray(one_step_predictions, dtype=float)
    if preds.ndim != 2 or preds.shape[0] < 1 or preds.shape[1] < 2:
        raise ValidationError(f"one-step predictions must be (N, >=2), got {preds.shape}")
    d = np.hypot(preds[:, 0] - observed.x, preds[:, 1] - observed.y)
    return float(np.exp(-sharpness * d.min()))


def likelihood_ratio(gamma_learned: float, gamma_rule: float, belief: Belief) -> float:
    """alpha = (Gamma_learned * b_l) / (Gamma_rule * b_r)."""
    if gamma_rule <= 0.0 or gamma_learned <= 0.0:
        raise ValidationError("performance metrics must be > 0")
    if belief.b_r <= 0.0:
        raise ValidationError("rule-model belief must be > 0 to form the ratio")
    return (gamma_learned * belief.b_l) / (gamma_rule * belief.b_r)


def belief_update(belief: Belief, alpha: float, cfg: FuserConfig) -> Belief:
    """Tempered Bayes step followed by prior mixing.

    With an interior prior the output components stay inside
    [gamma * min(prior), 1 - gamma * min(prior)], so the belief can never
    collapse to a point mass and always recovers after behavior switches.
    """
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValidationError(f"likelihood ratio must be positive and finite, got {alpha}")
    # sigma = a^eta / (1 + a^eta), computed via the log for overflow safety
    log_a_eta = cfg.eta * np.log(alpha)
    sigma = float(1.0 / (1.0 + np.exp(-log_a_eta)))
    b_l = (1.0 - cfg.gamma) * sigma + cfg.gamma * cfg.prior[0]
    b_r = (1.0 - cfg.gamma) * (1.0 - sigma) + cfg.gamma * cfg.prior[1]
    return Belief(b_l, b_r)


def belief_sample_counts(belief: Belief, n_samples: int, seed: int) -> Tuple[int, int]:
    """Counts from n_samples independent Bernoulli(b_l) draws."""
    check_count("n_samples", n_samples)
    rng = np.random.default_rng(seed)
    n_learned = int(rng.binomial(n_samples, belief.b_l))
    return n_learned, n_samples - n_learned


def fuse(samples_learned: TrajectorySamples, samples_rule: TrajectorySamples,
         n_learned: int, n_rule: int, label: str = FUSED_LABEL) -> TrajectorySamples:
    """First n_learned of the learned set followed by first n_rule of the rule set.

    Taking prefixes is distribution-equivalent to re-sampling because each
    set is i.i.d.; it also keeps the fused output deterministic.
    """
    if n_learned < 0 or n_rule < 0:
        raise ValidationError("sample counts must be >= 0")
    if n_learned > samples_learned.n or n_rule > samples_rule.n:
        raise ValidationError(
            f"requested {n_learned}+{n_rule} samples from sets of size "
            f"{samples_learned.n} and {samples_rule.n}")
    if n_learned + n_rule < 1:
        raise ValidationError("fused output needs at least one sample")
    if samples_learned.horizon != samples_rule.horizon:
        raise ValidationError("sample sets must share the horizon")
    if abs(samples_learned.dt - samples_rule.dt) > 1e-12 \
            or samples_learned.start_step != samples_rule.start_step:
        raise ValidationError("sample sets must share dt and start step")
    merged = np.concatenate([samples_learned.array[:n_learned],
                             samples_rule.array[:n_rule]], axis=0)
    return TrajectorySamples(merged, start_step=samples_learned.start_step,
                             dt=samples_learned.dt, source_label=label)


@dataclass(frozen=True)
class FusionStep:
    """Outcome of one fusion step: belief state plus all three sample sets."""

    t: int
    belief: Belief
    alpha: Optional[float]
    learned: TrajectorySamples
    rule: TrajectorySamples
    fused: TrajectorySamples
    n_learned: int
    n_rule: int


class MultiPredictorFusion(BaseEstimator):
    """Belief-weighted mixture of a learned and a rule-based predictor.

    Holds the per-episode recursion state (belief and stored one-step
    predictions); call reset() at every episode start. step() runs one
    full cycle: belief update from the scene's current state, sampling
    from both predictors, and fused sample construction. Sub-seeds are
    derived from the step seed and each predictor's label so the
    standalone draws do not depend on the fuser configuration.
    """

    label = FUSED_LABEL

    def __init__(self, learned: TrajectoryPredictor = None,
                 rule_based: TrajectoryPredictor = None,
                 eta: float = DEFAULT_ETA, gamma: float = DEFAULT_GAMMA,
                 prior: Tuple[float, float] = DEFAULT_PRIOR,
                 sharpness: float = DEFAULT_SHARPNESS):
        self.learned = learned
        self.rule_based = rule_based
        self.eta = eta
        self.gamma = gamma
        self.prior = prior
        self.sharpness = sharpness
        self.reset()

    def config(self) -> FuserConfig:
        return FuserConfig(eta=self.eta, gamma=self.gamma, prior=tuple(self.prior),
                           sharpness=self.sharpness)

    def reset(self) -> "MultiPredictorFusion":
        """Start a new episode: belief back to the prior, histories cleared."""
        self.belief_ = self.config().prior_belief
        self.learned_onestep_ = None
        self.rule_onestep_ = None
        self.last_t_ = None
        return self

    def observe(self, observed: AgentState) -> Optional[float]:
        """Update the belief from an observed state; returns alpha, or None
        when no one-step predictions are stored yet."""
        if self.learned_onestep_ is None or self.rule_onestep_ is None:
            return None
        cfg = self.config()
        g_l = perf_metric(self.learned_onestep_, observed, cfg.sharpness)
        g_r = perf_metric(self.rule_onestep_, observed, cfg.sharpness)
        alpha = likelihood_ratio(g_l, g_r, self.belief_)
        self.belief_ = belief_update(self.belief_, alpha, cfg)
        return alpha

    def step(self, scene: PredictionScene, n_samples: int, horizon: int,
             seed: int) -> FusionStep:
        if self.learned is None or self.rule_based is None:
            raise ValidationError("fusion needs both a learned and a rule-based predictor")
        check_scene(scene)
        if self.last_t_ is not None and scene.t != self.last_t_ + 1:
            raise ValidationError(
                f"scenes must be consecutive: step t={scene.t} after t={self.last_t_}")
        alpha = self.observe(scene.current_state)
        samples_l = self.learned.sample(scene, n_samples, horizon,
                                        derive_seed(seed, self.learned.label))
        samples_r = self.rule_based.sample(scene, n_samples, horizon,
                                           derive_seed(seed, self.rule_based.label))
        self.learned_onestep_ = samples_l.first_step_positions()
        self.rule_onestep_ = samples_r.first_step_positions()
        self.last_t_ = scene.t
        n_l, n_r = belief_sample_counts(self.belief_, n_samples,
                                        derive_seed(seed, "belief"))
        fused = fuse(samples_l, samples_r, n_l, n_r, label=self.label)
        return FusionStep(t=scene.t, belief=self.belief_, alpha=alpha,
                          learned=samples_l, rule=samples_r, fused=fused,
                          n_learned=n_l, n_rule=n_r)

    def sample(self, scene: PredictionScene, n_samples: int, horizon: int,
               seed: int) -> TrajectorySamples:
        return self.step(scene, n_samples, horizon, seed).fused
