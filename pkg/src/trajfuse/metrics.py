"""Prediction-quality metrics over sampled futures and ground truth.

Displacement metrics use planar positions only. Mean variants average over
all samples; min variants keep the best sample and therefore reward
multimodal coverage. CVaR at level q is the mean of the worst ceil(q * M)
scene values; MDB is a predictor's average percentage gap to the per-metric
best predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .core import Trajectory, TrajectorySamples, ValidationError
from .validation import check_samples, check_unit_interval

METRIC_NAMES = ("ade", "fde", "min_ade", "min_fde")
CVAR_LEVEL = 0.1


def _displacements(samples: TrajectorySamples, truth: Trajectory) -> np.ndarray:
    """(N, T) distances between each sample state and the true state."""
    check_samples(samples)
    if len(truth) != samples.horizon:
        raise ValidationError(
            f"truth covers {len(truth)} steps, samples cover {samples.horizon}")
    if truth.start_step != samples.start_step:
        raise ValidationError(
            f"truth starts at step {truth.start_step}, samples at {samples.start_step}")
    if abs(truth.dt - samples.dt) > 1e-12:
        raise ValidationError(f"truth dt {truth.dt} != samples dt {samples.dt}")
    diff = samples.positions - truth.positions[None, :, :]
    return np.hypot(diff[:, :, 0], diff[:, :, 1])


def ade(samples: TrajectorySamples, truth: Trajectory) -> float:
    """Mean distance error over all samples and steps."""
    return float(_displacements(samples, truth).mean())


def fde(samples: TrajectorySamples, truth: Trajectory) -> float:
    """Mean distance error at the final step."""
    return float(_displacements(samples, truth)[:, -1].mean())


def min_ade(samples: TrajectorySamples, truth: Trajectory) -> float:
    """Smallest per-sample mean distance error."""
    return float(_displacements(samples, truth).mean(axis=1).min())


def min_fde(samples: TrajectorySamples, truth: Trajectory) -> float:
    """Smallest final-step distance error."""
    return float(_displacements(samples, truth)[:, -1].min())


@dataclass(frozen=True)
class SceneMetrics:
    """All four displacement metrics of one predictor on one scene."""

    scene_id: str
    predictor_label: str
    ade: float
    fde: float
    min_ade: float
    min_fde: float

    def __post_init__(self):
        vals = (self.ade, self.fde, self.min_ade, self.min_fde)
        if any(v < 0.0 or not np.isfinite(v) for v in vals):
            raise ValidationError("scene metrics must be finite and >= 0")
        if self.min_ade > self.ade + 1e-12 or self.min_fde > self.fde + 1e-12:
            raise ValidationError("min metrics cannot exceed their mean variants")

    def value(self, name: str) -> float:
        return getattr(self, name)


def scene_metrics(samples: TrajectorySamples, truth: Trajectory,
                  scene_id: str) -> SceneMetrics:
    d = _displacements(samples, truth)
    per_sample_mean = d.mean(axis=1)
    return SceneMetrics(scene_id=scene_id, predictor_label=samples.source_label,
                        ade=float(per_sample_mean.mean()),
                        fde=float(d[:, -1].mean()),
                        min_ade=float(per_sample_mean.min()),
                        min_fde=float(d[:, -1].min()))


def cvar(values: Sequence[float], level: float = CVAR_LEVEL) -> float:
    """Mean of the k = ceil(level * M) largest values (no interpolation)."""
    check_unit_interval("level", level, open_left=True, open_right=True)
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("cvar needs a non-empty 1-d value vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("cvar input must be finite")
    k = math.ceil(level * arr.size)
    tail = np.sort(arr)[-k:]
    return float(tail.mean())


def mdb(metric_values: Mapping[str, Sequence[float]]) -> Dict[str, float]:
    """Mean percentage difference from the per-metric best predictor.

    metric_values maps predictor label -> J metric values in a shared
    order. All values must be positive; a non-positive column best would
    make the percentage ill-defined, so it raises instead.
    """
    if not metric_values:
        raise ValidationError("mdb needs at least one predictor")
    labels = sorted(metric_values)
    matrix = np.asarray([metric_values[lab] for lab in labels], dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise ValidationError("every predictor needs the same non-empty metric list")
    best = matrix.min(axis=0)
    if np.any(best <= 0.0) or not np.all(np.isfinite(matrix)):
        raise ValidationError("mdb requires strictly positive, finite metrics")
    pct = ((matrix - best[None, :]) / best[None, :]).mean(axis=1) * 100.0
    return {lab: float(p) for lab, p in zip(labels, pct)}


@dataclass(frozen=True)
class PredictorSummary:
    """Mean, tail, and spread statistics of one predictor over many scenes."""

    mean: Dict[str, float]
    cvar: Dict[str, float]
    sem: Dict[str, float]
    n_scenes: int
    mdb_pct: float = float("nan")


@dataclass
class MetricTable:
    """Per-predictor summary rows plus the MDB comparison column."""

    rows: Dict[str, PredictorSummary] = field(default_factory=dict)
    cvar_level: float = CVAR_LEVEL

    def labels(self) -> List[str]:
        return sorted(self.rows)

    def to_dict(self) -> dict:
        return {
            "cvar_level": self.cvar_level,
            "predictors": {
                label: {
                    "mean": dict(row.mean),
                    "cvar": dict(row.cvar),
                    "sem": dict(row.sem),
                    "n_scenes": row.n_scenes,
                    "mdb_pct": row.mdb_pct,
                }
                for label, row in sorted(self.rows.items())
            },
        }


def build_metric_table(records: Sequence[SceneMetrics],
                       cvar_level: float = CVAR_LEVEL) -> MetricTable:
    """Aggregate per-scene records into the summary table.

    The MDB column spans all eight summary statistics (mean and CVaR of
    each displacement metric) across the predictors present.
    """
    if not records:
        raise ValidationError("cannot summarize an empty record set")
    by_label: Dict[str, List[SceneMetrics]] = {}
    for rec in records:
        by_label.setdefault(rec.predictor_label, []).append(rec)
    table = MetricTable(cvar_level=cvar_level)
    summary_vectors: Dict[str, List[float]] = {}
    for label, recs in sorted(by_label.items()):
        means, cvars, sems = {}, {}, {}
        for name in METRIC_NAMES:
            vals = np.asarray([r.value(name) for r in recs])
            means[name] = float(vals.mean())
            cvars[name] = cvar(vals, cvar_level)
            sems[name] = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        table.rows[label] = PredictorSummary(mean=means, cvar=cvars, sem=sems,
                                             n_scenes=len(recs))
        summary_vectors[label] = [means[n] for n in METRIC_NAMES] + \
                                 [cvars[n] for n in METRIC_NAMES]
    mdb_by_label = mdb(summary_vectors)
    for label, row in table.rows.items():
        table.rows[label] = PredictorSummary(mean=row.mean, cvar=row.cvar,
                                             sem=row.sem, n_scenes=row.n_scenes,
                                             mdb_pct=mdb_by_label[label])
    return table
