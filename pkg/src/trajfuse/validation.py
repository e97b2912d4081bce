"""Input validation helpers used at public API boundaries."""

from __future__ import annotations

import numpy as np

from .core import PredictionScene, TrajectorySamples, ValidationError


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValidationError(f"{name} must be a positive finite number, got {value}")
    return value


def check_non_negative(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0:
        raise ValidationError(f"{name} must be a non-negative finite number, got {value}")
    return value


def check_count(name: str, value: int, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_unit_interval(name: str, value: float, *, open_left: bool = False,
                        open_right: bool = False) -> float:
    value = float(value)
    lo_ok = value > 0.0 if open_left else value >= 0.0
    hi_ok = value < 1.0 if open_right else value <= 1.0
    if not (np.isfinite(value) and lo_ok and hi_ok):
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise ValidationError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def check_simplex(name: str, weights, n: int | None = None, tol: float = 1e-9) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or (n is not None and w.shape[0] != n):
        raise ValidationError(f"{name} must be a length-{n} vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValidationError(f"{name} must be non-negative and finite")
    if abs(float(w.sum()) - 1.0) > tol:
        raise ValidationError(f"{name} must sum to 1, got {w.sum()!r}")
    return w


def check_finite_array(name: str, values, shape_hint: str = "") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if shape_hint:
        pass  # shape is validated by callers that know the expected layout
    return arr


def check_scene(scene: PredictionScene, history_steps: int | None = None) -> PredictionScene:
    if not isinstance(scene, PredictionScene):
        raise ValidationError(f"expected a PredictionScene, got {type(scene).__name__}")
    if history_steps is not None and len(scene.target_history) != history_steps + 1:
        raise ValidationError(
            f"scene at t={scene.t}: target history has {len(scene.target_history)} states, "
            f"expected {history_steps + 1}")
    return scene


def check_samples(samples: TrajectorySamples, n: int | None = None,
                  horizon: int | None = None, dt: float | None = None) -> TrajectorySamples:
    if not isinstance(samples, TrajectorySamples):
        raise ValidationError(f"expected TrajectorySamples, got {type(samples).__name__}")
    if n is not None and samples.n != n:
        raise ValidationError(f"expected {n} samples, got {samples.n}")
    if horizon is not None and samples.horizon != horizon:
        raise ValidationError(f"expected horizon {horizon}, got {samples.horizon}")
    if dt is not None and abs(samples.dt - dt) > 1e-12:
        raise ValidationError(f"expected dt {dt}, got {samples.dt}")
    return samples
