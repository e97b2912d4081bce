"""Signed robustness margins for the four-rule driving hierarchy.

Each rule is an "always" formula over the trajectory horizon, so its
robustness is the minimum over steps of the per-step predicate margin:
positive iff the rule holds on the whole trajectory, with magnitude
measuring how comfortably it holds or how badly it fails.

Rule order, most important first: collision clearance, lane corridor,
orientation along the lane, speed limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import Lane, PredictionScene, Trajectory, ValidationError
from .geometry import wrap_angle
from .validation import check_positive

DEFAULT_D_SAFE = 2.0
DEFAULT_LAT_MAX = 1.75
DEFAULT_THETA_MAX = np.pi / 4
DEFAULT_V_MARGIN_REF = 5.0
DEFAULT_CLEAR_CAP = 1e6

N_RULES = 4


@dataclass(frozen=True)
class RuleParams:
    """Thresholds and normalization scales for the rule hierarchy.

    clear_cap is the robustness assigned to the collision rule when there
    is nobody to collide with (vacuous satisfaction).
    """

    d_safe: float = DEFAULT_D_SAFE
    lat_max: float = DEFAULT_LAT_MAX
    theta_max: float = DEFAULT_THETA_MAX
    v_margin_ref: float = DEFAULT_V_MARGIN_REF
    clear_cap: float = DEFAULT_CLEAR_CAP

    def __post_init__(self):
        for name in ("d_safe", "lat_max", "theta_max", "v_margin_ref", "clear_cap"):
            check_positive(name, getattr(self, name))


@dataclass(frozen=True)
class RobustnessVector:
    """Per-rule robustness values ordered by decreasing rule importance."""

    values: Tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValidationError("robustness vector must be non-empty")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("robustness values must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


# ---------------------------------------------------------------------------
# Batch kernels. positions are (K, T, 2); headings and speeds are (K, T);
# others are (A, T, 2). All return a (K,) margin vector.
# ---------------------------------------------------------------------------

def batch_collision(positions: np.ndarray, others: np.ndarray, d_safe: float,
                    clear_cap: float = DEFAULT_CLEAR_CAP) -> np.ndarray:
    k = positions.shape[0]
    others = np.asarray(others, dtype=float)
    if others.size == 0:
        return np.full(k, float(clear_cap))
    if others.shape[1] != positions.shape[1]:
        raise ValidationError(
            f"extrapolations cover {others.shape[1]} steps, trajectories cover "
            f"{positions.shape[1]}")
    diff = positions[:, None, :, :] - others[None, :, :, :]  # (K, A, T, 2)
    dist = np.sqrt(np.einsum("katc,katc->kat", diff, diff))
    return dist.min(axis=(1, 2)) - d_safe


def batch_lane_follow(positions: np.ndarray, lane: Lane, lat_max: float) -> np.ndarray:
    k, t = positions.shape[:2]
    _, lateral, _ = lane.path.project(positions.reshape(-1, 2))
    worst = np.abs(lateral).reshape(k, t).max(axis=1)
    return lat_max - worst


def batch_orientation(positions: np.ndarray, headings: np.ndarray, lane: Lane,
                      theta_max: float) -> np.ndarray:
    k, t = positions.shape[:2]
    _, _, tangent = lane.path.project(positions.reshape(-1, 2))
    err = np.abs(wrap_angle(headings.reshape(-1) - tangent)).reshape(k, t)
    return theta_max - err.max(axis=1)


def batch_speed(speeds: np.ndarray, v_limit: float) -> np.ndarray:
    return v_limit - speeds.max(axis=1)


def batch_robustness(positions: np.ndarray, headings: np.ndarray, speeds: np.ndarray,
                     others: np.ndarray, lane: Lane, params: RuleParams) -> np.ndarray:
    """(K, 4) matrix of normalized robustness values, one row per trajectory.

    Raw margins are divided by per-rule scales so every component is O(1)
    before entering the rank-preserving reward, where they are summed
    across otherwise incomparable units.
    """
    rho = np.stack([
        batch_collision(positions, others, params.d_safe, params.clear_cap) / params.d_safe,
        batch_lane_follow(positions, lane, params.lat_max) / params.lat_max,
        batch_orientation(positions, headings, lane, params.theta_max) / params.theta_max,
        batch_speed(speeds, lane.speed_limit) / params.v_margin_ref,
    ], axis=1)
    return rho


# ---------------------------------------------------------------------------
# Single-trajectory API.
# ---------------------------------------------------------------------------

def _as_batch(traj: Trajectory):
    return traj.positions[None], traj.headings[None], traj.speeds[None]


def rob_collision(traj: Trajectory, others, d_safe: float = DEFAULT_D_SAFE,
                  clear_cap: float = DEFAULT_CLEAR_CAP) -> float:
    """Min over steps and agents of (center distance - d_safe).

    `others` holds per-agent positions over the same steps as `traj`,
    shaped (A, T, 2) (or an empty sequence for a clear scene).
    """
    positions, _, _ = _as_batch(traj)
    others = np.asarray(others, dtype=float)
    if others.size:
        others = others.reshape(others.shape[0], -1, 2)
    return float(batch_collision(positions, others, d_safe, clear_cap)[0])


def rob_lane_follow(traj: Trajectory, lane: Lane, lat_max: float = DEFAULT_LAT_MAX) -> float:
    """Min over steps of (lat_max - |lateral offset to the lane centerline|)."""
    positions, _, _ = _as_batch(traj)
    return float(batch_lane_follow(positions, lane, lat_max)[0])


def rob_orientation(traj: Trajectory, lane: Lane,
                    theta_max: float = DEFAULT_THETA_MAX) -> float:
    """Min over steps of (theta_max - |heading error to the lane tangent|)."""
    positions, headings, _ = _as_batch(traj)
    return float(batch_orientation(positions, headings, lane, theta_max)[0])


def rob_speed(traj: Trajectory, v_limit: float) -> float:
    """Min over steps of (v_limit - speed)."""
    _, _, speeds = _as_batch(traj)
    return float(batch_speed(speeds, v_limit)[0])


def constant_velocity_extrapolation(scene: PredictionScene, horizon: int) -> np.ndarray:
    """Straight-line rollouts of every non-target agent from its state at t.

    Returns (A, horizon, 2) positions for steps t+1..t+horizon; A may be 0.
    """
    rows = []
    for _, history in sorted(scene.other_agents().items()):
        state = history.states[-1]
        steps = np.arange(1, horizon + 1)[:, None] * scene.dt
        rows.append(state.position[None, :] + steps * state.velocity()[None, :])
    if not rows:
        return np.zeros((0, horizon, 2))
    return np.stack(rows)


def robustness_vector(traj: Trajectory, scene: PredictionScene, lane: Lane,
                      params: RuleParams = RuleParams()) -> RobustnessVector:
    """Normalized robustness of all four rules for one candidate trajectory.

    Other agents are extrapolated at constant velocity over the candidate's
    steps for the collision rule.
    """
    others = constant_velocity_extrapolation(scene, len(traj))
    positions, headings, speeds = _as_batch(traj)
    rho = batch_robustness(positions, headings, speeds, others, lane, params)
    return RobustnessVector(tuple(rho[0]))
