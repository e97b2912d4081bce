"""Lane selection and spline-based trajectory-tree generation.

A tree is a fan of K = |lateral offsets| x |speed fractions| branches rooted
at the agent's current pose. Each branch is a cubic Hermite curve whose end
point sits at a lateral target relative to the selected lane's centerline,
reached after the travel distance implied by a linear speed profile from the
current speed to a fraction of the lane's speed limit. Tangent magnitudes
encode the boundary speeds, so on straight lanes the realized speed profile
is exactly the linear one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import AgentState, Lane, LaneMap, ValidationError
from .geometry import left_normal, wrap_angle
from .validation import check_count, check_positive

DEFAULT_LATERAL_OFFSETS = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
DEFAULT_SPEED_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_ORIENTATION_WEIGHT = 2.0  # meters per radian of heading error

_TINY = 1e-12


@dataclass(frozen=True)
class TreeConfig:
    """Branch grid and sampling parameters for tree generation."""

    lateral_offsets: Tuple[float, ...] = DEFAULT_LATERAL_OFFSETS
    speed_fractions: Tuple[float, ...] = DEFAULT_SPEED_FRACTIONS
    horizon: int = 8
    dt: float = 0.5
    orientation_weight: float = DEFAULT_ORIENTATION_WEIGHT

    def __post_init__(self):
        object.__setattr__(self, "lateral_offsets",
                           tuple(float(v) for v in self.lateral_offsets))
        object.__setattr__(self, "speed_fractions",
                           tuple(float(v) for v in self.speed_fractions))
        if not self.lateral_offsets or not self.speed_fractions:
            raise ValidationError("tree needs at least one offset and one speed fraction")
        if min(self.speed_fractions) < 0.0:
            raise ValidationError("speed fractions must be >= 0")
        check_count("horizon", self.horizon, minimum=1)
        check_positive("dt", self.dt)
        check_positive("orientation_weight", self.orientation_weight)

    @property
    def k(self) -> int:
        return len(self.lateral_offsets) * len(self.speed_fractions)


def select_lane(state: AgentState, lane_map: LaneMap,
                orientation_weight: float = DEFAULT_ORIENTATION_WEIGHT) -> Lane:
    """Nearest lane by lateral distance plus weighted heading misalignment.

    Exact ties go to the smaller lane id.
    """
    best_lane = None
    best_score = np.inf
    for lane in lane_map:  # sorted by id
        proj = lane.path.project_point(state.position)
        score = abs(proj.lateral_offset) + orientation_weight * abs(
            wrap_angle(state.heading - proj.tangent_heading))
        if score < best_score:
            best_score = score
            best_lane = lane
    return best_lane


def build_tree(state: AgentState, lane: Lane, cfg: TreeConfig) -> np.ndarray:
    """(K, T, 4) branch array with columns (x, y, heading, v).

    Branch order is the cartesian product of lateral offsets (outer) and
    speed fractions (inner). Terminal poses past the lane end extend along
    the final tangent. Branches with zero start and terminal speed stay at
    the start pose. Per-step speeds are recomputed from consecutive
    positions so rule evaluation sees the geometry actually sampled.
    """
    if not np.isfinite([state.x, state.y, state.heading, state.speed]).all():
        raise ValidationError("agent state must be finite")
    offsets = np.repeat(np.asarray(cfg.lateral_offsets), len(cfg.speed_fractions))
    fractions = np.tile(np.asarray(cfg.speed_fractions), len(cfg.lateral_offsets))
    k, t_steps = offsets.size, cfg.horizon
    duration = t_steps * cfg.dt

    proj = lane.path.project_point(state.position)
    v0 = state.speed
    v_end = fractions * lane.speed_limit
    travel = 0.5 * (v0 + v_end) * duration
    s_end = proj.arc_length + travel
    center_end, tangent_end = lane.path.pose_at(s_end)
    p_end = center_end + offsets[:, None] * left_normal(tangent_end)

    p0 = state.position
    m0 = v0 * duration * np.array([np.cos(state.heading), np.sin(state.heading)])
    m1 = (v_end * duration)[:, None] * np.stack(
        [np.cos(tangent_end), np.sin(tangent_end)], axis=1)

    u = np.arange(1, t_steps + 1) / t_steps
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    positions = (h00[None, :, None] * p0[None, None, :]
                 + h10[None, :, None] * m0[None, None, :]
                 + h01[None, :, None] * p_end[:, None, :]
                 + h11[None, :, None] * m1[:, None, :])

    d00 = 6 * u**2 - 6 * u
    d10 = 3 * u**2 - 4 * u + 1
    d01 = -6 * u**2 + 6 * u
    d11 = 3 * u**2 - 2 * u
    tangents = (d00[None, :, None] * p0[None, None, :]
                + d10[None, :, None] * m0[None, None, :]
                + d01[None, :, None] * p_end[:, None, :]
                + d11[None, :, None] * m1[:, None, :])

    stationary = (v0 + v_end) <= _TINY
    positions[stationary] = p0

    headings = np.arctan2(tangents[:, :, 1], tangents[:, :, 0])
    defined = np.hypot(tangents[:, :, 0], tangents[:, :, 1]) > _TINY
    prev = np.full(k, state.heading)
    for step in range(t_steps):
        headings[:, step] = np.where(defined[:, step], headings[:, step], prev)
        prev = headings[:, step]
    headings[stationary] = state.heading
    headings = wrap_angle(headings)

    steps = np.concatenate([p0[None, None, :].repeat(k, axis=0), positions], axis=1)
    speeds = np.hypot(np.diff(steps[:, :, 0], axis=1),
                      np.diff(steps[:, :, 1], axis=1)) / cfg.dt

    return np.stack([positions[:, :, 0], positions[:, :, 1], headings, speeds], axis=2)
