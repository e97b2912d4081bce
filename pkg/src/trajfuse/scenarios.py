"""Deterministic synthetic driving scenarios.

Four kinds, each on its own stretch of map so lane selection never crosses
scenario boundaries:

  straight  cruise along a straight lane
  turn      cruise through a 90-degree turn (direction chosen per episode)
  fork      shared entry that splits into two branches; the target commits
            to one branch per episode with 50/50 probability, which is the
            multimodal-goal regime where lane-based planning guesses wrong
  violator  straight-lane driving above the speed limit

Targets are rolled out in the lane frame (arc length, lateral offset,
heading offset) with Gaussian noise on acceleration and yaw rate plus a
small corrective steer, so a zero-noise rollout lies exactly on the
centerline. Background agents lead the target on the same lane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

import numpy as np

from .core import (AgentState, Episode, Lane, LaneMap, Trajectory,
                   ValidationError, derive_seed)
from .geometry import PolylinePath, left_normal, wrap_angle
from .validation import check_count, check_non_negative, check_positive

KINDS = ("straight", "turn", "fork", "violator")

# Vertical offsets keeping each kind's lanes far from every other kind's.
_REGION_Y = {"straight": 0.0, "turn_left": 300.0, "turn_right": 500.0,
             "fork": 800.0, "violator": -300.0}

_LEADER_GAP = 30.0  # meters between successive same-lane agents


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one scenario batch; see module docstring for kinds."""

    kind: str
    n_episodes: int = 1
    episode_length: int = 20
    dt: float = 0.5
    speed_limit: float = 10.0
    seed: int = 0
    n_background: int = 1
    cruise_fraction: float = 0.7
    accel_noise_std: float = 0.1
    yawrate_noise_std: float = 0.01
    turn_radius: float = 25.0
    fork_angle_deg: float = 40.0
    violator_speed_factor: float = 1.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown scenario kind {self.kind!r}; "
                                  f"expected one of {KINDS}")
        check_count("n_episodes", self.n_episodes)
        check_count("episode_length", self.episode_length, minimum=13)
        check_positive("dt", self.dt)
        check_positive("speed_limit", self.speed_limit)
        check_count("n_background", self.n_background, minimum=0)
        check_positive("cruise_fraction", self.cruise_fraction)
        check_non_negative("accel_noise_std", self.accel_noise_std)
        check_non_negative("yawrate_noise_std", self.yawrate_noise_std)
        check_positive("turn_radius", self.turn_radius)
        check_positive("fork_angle_deg", self.fork_angle_deg)
        if self.violator_speed_factor <= 1.0:
            raise ValidationError("violator_speed_factor must exceed 1.0")


# ---------------------------------------------------------------------------
# Lane geometry per kind.
# ---------------------------------------------------------------------------

def _arc(center, radius: float, phi_start: float, phi_end: float,
         max_chord: float = 2.0) -> np.ndarray:
    sweep = abs(phi_end - phi_start)
    n = max(2, int(math.ceil(sweep * radius / max_chord)) + 1)
    phi = np.linspace(phi_start, phi_end, n)
    return np.asarray(center) + radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)


def _turn_lane(direction: str, radius: float, speed_limit: float) -> Lane:
    y0 = _REGION_Y[f"turn_{direction}"]
    sign = 1.0 if direction == "left" else -1.0
    entry = np.array([[0.0, y0], [20.0, y0]])
    arc = _arc((20.0, y0 + sign * radius), radius,
               -sign * np.pi / 2, 0.0)[1:]
    exit_start = arc[-1]
    exit_end = exit_start + np.array([0.0, sign * 60.0])
    pts = np.vstack([entry, arc, exit_end[None, :]])
    return Lane(id=f"turn_{direction}", polyline=tuple(map(tuple, pts)),
                speed_limit=speed_limit)


def _fork_lane(side: str, angle_deg: float, speed_limit: float) -> Lane:
    y0 = _REGION_Y["fork"]
    sign = 1.0 if side == "left" else -1.0
    angle = sign * math.radians(angle_deg)
    split = np.array([40.0, y0])
    end = split + 80.0 * np.array([math.cos(angle), math.sin(angle)])
    pts = [(0.0, y0), tuple(split), tuple(end)]
    return Lane(id=f"fork_{side}", polyline=tuple(pts), speed_limit=speed_limit)


def kind_lanes(spec: ScenarioSpec) -> Tuple[Lane, ...]:
    """Lanes belonging to one scenario kind."""
    limit = spec.speed_limit
    if spec.kind == "straight":
        return (Lane("straight", ((0.0, 0.0), (200.0, 0.0)), limit),)
    if spec.kind == "violator":
        y0 = _REGION_Y["violator"]
        return (Lane("violator", ((0.0, y0), (250.0, y0)), limit),)
    if spec.kind == "turn":
        return (_turn_lane("left", spec.turn_radius, limit),
                _turn_lane("right", spec.turn_radius, limit))
    return (_fork_lane("left", spec.fork_angle_deg, limit),
            _fork_lane("right", spec.fork_angle_deg, limit))


# ---------------------------------------------------------------------------
# Rollouts.
# ---------------------------------------------------------------------------

def _lane_frame_rollout(path: PolylinePath, s0: float, v0: float, spec: ScenarioSpec,
                        rng: np.random.Generator) -> Trajectory:
    s, lateral, dtheta, v = s0, 0.0, 0.0, v0
    dt = spec.dt
    states = []
    for k in range(spec.episode_length):
        pos, tangent = path.pose_at(s)
        point = pos + lateral * left_normal(tangent)
        states.append(AgentState(x=point[0], y=point[1],
                                 heading=wrap_angle(tangent + dtheta),
                                 speed=v, t=k))
        accel = rng.normal(0.0, spec.accel_noise_std)
        # corrective steer keeps noisy rollouts lane-abiding over long episodes
        steer = rng.normal(0.0, spec.yawrate_noise_std) - 0.6 * dtheta - 0.15 * lateral
        dtheta += steer * dt
        v = max(0.0, v + accel * dt)
        lateral += v * math.sin(dtheta) * dt
        s += v * math.cos(dtheta) * dt
    return Trajectory(tuple(states), dt)


def _episode(spec: ScenarioSpec, lane_map: LaneMap, index: int) -> Episode:
    rng = np.random.default_rng(derive_seed(spec.seed, spec.kind, index))
    if spec.kind == "straight":
        lane = lane_map.lane("straight")
    elif spec.kind == "violator":
        lane = lane_map.lane("violator")
    elif spec.kind == "turn":
        lane = lane_map.lane("turn_left" if rng.random() < 0.5 else "turn_right")
    else:
        lane = lane_map.lane("fork_left" if rng.random() < 0.5 else "fork_right")

    if spec.kind == "violator":
        nominal = spec.violator_speed_factor * spec.speed_limit
    else:
        nominal = spec.cruise_fraction * spec.speed_limit
    s0 = 2.0 + rng.uniform(0.0, 4.0)
    v0 = max(0.5, nominal + rng.normal(0.0, 0.15))

    agents: Dict[str, Trajectory] = {
        "target": _lane_frame_rollout(lane.path, s0, v0, spec, rng)}
    for b in range(spec.n_background):
        lead_v = max(0.5, nominal + rng.normal(0.0, 0.15))
        agents[f"lead{b + 1}"] = _lane_frame_rollout(
            lane.path, s0 + _LEADER_GAP * (b + 1), lead_v, spec, rng)
    return Episode(id=f"{spec.kind}-{index:04d}", dt=spec.dt, agents=agents,
                   target_agent_id="target")


def generate(spec: ScenarioSpec) -> Tuple[LaneMap, List[Episode]]:
    """Generate spec.n_episodes episodes on the kind's lanes, per-seed deterministic."""
    lane_map = LaneMap(kind_lanes(spec))
    episodes = [_episode(spec, lane_map, i) for i in range(spec.n_episodes)]
    return lane_map, episodes


# ---------------------------------------------------------------------------
# Suites.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteConfig:
    """Composition of the synthetic evaluation suite."""

    episodes_per_kind: int = 50
    kinds: Tuple[str, ...] = KINDS
    episode_length: int = 20
    dt: float = 0.5
    speed_limit: float = 10.0
    seed: int = 0
    n_background: int = 1
    cruise_fraction: float = 0.7
    accel_noise_std: float = 0.1
    yawrate_noise_std: float = 0.01
    turn_radius: float = 25.0
    fork_angle_deg: float = 40.0
    violator_speed_factor: float = 1.5

    def __post_init__(self):
        check_count("episodes_per_kind", self.episodes_per_kind)
        kinds = tuple(self.kinds)
        if not kinds or any(k not in KINDS for k in kinds) or len(set(kinds)) != len(kinds):
            raise ValidationError(f"kinds must be distinct members of {KINDS}")
        object.__setattr__(self, "kinds", kinds)

    def spec_for(self, kind: str) -> ScenarioSpec:
        return ScenarioSpec(kind=kind, n_episodes=self.episodes_per_kind,
                            episode_length=self.episode_length, dt=self.dt,
                            speed_limit=self.speed_limit, seed=self.seed,
                            n_background=self.n_background,
                            cruise_fraction=self.cruise_fraction,
                            accel_noise_std=self.accel_noise_std,
                            yawrate_noise_std=self.yawrate_noise_std,
                            turn_radius=self.turn_radius,
                            fork_angle_deg=self.fork_angle_deg,
                            violator_speed_factor=self.violator_speed_factor)


def generate_suite(cfg: SuiteConfig) -> Tuple[LaneMap, List[Episode]]:
    """All kinds' episodes on one merged map."""
    lanes: List[Lane] = []
    episodes: List[Episode] = []
    for kind in cfg.kinds:
        kind_map, kind_episodes = generate(cfg.spec_for(kind))
        lanes.extend(kind_map)
        episodes.extend(kind_episodes)
    return LaneMap(tuple(lanes)), episodes


def write_suite(cfg: SuiteConfig, path) -> None:
    """Generate the suite and save it in the dataset file format."""
    from .dataset import save_dataset

    lane_map, episodes = generate_suite(cfg)
    save_dataset(path, lane_map, episodes)


def episode_kind(episode_id: str) -> str:
    """Scenario kind encoded in a generated episode id ('<kind>-<index>')."""
    return episode_id.split("-", 1)[0]
