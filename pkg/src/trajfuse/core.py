"""Core domain types shared across the toolkit.

All types are immutable after construction and validate their invariants,
so instances can be shared freely between parallel workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Mapping, Tuple

import numpy as np

from .geometry import PolylinePath, wrap_angle


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant or schema."""


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit seed derived from a master seed and context labels.

    Same inputs give the same seed on every platform and process, which is
    what makes full runs reproducible and worker-count independent.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


@dataclass(frozen=True)
class AgentState:
    """Planar agent state at one discrete step.

    heading is normalized to (-pi, pi] at construction; speed is in m/s.
    """

    x: float
    y: float
    heading: float
    speed: float
    t: int

    def __post_init__(self):
        if not np.isfinite([self.x, self.y, self.heading, self.speed]).all():
            raise ValidationError("agent state has non-finite fields")
        if self.speed < 0.0:
            raise ValidationError(f"speed must be >= 0, got {self.speed}")
        if self.t < 0:
            raise ValidationError(f"step index must be >= 0, got {self.t}")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "t", int(self.t))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def velocity(self) -> np.ndarray:
        return self.speed * np.array([np.cos(self.heading), np.sin(self.heading)])


@dataclass(frozen=True)
class Trajectory:
    """Ordered agent states with consecutive step indices and a fixed step size."""

    states: Tuple[AgentState, ...]
    dt: float

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if not states:
            raise ValidationError("trajectory must be non-empty")
        if self.dt <= 0.0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        steps = [s.t for s in states]
        for a, b in zip(steps, steps[1:]):
            if b != a + 1:
                raise ValidationError(f"step indices must increase by 1, got {a} -> {b}")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def start_step(self) -> int:
        return self.states[0].t

    @property
    def end_step(self) -> int:
        return self.states[-1].t

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.states])

    @cached_property
    def headings(self) -> np.ndarray:
        return np.array([s.heading for s in self.states])

    @cached_property
    def speeds(self) -> np.ndarray:
        return np.array([s.speed for s in self.states])

    def state_at(self, step: int) -> AgentState:
        idx = step - self.start_step
        if idx < 0 or idx >= len(self.states):
            raise ValidationError(f"step {step} outside trajectory range "
                                  f"[{self.start_step}, {self.end_step}]")
        return self.states[idx]

    def window(self, start_step: int, n_steps: int) -> "Trajectory":
        """Sub-trajectory of n_steps states beginning at start_step."""
        idx = start_step - self.start_step
        if idx < 0 or idx + n_steps > len(self.states):
            raise ValidationError(
                f"window [{start_step}, {start_step + n_steps}) outside trajectory "
                f"range [{self.start_step}, {self.end_step}]")
        return Trajectory(self.states[idx:idx + n_steps], self.dt)


@dataclass(frozen=True)
class Lane:
    """Lane centerline polyline with a speed limit. Points are (x, y) meters."""

    id: str
    polyline: Tuple[Tuple[float, float], ...]
    speed_limit: float

    def __post_init__(self):
        object.__setattr__(self, "polyline",
                           tuple((float(x), float(y)) for x, y in self.polyline))
        if self.speed_limit <= 0.0:
            raise ValidationError(f"lane {self.id!r}: speed_limit must be > 0")
        try:
            path = PolylinePath(self.polyline)
        except ValueError as exc:
            raise ValidationError(f"lane {self.id!r}: {exc}") from exc
        object.__setattr__(self, "_path", path)

    @property
    def path(self) -> PolylinePath:
        return self._path


@dataclass(frozen=True)
class LaneMap:
    """Collection of lanes with unique ids, iterated in sorted-id order."""

    lanes: Tuple[Lane, ...]

    def __post_init__(self):
        lanes = tuple(sorted(self.lanes, key=lambda lane: lane.id))
        object.__setattr__(self, "lanes", lanes)
        if not lanes:
            raise ValidationError("lane map must contain at least one lane")
        ids = [lane.id for lane in lanes]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate lane ids: {dupes}")

    def __iter__(self):
        return iter(self.lanes)

    def __len__(self) -> int:
        return len(self.lanes)

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.id == lane_id:
                return lane
        raise ValidationError(f"unknown lane id {lane_id!r}")


@dataclass(frozen=True)
class Episode:
    """One continuous rollout of all agents, keyed by agent id."""

    id: str
    dt: float
    agents: Mapping[str, Trajectory]
    target_agent_id: str

    def __post_init__(self):
        object.__setattr__(self, "agents", dict(self.agents))
        if self.target_agent_id not in self.agents:
            raise ValidationError(
                f"episode {self.id!r}: target agent {self.target_agent_id!r} missing")
        for agent_id, traj in self.agents.items():
            if abs(traj.dt - self.dt) > 1e-12:
                raise ValidationError(
                    f"episode {self.id!r}: agent {agent_id!r} dt {traj.dt} != {self.dt}")

    @property
    def target(self) -> Trajectory:
        return self.agents[self.target_agent_id]


@dataclass(frozen=True)
class PredictionScene:
    """Everything a predictor may condition on at step t.

    The target agent's history must cover exactly the steps t-H..t; other
    agents carry whatever suffix of that window they were observed on,
    always ending at t.
    """

    histories: Mapping[str, Trajectory]
    map: LaneMap
    target_agent_id: str
    t: int

    def __post_init__(self):
        object.__setattr__(self, "histories", dict(self.histories))
        if self.target_agent_id not in self.histories:
            raise ValidationError(f"scene at t={self.t}: target history missing")
        for agent_id, traj in self.histories.items():
            if traj.end_step != self.t:
                raise ValidationError(
                    f"scene at t={self.t}: history of {agent_id!r} ends at {traj.end_step}")

    @property
    def target_history(self) -> Trajectory:
        return self.histories[self.target_agent_id]

    @property
    def current_state(self) -> AgentState:
        return self.target_history.states[-1]

    @property
    def dt(self) -> float:
        return self.target_history.dt

    def other_agents(self) -> Dict[str, Trajectory]:
        return {a: tr for a, tr in self.histories.items() if a != self.target_agent_id}


@dataclass(frozen=True)
class TrajectorySamples:
    """N sampled future trajectories as one (N, T, 4) array.

    Columns are (x, y, heading, v); rows share the start step and dt.
    """

    array: np.ndarray
    start_step: int
    dt: float
    source_label: str

    def __post_init__(self):
        arr = np.asarray(self.array, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValidationError(f"samples must be (N, T, 4), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError("samples need N >= 1 and T >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("samples contain non-finite values")
        if self.dt <= 0.0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if np.any(arr[:, :, 3] < 0.0):
            raise ValidationError("sample speeds must be >= 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "array", arr)

    @property
    def n(self) -> int:
        return self.array.shape[0]

    @property
    def horizon(self) -> int:
        return self.array.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return self.array[:, :, :2]

    def first_step_positions(self) -> np.ndarray:
        return self.array[:, 0, :2]

    def digest(self) -> str:
        """SHA-256 of the raw sample bytes; equal iff samples are bit-identical."""
        return hashlib.sha256(np.ascontiguousarray(self.array).tobytes()).hexdigest()

    def trajectories(self) -> Tuple[Trajectory, ...]:
        out = []
        for row in self.array:
            states = tuple(
                AgentState(x=row[k, 0], y=row[k, 1], heading=row[k, 2],
                           speed=row[k, 3], t=self.start_step + k)
                for k in range(row.shape[0]))
            out.append(Trajectory(states, self.dt))
        return tuple(out)


def samples_from_states(rows, start_step: int, dt: float, source_label: str) -> TrajectorySamples:
    """Build TrajectorySamples from nested [(x, y, heading, v), ...] rows."""
    arr = np.asarray(rows, dtype=float)
    return TrajectorySamples(arr, start_step=start_step, dt=dt, source_label=source_label)
