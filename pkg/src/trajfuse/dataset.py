"""Dataset serialization and prediction-scene extraction.

File format (JSON, SI units, headings in radians):

    {
      "dt": 0.5,
      "map": {"lanes": [{"id": "...", "speed_limit": 10.0,
                         "polyline": [[x, y], ...]}, ...]},
      "episodes": [{"id": "...", "target_agent_id": "...",
                    "agents": {"<id>": [{"t": 0, "x": 0.0, "y": 0.0,
                                         "heading": 0.0, "v": 0.0}, ...]}}]
    }
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Tuple

from .core import (AgentState, Episode, Lane, LaneMap, PredictionScene,
                   Trajectory, ValidationError)

_STATE_FIELDS = ("t", "x", "y", "heading", "v")


def state_to_dict(state: AgentState) -> dict:
    return {"t": state.t, "x": state.x, "y": state.y,
            "heading": state.heading, "v": state.speed}


def _state_from_dict(obj, where: str) -> AgentState:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: state must be an object, got {type(obj).__name__}")
    for key in _STATE_FIELDS:
        if key not in obj:
            raise ValidationError(f"{where}: missing field '{key}'")
    try:
        return AgentState(x=float(obj["x"]), y=float(obj["y"]),
                          heading=float(obj["heading"]), speed=float(obj["v"]),
                          t=int(obj["t"]))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def trajectory_to_list(traj: Trajectory) -> list:
    return [state_to_dict(s) for s in traj.states]


def trajectory_from_list(obj, dt: float, where: str) -> Trajectory:
    if not isinstance(obj, list) or not obj:
        raise ValidationError(f"{where}: expected a non-empty list of states")
    states = tuple(_state_from_dict(s, f"{where} state {i}") for i, s in enumerate(obj))
    try:
        return Trajectory(states, dt)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def lane_map_to_dict(lane_map: LaneMap) -> dict:
    return {"lanes": [{"id": lane.id, "speed_limit": lane.speed_limit,
                       "polyline": [[x, y] for x, y in lane.polyline]}
                      for lane in lane_map]}


def lane_map_from_dict(obj, where: str = "map") -> LaneMap:
    if not isinstance(obj, dict) or "lanes" not in obj:
        raise ValidationError(f"{where}: missing field 'lanes'")
    lanes = []
    for i, entry in enumerate(obj["lanes"]):
        ctx = f"{where} lane {i}"
        for key in ("id", "speed_limit", "polyline"):
            if key not in entry:
                raise ValidationError(f"{ctx}: missing field '{key}'")
        try:
            lanes.append(Lane(id=str(entry["id"]),
                              polyline=tuple((float(p[0]), float(p[1]))
                                             for p in entry["polyline"]),
                              speed_limit=float(entry["speed_limit"])))
        except (TypeError, ValueError, IndexError) as exc:
            raise ValidationError(f"{ctx}: {exc}") from exc
    return LaneMap(tuple(lanes))


def scene_to_dict(scene: PredictionScene) -> dict:
    """JSON-ready form of a scene, as sent to external predictor processes."""
    return {
        "t": scene.t,
        "dt": scene.dt,
        "target_agent_id": scene.target_agent_id,
        "histories": {agent_id: trajectory_to_list(traj)
                      for agent_id, traj in sorted(scene.histories.items())},
        "map": lane_map_to_dict(scene.map),
    }


def scene_from_dict(obj, where: str = "scene") -> PredictionScene:
    for key in ("t", "dt", "target_agent_id", "histories", "map"):
        if key not in obj:
            raise ValidationError(f"{where}: missing field '{key}'")
    dt = float(obj["dt"])
    histories = {str(aid): trajectory_from_list(states, dt, f"{where} agent '{aid}'")
                 for aid, states in obj["histories"].items()}
    return PredictionScene(histories=histories,
                           map=lane_map_from_dict(obj["map"], f"{where} map"),
                           target_agent_id=str(obj["target_agent_id"]),
                           t=int(obj["t"]))


def load_dataset(path) -> Tuple[LaneMap, List[Episode]]:
    """Load a dataset file, validating schema and invariants with context."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("dt", "map", "episodes"):
        if key not in doc:
            raise ValidationError(f"{path}: missing field '{key}'")
    dt = float(doc["dt"])
    if dt <= 0.0:
        raise ValidationError(f"{path}: field 'dt' must be > 0, got {dt}")
    lane_map = lane_map_from_dict(doc["map"])
    episodes = []
    seen = set()
    for i, entry in enumerate(doc["episodes"]):
        ctx = f"episode {i}"
        for key in ("id", "target_agent_id", "agents"):
            if key not in entry:
                raise ValidationError(f"{ctx}: missing field '{key}'")
        ep_id = str(entry["id"])
        if ep_id in seen:
            raise ValidationError(f"duplicate episode id {ep_id!r}")
        seen.add(ep_id)
        agents = {str(aid): trajectory_from_list(states, dt, f"episode {ep_id!r} agent {aid!r}")
                  for aid, states in entry["agents"].items()}
        try:
            episodes.append(Episode(id=ep_id, dt=dt, agents=agents,
                                    target_agent_id=str(entry["target_agent_id"])))
        except ValidationError as exc:
            raise ValidationError(f"episode {ep_id!r}: {exc}") from exc
    return lane_map, episodes


def save_dataset(path, lane_map: LaneMap, episodes: List[Episode]) -> None:
    """Write a dataset file. Identical inputs produce byte-identical files."""
    if not episodes:
        raise ValidationError("cannot save a dataset with no episodes")
    dt = episodes[0].dt
    for ep in episodes:
        if abs(ep.dt - dt) > 1e-12:
            raise ValidationError(f"episode {ep.id!r}: dt {ep.dt} != {dt}")
    doc = {
        "dt": dt,
        "map": lane_map_to_dict(lane_map),
        "episodes": [{"id": ep.id,
                      "target_agent_id": ep.target_agent_id,
                      "agents": {aid: trajectory_to_list(traj)
                                 for aid, traj in sorted(ep.agents.items())}}
                     for ep in episodes],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def extract_scenes(episode: Episode, lane_map: LaneMap, history_steps: int,
                   horizon: int) -> List[PredictionScene]:
    """One scene per step where the target has H past and T future steps.

    Future coverage is required so ground-truth metrics exist for every
    extracted scene. Episodes too short for a single scene yield [].
    """
    if history_steps < 0:
        raise ValidationError(f"history_steps must be >= 0, got {history_steps}")
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    target = episode.target
    first = target.start_step + history_steps
    last = target.end_step - horizon
    scenes = []
    for t in range(first, last + 1):
        histories = {}
        for agent_id, traj in sorted(episode.agents.items()):
            start = max(traj.start_step, t - history_steps)
            if traj.start_step > t or traj.end_step < t:
                continue  # agent not observed at t
            histories[agent_id] = traj.window(start, t - start + 1)
        scenes.append(PredictionScene(histories=histories, map=lane_map,
                                      target_agent_id=episode.target_agent_id, t=t))
    return scenes
