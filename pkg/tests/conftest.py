"""Shared builders for tests: simple lanes, histories, and scenes."""

import numpy as np
import pytest

from trajfuse import AgentState, Lane, LaneMap, PredictionScene, Trajectory

DT = 0.5


def cv_states(x0=0.0, y0=0.0, heading=0.0, speed=7.0, t0=0, n=5, dt=DT):
    """Constant-velocity state sequence starting at step t0."""
    vx, vy = speed * np.cos(heading), speed * np.sin(heading)
    return tuple(AgentState(x=x0 + vx * dt * k, y=y0 + vy * dt * k,
                            heading=heading, speed=speed, t=t0 + k)
                 for k in range(n))


def cv_trajectory(**kwargs) -> Trajectory:
    dt = kwargs.pop("dt", DT)
    return Trajectory(cv_states(dt=dt, **kwargs), dt)


@pytest.fixture
def straight_lane() -> Lane:
    return Lane(id="main", polyline=((0.0, 0.0), (400.0, 0.0)), speed_limit=10.0)


@pytest.fixture
def straight_map(straight_lane) -> LaneMap:
    return LaneMap((straight_lane,))


def make_scene(lane_map, history_steps=4, t=4, x0=0.0, y0=0.0, heading=0.0,
               speed=7.0, others=(), dt=DT) -> PredictionScene:
    """Scene whose target drove at constant velocity for the history window.

    The target's position at step t is (x0, y0); `others` is an iterable of
    (agent_id, x, y, heading, speed) rows, each given its own constant-
    velocity history ending at t.
    """
    start = x0 - speed * np.cos(heading) * dt * history_steps
    starty = y0 - speed * np.sin(heading) * dt * history_steps
    histories = {"target": Trajectory(
        cv_states(x0=start, y0=starty, heading=heading, speed=speed,
                  t0=t - history_steps, n=history_steps + 1, dt=dt), dt)}
    for agent_id, ox, oy, oh, ov in others:
        sx = ox - ov * np.cos(oh) * dt * history_steps
        sy = oy - ov * np.sin(oh) * dt * history_steps
        histories[agent_id] = Trajectory(
            cv_states(x0=sx, y0=sy, heading=oh, speed=ov,
                      t0=t - history_steps, n=history_steps + 1, dt=dt), dt)
    return PredictionScene(histories=histories, map=lane_map,
                           target_agent_id="target", t=t)
