"""Trajectory predictors behind one sampling interface.

Every predictor implements sample(scene, n_samples, horizon, seed) and is
deterministic given those arguments; the returned samples are i.i.d. draws
from the predictor's distribution over futures. Predictors are sklearn-style
estimators: constructor arguments are stored verbatim and exposed through
get_params, so they clone and compose with standard tooling.
"""

from __future__ import annotations

import abc
import json
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .core import PredictionScene, TrajectorySamples, ValidationError
from .dataset import scene_to_dict
from .geometry import wrap_angle
from .hierarchy import (DEFAULT_REWARD_BASE, DEFAULT_TEMPERATURE, BranchScores,
                        HierarchyConfig, score_branches)
from .rules import (DEFAULT_CLEAR_CAP, DEFAULT_D_SAFE, DEFAULT_LAT_MAX,
                    DEFAULT_THETA_MAX, DEFAULT_V_MARGIN_REF, N_RULES, RuleParams,
                    batch_robustness, constant_velocity_extrapolation)
from .tree import (DEFAULT_LATERAL_OFFSETS, DEFAULT_ORIENTATION_WEIGHT,
                   DEFAULT_SPEED_FRACTIONS, TreeConfig, build_tree, select_lane)
from .validation import check_count, check_scene, check_simplex


class TrajectoryPredictor(BaseEstimator, abc.ABC):
    """Common sampling contract for all predictors."""

    label: str = "predictor"

    @abc.abstractmethod
    def sample(self, scene: PredictionScene, n_samples: int, horizon: int,
               seed: int) -> TrajectorySamples:
        """Draw n_samples futures of `horizon` steps, deterministically per seed."""


@dataclass(frozen=True)
class TreePlan:
    """One planning pass: branches with their robustness, rewards, and probabilities."""

    lane_id: str
    branches: np.ndarray          # (K, T, 4)
    robustness: np.ndarray        # (K, n_rules)
    scores: BranchScores

    @property
    def k(self) -> int:
        return self.branches.shape[0]


class RuleHierarchyPredictor(TrajectoryPredictor):
    """Plans a branch fan along the nearest lane and samples branches from a
    Boltzmann distribution over their rank-preserving rewards."""

    label = "rule_hierarchy"

    def __init__(self, d_safe: float = DEFAULT_D_SAFE,
                 lat_max: float = DEFAULT_LAT_MAX,
                 theta_max: float = DEFAULT_THETA_MAX,
                 v_margin_ref: float = DEFAULT_V_MARGIN_REF,
                 clear_cap: float = DEFAULT_CLEAR_CAP,
                 reward_base: float = DEFAULT_REWARD_BASE,
                 temperature: float = DEFAULT_TEMPERATURE,
                 lateral_offsets: Tuple[float, ...] = DEFAULT_LATERAL_OFFSETS,
                 speed_fractions: Tuple[float, ...] = DEFAULT_SPEED_FRACTIONS,
                 orientation_weight: float = DEFAULT_ORIENTATION_WEIGHT):
        self.d_safe = d_safe
        self.lat_max = lat_max
        self.theta_max = theta_max
        self.v_margin_ref = v_margin_ref
        self.clear_cap = clear_cap
        self.reward_base = reward_base
        self.temperature = temperature
        self.lateral_offsets = lateral_offsets
        self.speed_fractions = speed_fractions
        self.orientation_weight = orientation_weight

    def rule_params(self) -> RuleParams:
        return RuleParams(d_safe=self.d_safe, lat_max=self.lat_max,
                          theta_max=self.theta_max, v_margin_ref=self.v_margin_ref,
                          clear_cap=self.clear_cap)

    def plan(self, scene: PredictionScene, horizon: int) -> TreePlan:
        check_scene(scene)
        check_count("horizon", horizon, minimum=1)
        if scene.map is None or len(scene.map) == 0:
            raise ValidationError("rule-hierarchy predictor requires a lane map")
        state = scene.current_state
        lane = select_lane(state, scene.map, self.orientation_weight)
        cfg = TreeConfig(lateral_offsets=tuple(self.lateral_offsets),
                         speed_fractions=tuple(self.speed_fractions),
                         horizon=horizon, dt=scene.dt,
                         orientation_weight=self.orientation_weight)
        branches = build_tree(state, lane, cfg)
        others = constant_velocity_extrapolation(scene, horizon)
        rho = batch_robustness(branches[:, :, :2], branches[:, :, 2],
                               branches[:, :, 3], others, lane, self.rule_params())
        scores = score_branches(rho, HierarchyConfig(
            n=N_RULES, base=self.reward_base, temperature=self.temperature))
        return TreePlan(lane_id=lane.id, branches=branches, robustness=rho,
                        scores=scores)

    def sample(self, scene: PredictionScene, n_samples: int, horizon: int,
               seed: int) -> TrajectorySamples:
        check_count("n_samples", n_samples)
        plan = self.plan(scene, horizon)
        rng = np.random.default_rng(seed)
        idx = rng.choice(plan.k, size=n_samples, p=np.asarray(plan.scores.probabilities))
        return TrajectorySamples(plan.branches[idx], start_step=scene.t + 1,
                                 dt=scene.dt, source_label=self.label)


class KinematicMixturePredictor(TrajectoryPredictor):
    """Desk-scale stand-in for a learned predictor.

    Each sample picks a behavior mode (constant velocity, decelerate, turn
    left, turn right) and integrates unicycle dynamics from the last
    observed state with the mode's controls plus Gaussian control noise.
    """

    label = "kinematic"

    MODES = ("constant_velocity", "decelerate", "turn_left", "turn_right")

    def __init__(self, mode_weights: Tuple[float, ...] = (0.4, 0.2, 0.2, 0.2),
                 accel_noise_std: float = 0.5,
                 yawrate_noise_std: float = 0.05,
                 decel_rate: float = 2.0,
                 turn_yaw_rate: float = 0.3):
        self.mode_weights = mode_weights
        self.accel_noise_std = accel_noise_std
        self.yawrate_noise_std = yawrate_noise_std
        self.decel_rate = decel_rate
        self.turn_yaw_rate = turn_yaw_rate

    def sample(self, scene: PredictionScene, n_samples: int, horizon: int,
               seed: int) -> TrajectorySamples:
        check_scene(scene)
        check_count("n_samples", n_samples)
        check_count("horizon", horizon, minimum=1)
        weights = check_simplex("mode_weights", self.mode_weights, n=len(self.MODES))
        state = scene.current_state
        dt = scene.dt
        rng = np.random.default_rng(seed)
        modes = rng.choice(len(self.MODES), size=n_samples, p=weights)
        accel = np.where(modes == 1, -self.decel_rate, 0.0)[:, None] \
            + rng.normal(0.0, self.accel_noise_std, size=(n_samples, horizon))
        yaw_rate = (np.where(modes == 2, self.turn_yaw_rate, 0.0)
                    - np.where(modes == 3, self.turn_yaw_rate, 0.0))[:, None] \
            + rng.normal(0.0, self.yawrate_noise_std, size=(n_samples, horizon))

        x = np.full(n_samples, state.x)
        y = np.full(n_samples, state.y)
        heading = np.full(n_samples, state.heading)
        speed = np.full(n_samples, state.speed)
        out = np.empty((n_samples, horizon, 4))
        for k in range(horizon):
            speed = np.maximum(0.0, speed + accel[:, k] * dt)
            heading = heading + yaw_rate[:, k] * dt
            x = x + speed * np.cos(heading) * dt
            y = y + speed * np.sin(heading) * dt
            out[:, k, 0] = x
            out[:, k, 1] = y
            out[:, k, 2] = heading
            out[:, k, 3] = speed
        out[:, :, 2] = wrap_angle(out[:, :, 2])
        return TrajectorySamples(out, start_step=scene.t + 1, dt=dt,
                                 source_label=self.label)


class AdapterError(RuntimeError):
    """External predictor protocol failure; carries the raw payload if any."""

    def __init__(self, message: str, payload: Optional[str] = None):
        super().__init__(message)
        self.payload = payload


class ExternalProcessPredictor(TrajectoryPredictor):
    """Adapter for a predictor running as a child process.

    Protocol: line-delimited JSON over the child's standard streams. One
    request per line: {"scene": <scene>, "N": int, "T": int, "seed": int};
    one response per line: {"samples": [[{"x","y","heading","v"} x T] x N]}.
    Access to the child is serialized; concurrent sample calls queue up.
    """

    label = "external"

    def __init__(self, command: str | Tuple[str, ...] = "", timeout: float = 5.0):
        self.command = command
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: Optional[queue.Queue] = None
        self._reader: Optional[threading.Thread] = None
        self._lock = threading.Lock()

    # -- child process management -------------------------------------------

    def _argv(self):
        if isinstance(self.command, str):
            if not self.command.strip():
                raise ValidationError("external predictor needs a non-empty command")
            return shlex.split(self.command)
        argv = [str(c) for c in self.command]
        if not argv:
            raise ValidationError("external predictor needs a non-empty command")
        return argv

    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(self._argv(), stdin=subprocess.PIPE,
                                      stdout=subprocess.PIPE, text=True, bufsize=1)
        self._lines = queue.Queue()

        def pump(proc, lines):
            for line in proc.stdout:
                lines.put(line)
            lines.put(None)  # EOF sentinel

        self._reader = threading.Thread(target=pump, args=(self._proc, self._lines),
                                        daemon=True)
        self._reader.start()

    def close(self):
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
                try:
                    self._proc.wait(timeout=1.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
            self._proc = None
            self._reader = None
            self._lines = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- sampling -------------------------------------------------------------

    def sample(self, scene: PredictionScene, n_samples: int, horizon: int,
               seed: int) -> TrajectorySamples:
        check_scene(scene)
        check_count("n_samples", n_samples)
        check_count("horizon", horizon, minimum=1)
        request = json.dumps({"scene": scene_to_dict(scene), "N": int(n_samples),
                              "T": int(horizon), "seed": int(seed)},
                             sort_keys=True)
        with self._lock:
            self._ensure_started()
            try:
                self._proc.stdin.write(request + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise AdapterError(f"external predictor pipe closed: {exc}") from exc
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise AdapterError(
                    f"external predictor timed out after {self.timeout}s") from None
            if line is None:
                raise AdapterError("external predictor exited before responding")
        return self._parse_response(line, scene, n_samples, horizon)

    def _parse_response(self, line: str, scene: PredictionScene, n_samples: int,
                        horizon: int) -> TrajectorySamples:
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterError(f"external predictor sent invalid JSON: {exc}",
                               payload=line) from exc
        if not isinstance(doc, dict) or "samples" not in doc:
            raise AdapterError("external predictor response missing 'samples'",
                               payload=line)
        samples = doc["samples"]
        if not isinstance(samples, list) or len(samples) != n_samples:
            raise AdapterError(
                f"expected {n_samples} samples, got "
                f"{len(samples) if isinstance(samples, list) else type(samples).__name__}",
                payload=line)
        arr = np.empty((n_samples, horizon, 4))
        for i, row in enumerate(samples):
            if not isinstance(row, list) or len(row) != horizon:
                raise AdapterError(
                    f"sample {i} has {len(row) if isinstance(row, list) else '??'} "
                    f"states, expected {horizon}", payload=line)
            for k, st in enumerate(row):
                try:
                    arr[i, k] = (float(st["x"]), float(st["y"]),
                                 float(st["heading"]), float(st["v"]))
                except (TypeError, KeyError, ValueError) as exc:
                    raise AdapterError(f"sample {i} state {k} malformed: {exc}",
                                       payload=line) from exc
        try:
            return TrajectorySamples(arr, start_step=scene.t + 1, dt=scene.dt,
                                     source_label=self.label)
        except ValidationError as exc:
            raise AdapterError(f"external predictor samples invalid: {exc}",
                               payload=line) from exc
