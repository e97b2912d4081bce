"""End-to-end evaluation harness.

Runs the fusion loop over every episode of a dataset (loaded from disk or
synthesized on the fly), records per-scene metrics for the two standalone
predictors and the fused predictor, and emits deterministic reports.

Per-episode processing is independent and runs on a worker pool; all
reductions happen in sorted episode order, so outputs are byte-identical
for any worker count. Per-scene sample seeds derive from (master seed,
episode id, step, predictor label) and never from fuser settings, which
is what makes learning-rate sweeps reuse identical standalone samples.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Episode, LaneMap, ValidationError, derive_seed
from .dataset import extract_scenes, load_dataset
from .fusion import FuserConfig, MultiPredictorFusion
from .metrics import (METRIC_NAMES, MetricTable, SceneMetrics,
                      build_metric_table, scene_metrics)
from .predictors import (ExternalProcessPredictor, KinematicMixturePredictor,
                         RuleHierarchyPredictor, TrajectoryPredictor)
from .scenarios import SuiteConfig, episode_kind, generate_suite
from .validation import check_count

PREDICTOR_NAMES = ("kinematic", "rule_hierarchy", "external")


@dataclass(frozen=True)
class PredictorSelection:
    learned: str = "kinematic"
    rule: str = "rule_hierarchy"

    def __post_init__(self):
        for slot, name in (("learned", self.learned), ("rule", self.rule)):
            if name not in PREDICTOR_NAMES:
                raise ValidationError(
                    f"unknown predictor {name!r} in slot {slot!r}; "
                    f"available: {PREDICTOR_NAMES}")
        if self.learned == self.rule:
            raise ValidationError("learned and rule slots must differ so record "
                                  "labels stay unambiguous")


@dataclass(frozen=True)
class RulePredictorConfig:
    d_safe: float = 2.0
    lat_max: float = 1.75
    theta_max: float = float(np.pi / 4)
    v_margin_ref: float = 5.0
    clear_cap: float = 1e6
    reward_base: float = 4.0
    temperature: float = 1.0
    lateral_offsets: Tuple[float, ...] = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
    speed_fractions: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    orientation_weight: float = 2.0


@dataclass(frozen=True)
class KinematicConfig:
    mode_weights: Tuple[float, ...] = (0.4, 0.2, 0.2, 0.2)
    accel_noise_std: float = 0.5
    yawrate_noise_std: float = 0.05
    decel_rate: float = 2.0
    turn_yaw_rate: float = 0.3


@dataclass(frozen=True)
class ExternalConfig:
    command: str = ""
    timeout: float = 5.0


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; every leaf maps to a dotted CLI flag."""

    dataset: Optional[str] = None  # None -> synthesize the suite below
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    predictors: PredictorSelection = field(default_factory=PredictorSelection)
    n_samples: int = 20
    horizon: int = 8
    history: int = 4
    seed: int = 0
    workers: int = 1
    fuser: FuserConfig = field(default_factory=FuserConfig)
    rule_predictor: RulePredictorConfig = field(default_factory=RulePredictorConfig)
    kinematic: KinematicConfig = field(default_factory=KinematicConfig)
    external: ExternalConfig = field(default_factory=ExternalConfig)

    def __post_init__(self):
        check_count("n_samples", self.n_samples)
        check_count("horizon", self.horizon)
        check_count("history", self.history, minimum=0)
        check_count("workers", self.workers)


# ---------------------------------------------------------------------------
# Config <-> plain dicts (for YAML files and dotted overrides).
# ---------------------------------------------------------------------------

_SECTION_TYPES = {
    "suite": SuiteConfig,
    "predictors": PredictorSelection,
    "fuser": FuserConfig,
    "rule_predictor": RulePredictorConfig,
    "kinematic": KinematicConfig,
    "external": ExternalConfig,
}


def config_to_dict(cfg: RunConfig) -> dict:
    def scrub(value):
        if isinstance(value, tuple):
            return [scrub(v) for v in value]
        if isinstance(value, dict):
            return {k: scrub(v) for k, v in value.items()}
        return value

    return scrub(dataclasses.asdict(cfg))


def _build_section(cls, obj, where: str):
    if not isinstance(obj, dict):
        raise ValidationError(f"config section {where!r} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(obj) - set(fields))
    if unknown:
        raise ValidationError(f"unknown config key(s) under {where!r}: {unknown}")
    kwargs = {}
    for key, value in obj.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def run_config_from_dict(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ValidationError("run config must be a mapping")
    top_fields = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(obj) - top_fields)
    if unknown:
        raise ValidationError(f"unknown config key(s): {unknown}")
    kwargs = {}
    for key, value in obj.items():
        if key in _SECTION_TYPES:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def apply_dotted_overrides(base: dict, overrides: Dict[str, object]) -> dict:
    """Set dotted.path keys in a nested dict copy; unknown paths raise."""
    out = json.loads(json.dumps(base))  # deep copy of plain data
    for dotted, value in overrides.items():
        node = out
        parts = dotted.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ValidationError(f"unknown config path {dotted!r}")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ValidationError(f"unknown config path {dotted!r}")
        node[parts[-1]] = value
    return out


def build_predictor(name: str, config: RunConfig) -> TrajectoryPredictor:
    if name == "kinematic":
        k = config.kinematic
        return KinematicMixturePredictor(mode_weights=tuple(k.mode_weights),
                                         accel_noise_std=k.accel_noise_std,
                                         yawrate_noise_std=k.yawrate_noise_std,
                                         decel_rate=k.decel_rate,
                                         turn_yaw_rate=k.turn_yaw_rate)
    if name == "rule_hierarchy":
        r = config.rule_predictor
        return RuleHierarchyPredictor(d_safe=r.d_safe, lat_max=r.lat_max,
                                      theta_max=r.theta_max,
                                      v_margin_ref=r.v_margin_ref,
                                      clear_cap=r.clear_cap,
                                      reward_base=r.reward_base,
                                      temperature=r.temperature,
                                      lateral_offsets=tuple(r.lateral_offsets),
                                      speed_fractions=tuple(r.speed_fractions),
                                      orientation_weight=r.orientation_weight)
    if name == "external":
        if not config.external.command:
            raise ValidationError("external predictor requires external.command")
        return ExternalProcessPredictor(command=config.external.command,
                                        timeout=config.external.timeout)
    raise ValidationError(f"unknown predictor {name!r}; available: {PREDICTOR_NAMES}")


# ---------------------------------------------------------------------------
# Episode execution.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    episode_id: str
    kind: str
    t: int
    predictor: str
    ade: float
    fde: float
    min_ade: float
    min_fde: float

    def as_scene_metrics(self) -> SceneMetrics:
        return SceneMetrics(scene_id=self.scene_id, predictor_label=self.predictor,
                            ade=self.ade, fde=self.fde, min_ade=self.min_ade,
                            min_fde=self.min_fde)


@dataclass
class EpisodeResult:
    episode_id: str
    records: List[SceneRecord] = field(default_factory=list)
    belief_rows: List[dict] = field(default_factory=list)
    digests: Dict[str, Dict[str, str]] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    n_scenes: int = 0
    error: Optional[str] = None


class _TimedPredictor:
    """Pass-through predictor proxy accumulating wall-clock per query."""

    def __init__(self, inner: TrajectoryPredictor):
        self.inner = inner
        self.total = 0.0
        self.calls = 0

    @property
    def label(self) -> str:
        return self.inner.label

    def sample(self, scene, n_samples, horizon, seed):
        start = time.perf_counter()
        out = self.inner.sample(scene, n_samples, horizon, seed)
        self.total += time.perf_counter() - start
        self.calls += 1
        return out


def _metrics_record(samples, truth, scene_id, episode_id, kind, t) -> SceneRecord:
    m = scene_metrics(samples, truth, scene_id)
    return SceneRecord(scene_id=scene_id, episode_id=episode_id, kind=kind, t=t,
                       predictor=m.predictor_label, ade=m.ade, fde=m.fde,
                       min_ade=m.min_ade, min_fde=m.min_fde)


def run_episode(episode: Episode, lane_map: LaneMap, config: RunConfig) -> EpisodeResult:
    """One pass of the fusion loop over an episode's scenes."""
    result = EpisodeResult(episode_id=episode.id)
    kind = episode_kind(episode.id)
    try:
        scenes = extract_scenes(episode, lane_map, config.history, config.horizon)
        learned = _TimedPredictor(build_predictor(config.predictors.learned, config))
        rule = _TimedPredictor(build_predictor(config.predictors.rule, config))
        fusion = MultiPredictorFusion(learned=learned, rule_based=rule,
                                      eta=config.fuser.eta, gamma=config.fuser.gamma,
                                      prior=config.fuser.prior,
                                      sharpness=config.fuser.sharpness)
        fusion.reset()
        fuser_time = 0.0
        try:
            for scene in scenes:
                scene_id = f"{episode.id}:{scene.t}"
                step_start = time.perf_counter()
                learned_before, rule_before = learned.total, rule.total
                step = fusion.step(scene, config.n_samples, config.horizon,
                                   derive_seed(config.seed, episode.id, scene.t))
                fuser_time += ((time.perf_counter() - step_start)
                               - (learned.total - learned_before)
                               - (rule.total - rule_before))
                truth = episode.target.window(scene.t + 1, config.horizon)
                for samples in (step.learned, step.rule, step.fused):
                    result.records.append(_metrics_record(
                        samples, truth, scene_id, episode.id, kind, scene.t))
                if step.alpha is not None:
                    result.belief_rows.append({
                        "episode_id": episode.id, "t": scene.t,
                        "b_l": step.belief.b_l, "b_r": step.belief.b_r,
                        "alpha": step.alpha})
                result.digests[scene_id] = {step.learned.source_label: step.learned.digest(),
                                            step.rule.source_label: step.rule.digest()}
                result.n_scenes += 1
        finally:
            if isinstance(learned.inner, ExternalProcessPredictor):
                learned.inner.close()
            if isinstance(rule.inner, ExternalProcessPredictor):
                rule.inner.close()
        result.timings = {f"query_{learned.label}": learned.total,
                          f"query_{rule.label}": rule.total,
                          "fuser": max(fuser_time, 0.0)}
    except Exception as exc:  # noqa: BLE001 - failed episodes must not kill the run
        result.error = f"{type(exc).__name__}: {exc}"
        result.records = []
        result.belief_rows = []
        result.digests = {}
        result.n_scenes = 0
    return result


def _episode_worker(payload):
    episode, lane_map, config = payload
    return run_episode(episode, lane_map, config)


# ---------------------------------------------------------------------------
# Whole runs.
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    records: List[SceneRecord]
    table: MetricTable
    by_kind: Dict[str, MetricTable]
    belief_rows: List[dict]
    digests: Dict[str, Dict[str, str]]
    timings: Dict[str, float]
    failed_episodes: List[str]
    n_scenes: int
    wall_time: float

    def mdb(self) -> Dict[str, float]:
        return {label: row.mdb_pct for label, row in self.table.rows.items()}


def _load_input(config: RunConfig) -> Tuple[LaneMap, List[Episode]]:
    if config.dataset:
        return load_dataset(config.dataset)
    return generate_suite(config.suite)


def run(config: RunConfig, out: Optional[str] = None) -> RunResult:
    """Execute the full loop; optionally write the report tree under `out`."""
    started = time.perf_counter()
    lane_map, episodes = _load_input(config)
    episodes = sorted(episodes, key=lambda ep: ep.id)
    payloads = [(ep, lane_map, config) for ep in episodes]
    if config.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_episode_worker, payloads, chunksize=4))
    else:
        results = [_episode_worker(p) for p in payloads]
    results.sort(key=lambda r: r.episode_id)

    records: List[SceneRecord] = []
    belief_rows: List[dict] = []
    digests: Dict[str, Dict[str, str]] = {}
    failed: List[str] = []
    timings: Dict[str, float] = {}
    n_scenes = 0
    for res in results:
        if res.error is not None:
            failed.append(res.episode_id)
            continue
        records.extend(res.records)
        belief_rows.extend(res.belief_rows)
        digests.update(res.digests)
        n_scenes += res.n_scenes
        for key, value in res.timings.items():
            timings[key] = timings.get(key, 0.0) + value
    if not records:
        raise ValidationError("run produced no scenes: every episode was too short "
                              "or failed")
    timings["n_scenes"] = float(n_scenes)

    table = build_metric_table([r.as_scene_metrics() for r in records])
    by_kind: Dict[str, MetricTable] = {}
    for kind in sorted({r.kind for r in records}):
        kind_records = [r.as_scene_metrics() for r in records if r.kind == kind]
        by_kind[kind] = build_metric_table(kind_records)

    result = RunResult(config=config, records=records, table=table, by_kind=by_kind,
                       belief_rows=belief_rows, digests=digests, timings=timings,
                       failed_episodes=failed, n_scenes=n_scenes,
                       wall_time=time.perf_counter() - started)
    if out is not None:
        write_run_outputs(result, out)
    return result


# ---------------------------------------------------------------------------
# Reports. Everything under write_report() is a pure function of the records.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_records_csv(records: Sequence[SceneRecord], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "predictor", "ade", "fde", "min_ade", "min_fde"])
        for r in records:
            writer.writerow([r.scene_id, r.predictor, _fmt(r.ade), _fmt(r.fde),
                             _fmt(r.min_ade), _fmt(r.min_fde)])


def read_records_csv(path) -> List[SceneRecord]:
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"scene_id", "predictor", "ade", "fde", "min_ade", "min_fde"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValidationError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            scene_id = row["scene_id"]
            episode_id, _, t = scene_id.rpartition(":")
            if not episode_id or not t.isdigit():
                raise ValidationError(f"{path}: malformed scene_id {scene_id!r}")
            records.append(SceneRecord(
                scene_id=scene_id, episode_id=episode_id,
                kind=episode_kind(episode_id), t=int(t), predictor=row["predictor"],
                ade=float(row["ade"]), fde=float(row["fde"]),
                min_ade=float(row["min_ade"]), min_fde=float(row["min_fde"])))
    return records


def _scatter_rows(records: Sequence[SceneRecord]):
    labels = sorted({r.predictor for r in records} - {"fused"})
    if len(labels) != 2:
        return None, []
    by_scene: Dict[str, Dict[str, float]] = {}
    order: List[str] = []
    for r in records:
        if r.scene_id not in by_scene:
            by_scene[r.scene_id] = {}
            order.append(r.scene_id)
        by_scene[r.scene_id][r.predictor] = r.ade
    rows = [(sid, by_scene[sid][labels[0]], by_scene[sid][labels[1]])
            for sid in order
            if labels[0] in by_scene[sid] and labels[1] in by_scene[sid]]
    return labels, rows


def write_report(records: Sequence[SceneRecord], out_dir: Path,
                 n_bins: int = 40) -> None:
    """Summary, scatter pairs, and histogram bins, all derived from records."""
    out_dir.mkdir(parents=True, exist_ok=True)
    table = build_metric_table([r.as_scene_metrics() for r in records])
    by_kind = {}
    for kind in sorted({r.kind for r in records}):
        kind_records = [r.as_scene_metrics() for r in records if r.kind == kind]
        by_kind[kind] = build_metric_table(kind_records).to_dict()
    summary = {"n_scenes": len({r.scene_id for r in records}),
               "overall": table.to_dict(), "by_kind": by_kind}
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True) + "\n")

    labels, rows = _scatter_rows(records)
    if labels:
        with (out_dir / "scatter.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["scene_id", f"ade_{labels[0]}", f"ade_{labels[1]}"])
            for sid, a, b in rows:
                writer.writerow([sid, _fmt(a), _fmt(b)])

    values: Dict[str, Dict[str, List[float]]] = {}
    for r in records:
        for name in METRIC_NAMES:
            values.setdefault(name, {}).setdefault(r.predictor, []).append(
                getattr(r, name))
    with (out_dir / "histograms.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["predictor", "metric", "bin_left", "bin_right", "count"])
        for name in METRIC_NAMES:
            top = max(max(v) for v in values[name].values())
            edges = np.linspace(0.0, max(top, 1e-9), n_bins + 1)
            for label in sorted(values[name]):
                counts, _ = np.histogram(np.asarray(values[name][label]), bins=edges)
                for i, count in enumerate(counts):
                    writer.writerow([label, name, _fmt(edges[i]), _fmt(edges[i + 1]),
                                     str(int(count))])


def write_run_outputs(result: RunResult, out) -> None:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records_csv(result.records, out_dir / "records.csv")
    write_report(result.records, out_dir)
    with (out_dir / "belief_trace.jsonl").open("w") as fh:
        for row in result.belief_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    (out_dir / "config.json").write_text(
        json.dumps(config_to_dict(result.config), indent=1, sort_keys=True) + "\n")
    run_info = {"failed_episodes": result.failed_episodes,
                "n_scenes": result.n_scenes,
                "wall_time_s": result.wall_time,
                "timings_s": result.timings}
    (out_dir / "run_info.json").write_text(
        json.dumps(run_info, indent=1, sort_keys=True) + "\n")


def report_from_records(records_dir, out: Optional[str] = None) -> None:
    """Regenerate the derived report files from a saved records.csv."""
    records_dir = Path(records_dir)
    records = read_records_csv(records_dir / "records.csv")
    if not records:
        raise ValidationError(f"{records_dir}/records.csv holds no records")
    write_report(records, Path(out) if out is not None else records_dir)


# ---------------------------------------------------------------------------
# Learning-rate sweeps.
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    etas: List[float]
    mdb: Dict[str, Dict[str, float]]  # label -> {eta string -> MDB %}
    samples_identical: bool
    runs: Dict[str, RunResult]

    def to_dict(self) -> dict:
        return {"etas": self.etas,
                "mdb_pct": {lab: dict(cols) for lab, cols in sorted(self.mdb.items())},
                "samples_identical": self.samples_identical}


def sweep_eta(config: RunConfig, etas: Sequence[float],
              out: Optional[str] = None) -> SweepResult:
    """Repeat the run for each learning rate with shared seeds.

    Standalone predictor draws only depend on (seed, episode, step, label),
    so the sweep isolates the fuser: the per-scene sample digests must be
    identical across all learning rates, and that is verified here.
    """
    if not etas:
        raise ValidationError("sweep needs at least one eta")
    etas = [float(e) for e in etas]
    runs: Dict[str, RunResult] = {}
    for eta in etas:
        eta_config = replace(config, fuser=replace(config.fuser, eta=eta))
        eta_out = None if out is None else str(Path(out) / f"eta_{eta:g}")
        runs[f"{eta:g}"] = run(eta_config, out=eta_out)
    baseline = runs[f"{etas[0]:g}"].digests
    identical = all(r.digests == baseline for r in runs.values())
    mdb: Dict[str, Dict[str, float]] = {}
    for key, res in runs.items():
        for label, value in res.mdb().items():
            mdb.setdefault(label, {})[key] = value
    result = SweepResult(etas=etas, mdb=mdb, samples_identical=identical, runs=runs)
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.json").write_text(
            json.dumps(result.to_dict(), indent=1, sort_keys=True) + "\n")
    return result
