"""trajfuse: fusion of rule-based and learned trajectory predictors.

Two standalone predictors (a rule-hierarchy lane planner and a pluggable
learned model) are combined by an online Bayesian belief over which one
currently explains an agent best. The package also ships the evaluation
pipeline: displacement metrics with tail statistics, synthetic scenario
generation, and a deterministic run harness with a CLI.
"""

from .core import (AgentState, Episode, Lane, LaneMap, PredictionScene,
                   Trajectory, TrajectorySamples, ValidationError, derive_seed)
from .dataset import extract_scenes, load_dataset, save_dataset
from .fusion import (Belief, FuserConfig, FusionStep, MultiPredictorFusion,
                     belief_sample_counts, belief_update, fuse,
                     likelihood_ratio, perf_metric)
from .geometry import PolylinePath, project_to_polyline, wrap_angle
from .harness import (RunConfig, RunResult, SweepResult, run, run_config_from_dict,
                      sweep_eta)
from .hierarchy import (BranchScores, HierarchyConfig, boltzmann, rank, reward,
                        reward_batch, score_branches)
from .metrics import (MetricTable, SceneMetrics, ade, build_metric_table, cvar,
                      fde, mdb, min_ade, min_fde, scene_metrics)
from .predictors import (AdapterError, ExternalProcessPredictor,
                         KinematicMixturePredictor, RuleHierarchyPredictor,
                         TrajectoryPredictor, TreePlan)
from .rules import (RobustnessVector, RuleParams, rob_collision, rob_lane_follow,
                    rob_orientation, rob_speed, robustness_vector)
from .scenarios import ScenarioSpec, SuiteConfig, generate, generate_suite, write_suite
from .tree import TreeConfig, build_tree, select_lane

__version__ = "0.1.0"

__all__ = [
    "AgentState", "Trajectory", "Lane", "LaneMap", "Episode", "PredictionScene",
    "TrajectorySamples", "ValidationError", "derive_seed",
    "load_dataset", "save_dataset", "extract_scenes",
    "PolylinePath", "project_to_polyline", "wrap_angle",
    "RuleParams", "RobustnessVector", "rob_collision", "rob_lane_follow",
    "rob_orientation", "rob_speed", "robustness_vector",
    "HierarchyConfig", "BranchScores", "rank", "reward", "reward_batch",
    "boltzmann", "score_branches",
    "TreeConfig", "select_lane", "build_tree",
    "TrajectoryPredictor", "RuleHierarchyPredictor", "KinematicMixturePredictor",
    "ExternalProcessPredictor", "AdapterError", "TreePlan",
    "Belief", "FuserConfig", "FusionStep", "MultiPredictorFusion", "perf_metric",
    "likelihood_ratio", "belief_update", "belief_sample_counts", "fuse",
    "SceneMetrics", "MetricTable", "ade", "fde", "min_ade", "min_fde", "cvar",
    "mdb", "scene_metrics", "build_metric_table",
    "ScenarioSpec", "SuiteConfig", "generate", "generate_suite", "write_suite",
    "RunConfig", "RunResult", "SweepResult", "run", "sweep_eta",
    "run_config_from_dict",
    "__version__",
]
