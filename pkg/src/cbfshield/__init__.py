"""CBF-QP runtime safety filter for 7-DOF manipulators."""

from .collision import (
    Box,
    CollisionScene,
    CollisionSphere,
    HalfSpace,
    SphereObstacle,
    VerticalCylinder,
    barrier_value,
    evaluate_barrier,
    load_scene,
    pair_distance,
)
from .config import ConfigError
from .encoding import crop_resize, depth_to_turbo, turbo_lut, zero_mask_image
from .kinematics import (
    JointLimits,
    KinematicChain,
    RigidTransform,
    flange_pose,
    forward_kinematics,
    geometric_jacobian,
    load_chain,
    panda_chain,
    point_jacobian,
)
from .qp import QpInfeasible, QpMaxIterations, QpProblem, QpSolution, QpWorkspace, solve_qp
from .saliency import attention_mass, normalized_entropy, pearson_alignment
from .safety_filter import ActionCommand, FilterError, FilterParams, FilterResult, SafetyFilter, filter_action
from .sim import (
    ConstantDelta,
    EpisodeLog,
    NoisyHallucination,
    ScenarioConfig,
    Scripted,
    WaypointApproach,
    compare_runs,
    load_scenario,
    run_batch,
    run_episode,
)
from .fixtures import make_scenario_fixtures

__version__ = "0.1.0"

__all__ = [
    "ActionCommand",
    "Box",
    "CollisionScene",
    "CollisionSphere",
    "ConfigError",
    "ConstantDelta",
    "EpisodeLog",
    "FilterError",
    "FilterParams",
    "FilterResult",
    "HalfSpace",
    "JointLimits",
    "KinematicChain",
    "NoisyHallucination",
    "QpInfeasible",
    "QpMaxIterations",
    "QpProblem",
    "QpSolution",
    "QpWorkspace",
    "RigidTransform",
    "SafetyFilter",
    "ScenarioConfig",
    "Scripted",
    "SphereObstacle",
    "VerticalCylinder",
    "WaypointApproach",
    "attention_mass",
    "barrier_value",
    "compare_runs",
    "crop_resize",
    "depth_to_turbo",
    "evaluate_barrier",
    "filter_action",
    "flange_pose",
    "forward_kinematics",
    "geometric_jacobian",
    "load_chain",
    "load_scenario",
    "load_scene",
    "make_scenario_fixtures",
    "normalized_entropy",
    "pair_distance",
    "panda_chain",
    "pearson_alignment",
    "point_jacobian",
    "run_batch",
    "run_episode",
    "solve_qp",
    "turbo_lut",
    "zero_mask_image",
]
