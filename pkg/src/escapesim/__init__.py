"""escapesim: 2D dead-zone escape toolkit for a square differential-drive
robot - exact arc kinematics, a uniform-turning-radius discrete action
space with a precomputed Lidar action mask, inflated-A* guidance,
feasibility-guaranteed scenario generation, an MDP escape environment,
and a benchmark CLI with an external-policy IPC protocol."""

from ._kernels import backend_name
from .env import (
    EpisodeConfig,
    EscapeEnv,
    Observation,
    RewardBreakdown,
    StepResult,
    compute_reward,
)
from .geometry import Footprint, ObstacleSet, Polygon, collides, footprint_at, iou, max_free_arc
from .kinematics import (
    DiscreteAction,
    DiscreteActionSet,
    MotionLimits,
    Pose2,
    VelocityCommand,
    build_action_space,
    integrate_arc,
    scale_action,
)
from .lidar import LidarSpec, ScanFrame, simulate_scan
from .mask import (
    ActionValidity,
    BoundaryTable,
    brute_force_mask,
    compute_mask,
    precompute_boundary_table,
)
from .planner import (
    GridPath,
    OccupancyGrid,
    RTRExecutor,
    RTRPlan,
    Rotate,
    Translate,
    astar,
    feasibility,
    inflate,
    path_to_rtr,
    rasterize,
)
from .scenario import (
    GeneratorConfig,
    Scenario,
    build_benchmark_sets,
    corridor_scenario,
    generate,
    load_scenario,
    measure_features,
    save_scenario,
)

__version__ = "0.1.0"
