"""The escape MDP: observations, reward shaping, termination, and the
hybrid guidance gate used during training.

One environment instance owns one episode at a time (single-threaded
mutable state); scenarios, boundary tables, and action sets are shared
read-only across instances.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .geometry import Footprint, collides, footprint_at, iou
from .kinematics import (
    MotionLimits,
    Pose2,
    VelocityCommand,
    build_action_space,
    integrate_arc,
    normalize_angle,
)
from .lidar import LidarSpec, simulate_scan
from .mask import compute_mask, precompute_boundary_table
from .planner import PlanningContext, PlanExhausted, RTRExecutor
from .scenario import Scenario, scenario_to_dict

STAGE_FIXED = "fixed_goal_near_entrance"
STAGE_RANDOM = "randomized_goal"

CAUSE_SUCCESS = "success"
CAUSE_COLLISION = "collision"
CAUSE_TIMEOUT = "timeout"

SOURCE_POLICY = "policy"
SOURCE_GUIDANCE = "guidance"


class EpisodeError(RuntimeError):
    pass


class StepAfterTerminal(EpisodeError):
    pass


class HybridUnavailable(EpisodeError):
    """Hybrid guidance queried outside training mode."""


@dataclass
class EpisodeConfig:
    max_steps: int = 100
    success_iou: float = 0.8
    stage: str = STAGE_FIXED
    hybrid_guidance: bool = False  # training-mode A* gate
    guidance_prob: float = 1.0  # anneal knob: chance of taking a feasible plan
    gamma: float = 0.99  # bookkeeping for trainers; unused by the env itself
    weights: tuple = (1.0, 0.5, 0.1)  # (w_iou, w_dist, w_time)
    time_constant: float = 0.5
    collision_ds: float = 0.005

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if not (0.0 < self.success_iou <= 1.0):
            raise ValueError("success_iou must be in (0, 1]")
        if not (0.0 <= self.guidance_prob <= 1.0):
            raise ValueError("guidance_prob must be in [0, 1]")
        if self.stage not in (STAGE_FIXED, STAGE_RANDOM):
            raise ValueError(f"unknown curriculum stage {self.stage!r}")


@dataclass
class Observation:
    """Scan ranges, ego target tuple (d, cos/sin bearing, cos/sin heading
    error), and the 42 validity flags."""

    scan: np.ndarray
    target: np.ndarray
    mask: np.ndarray


@dataclass
class RewardBreakdown:
    iou_term: float
    distance_term: float
    time_term: float
    total: float
    weights: tuple


@dataclass
class StepResult:
    observation: Observation
    reward: RewardBreakdown
    terminal: bool
    cause: str | None


def compute_reward(
    prev_pose: Pose2,
    new_pose: Pose2,
    goal: Pose2,
    fp: Footprint = Footprint(),
    limits: MotionLimits = MotionLimits(),
    config: EpisodeConfig = None,
) -> RewardBreakdown:
    """Reward = w_iou * IOU(footprint, goal box)
             + w_dist * per-step progress normalized by v_max*dt, in [-1, 1]
             + w_time * (-tanh(c)), a constant bounded time penalty."""
    cfg = config if config is not None else EpisodeConfig()
    w_iou, w_dist, w_time = cfg.weights
    iou_term = iou(footprint_at(fp, new_pose), footprint_at(fp, goal))
    d_prev = math.hypot(goal.x - prev_pose.x, goal.y - prev_pose.y)
    d_new = math.hypot(goal.x - new_pose.x, goal.y - new_pose.y)
    distance_term = (d_prev - d_new) / (limits.v_max * limits.dt)
    distance_term = max(-1.0, min(1.0, distance_term))
    time_term = -math.tanh(cfg.time_constant)
    total = w_iou * iou_term + w_dist * distance_term + w_time * time_term
    return RewardBreakdown(iou_term, distance_term, time_term, total, cfg.weights)


class EscapeEnv:
    def __init__(
        self,
        scenario: Scenario,
        config: EpisodeConfig = None,
        *,
        footprint: Footprint = None,
        limits: MotionLimits = None,
        lidar_spec: LidarSpec = None,
        action_set=None,
        table=None,
        resolution: float = 0.02,
    ):
        self.config = config if config is not None else EpisodeConfig()
        self.footprint = footprint if footprint is not None else Footprint()
        self.limits = limits if limits is not None else MotionLimits()
        self.lidar_spec = lidar_spec if lidar_spec is not None else LidarSpec()
        self.action_set = (
            action_set if action_set is not None else build_action_space(self.limits)
        )
        self.table = (
            table
            if table is not None
            else precompute_boundary_table(
                self.footprint, self.action_set, self.lidar_spec, self.limits.dt
            )
        )
        self.resolution = resolution
        self._trace_fh = None
        self._bind(scenario)

    def _bind(self, scenario: Scenario):
        self.scenario = scenario
        self._planning = PlanningContext(scenario, self.resolution)
        self._goal_component = {}
        self.pose = None
        self.goal = None
        self.steps = 0
        self.terminal = True
        self.cause = None
        self._executor = None
        self._expected = None
        self._rng = np.random.default_rng()

    # ------------------------------------------------------------------
    # episode control

    def reset(self, seed=None, scenario: Scenario = None) -> Observation:
        if scenario is not None:
            self._bind(scenario)
        sc = self.scenario
        rng = np.random.default_rng(seed)
        if self.config.stage == STAGE_FIXED:
            start, goal = sc.start, sc.goal
            if collides(self.footprint, start, sc.obstacles):
                raise EpisodeError("scenario start pose collides")
        else:
            start = self._sample_free_pose(rng)
            goal = self._sample_free_pose(rng)
        self._rng = rng
        self.pose = start
        self.goal = goal
        self.steps = 0
        self.terminal = False
        self.cause = None
        self._executor = None
        self._expected = None
        obs = self.observe()
        self._trace_header()
        return obs

    def _sample_free_pose(self, rng, tries: int = 300) -> Pose2:
        xmin, ymin, xmax, ymax = self.scenario.obstacles.arena
        m = self.footprint.circumradius + 1e-3
        for _ in range(tries):
            pose = Pose2(
                rng.uniform(xmin + m, xmax - m),
                rng.uniform(ymin + m, ymax - m),
                rng.uniform(-math.pi, math.pi),
            )
            if not collides(self.footprint, pose, self.scenario.obstacles):
                return pose
        raise EpisodeError("no collision-free pose found in scenario")

    def step(self, cmd: VelocityCommand, source: str = SOURCE_POLICY) -> StepResult:
        if self.terminal:
            raise StepAfterTerminal("episode already ended; call reset()")
        lim = self.limits
        w = max(-lim.omega_max, min(lim.omega_max, cmd.omega))
        v = max(-lim.v_max, min(lim.v_max, cmd.v))
        cmd = VelocityCommand(w, v)
        prev = self.pose

        # dense swept check along the commanded interval
        rc = self.footprint.circumradius
        travel = (abs(v) + abs(w) * rc) * lim.dt
        k = max(1, int(math.ceil(travel / self.config.collision_ds)))
        poses = np.empty((k, 3))
        for i in range(1, k + 1):
            p = integrate_arc(prev, cmd, lim.dt * i / k)
            poses[i - 1] = (p.x, p.y, p.theta)
        verts, offsets = self.scenario.obstacles.flat()
        hit = _kernels.sweep_first_collision(
            poses,
            self.footprint.half_length,
            self.footprint.half_width,
            verts,
            offsets,
            self.scenario.obstacles.arena_array(),
        )
        collision = hit >= 0
        if collision:
            # stop at the last collision-free sample
            new_pose = (
                prev if hit == 0 else Pose2(*poses[hit - 1])
            )
        else:
            new_pose = Pose2(*poses[-1])

        reward = compute_reward(
            prev, new_pose, self.goal, self.footprint, lim, self.config
        )
        self.steps += 1
        if collision:
            cause = CAUSE_COLLISION
        elif reward.iou_term >= self.config.success_iou:
            cause = CAUSE_SUCCESS
        elif self.steps >= self.config.max_steps:
            cause = CAUSE_TIMEOUT
        else:
            cause = None
        self.pose = new_pose
        self.terminal = cause is not None
        self.cause = cause
        obs = self.observe()
        self._trace_step(cmd, reward, obs, source)
        return StepResult(obs, reward, self.terminal, cause)

    def observe(self) -> Observation:
        scan = simulate_scan(self.pose, self.scenario.obstacles, self.lidar_spec)
        dx = self.goal.x - self.pose.x
        dy = self.goal.y - self.pose.y
        d = math.hypot(dx, dy)
        if d < 1e-6:
            ct, st = 1.0, 0.0
        else:
            bearing = normalize_angle(math.atan2(dy, dx) - self.pose.theta)
            ct, st = math.cos(bearing), math.sin(bearing)
        phi = normalize_angle(self.goal.theta - self.pose.theta)
        target = np.array([d, ct, st, math.cos(phi), math.sin(phi)])
        mask = compute_mask(scan, self.table)
        return Observation(scan.ranges, target, mask.valid)

    # ------------------------------------------------------------------
    # hybrid training policy

    def hybrid_action(self, policy_cmd: VelocityCommand):
        """(command, source): inflated-A* guidance when a safe path exists
        from the current pose, the policy's command otherwise.

        Training-mode only; evaluation callers use the policy directly.
        """
        if not self.config.hybrid_guidance:
            raise HybridUnavailable("hybrid guidance is a training-mode feature")
        radius = self.footprint.circumradius
        if not self._goal_reachable(radius):
            self._executor = None
            return policy_cmd, SOURCE_POLICY
        if self.config.guidance_prob < 1.0 and self._rng.random() >= self.config.guidance_prob:
            return policy_cmd, SOURCE_POLICY
        deviated = (
            self._expected is not None
            and math.hypot(
                self.pose.x - self._expected.x, self.pose.y - self._expected.y
            )
            > self.resolution
        )
        if self._executor is None or deviated:
            plan = self._planning.plan(radius, from_pose=self.pose)
            self._executor = (
                RTRExecutor(plan, self.pose, self.limits) if plan is not None else None
            )
        if self._executor is not None:
            try:
                cmd = self._executor.next_command(self.pose)
            except PlanExhausted:
                cmd = None
            if cmd is not None:
                self._expected = integrate_arc(self.pose, cmd, self.limits.dt)
                return cmd, SOURCE_GUIDANCE
        return policy_cmd, SOURCE_POLICY

    def _goal_reachable(self, radius: float) -> bool:
        """Fast feasibility pre-check: is the current cell in the goal's
        free-space component? (A component match can still fail A*'s
        no-corner-cutting rule; the planner has the final word.)"""
        key = round(radius, 9)
        if key not in self._goal_component:
            occ = self._planning.grid(radius).occupancy
            labels, _ = ndimage.label(~occ, structure=np.ones((3, 3), dtype=int))
            self._goal_component[key] = labels
        labels = self._goal_component[key]
        grid = self._planning.grid(radius)
        sx, sy = grid.cell_of(self.pose.x, self.pose.y)
        gx, gy = grid.cell_of(self.scenario.goal.x, self.scenario.goal.y)
        ny, nx = labels.shape
        if not (0 <= sx < nx and 0 <= sy < ny and 0 <= gx < nx and 0 <= gy < ny):
            return False
        return labels[sy, sx] != 0 and labels[sy, sx] == labels[gy, gx]

    # ------------------------------------------------------------------
    # trace export

    def trace_to(self, fh) -> None:
        """Write episode traces (one JSON line per step) to a file object."""
        self._trace_fh = fh

    def _trace_header(self):
        if self._trace_fh is None:
            return
        rec = {
            "type": "header",
            "version": 1,
            "stage": self.config.stage,
            "start": [self.pose.x, self.pose.y, self.pose.theta],
            "goal": [self.goal.x, self.goal.y, self.goal.theta],
            "footprint": [self.footprint.half_length, self.footprint.half_width],
            "limits": [self.limits.omega_max, self.limits.v_max, self.limits.dt],
            "success_iou": self.config.success_iou,
            "max_steps": self.config.max_steps,
            "scenario": scenario_to_dict(self.scenario),
        }
        self._trace_fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    def _trace_step(self, cmd, reward, obs, source):
        if self._trace_fh is None:
            return
        rec = {
            "type": "step",
            "step": self.steps,
            "pose": [self.pose.x, self.pose.y, self.pose.theta],
            "cmd": [cmd.omega, cmd.v],
            "reward": {
                "iou": reward.iou_term,
                "distance": reward.distance_term,
                "time": reward.time_term,
                "total": reward.total,
            },
            "mask": [int(b) for b in obs.mask],
            "source": source,
            "terminal": self.terminal,
            "cause": self.cause,
        }
        self._trace_fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
