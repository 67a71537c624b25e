"""Built-in evaluation policies: random, greedy-masked scripted, and the
inflated-A* guidance planner (the ROS-Navigation-style proxy baseline)."""

import math

import numpy as np

from .env import Observation, SOURCE_GUIDANCE, SOURCE_POLICY
from .kinematics import (
    DiscreteActionSet,
    Pose2,
    VelocityCommand,
    integrate_arc,
    normalize_angle,
)
from .planner import PlanExhausted, PlanningContext, RTRExecutor


class Policy:
    """Per-episode action source driven by observations.

    ``begin_episode`` receives the live environment; white-box policies
    (the guidance planner) may use it, observation-driven ones must not.
    """

    name = "policy"
    source = SOURCE_POLICY

    def begin_episode(self, env) -> None:
        pass

    def act(self, obs: Observation) -> VelocityCommand | None:
        raise NotImplementedError

    def feedback(self, step_record: dict) -> None:
        pass

    def close(self) -> None:
        pass


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, action_set: DiscreteActionSet, seed: int = 0):
        self.action_set = action_set
        self.rng = np.random.default_rng(seed)

    def act(self, obs: Observation) -> VelocityCommand:
        return self.action_set[int(self.rng.integers(len(self.action_set)))].command


class ScriptedPolicy(Policy):
    """Greedy masked chaser: among mask-valid actions and their k-scaled
    variants, pick the one-step endpoint (ego frame) closest to the goal
    with a heading-alignment tiebreaker. Scaling by k <= 1 keeps the arc
    geometry, so a scaled variant of a mask-valid action only shrinks the
    swept region and stays safe. Stays put when nothing is valid."""

    name = "scripted"
    SCALES = (1.0, 0.5, 0.25, 0.1)

    def __init__(self, action_set: DiscreteActionSet, heading_weight: float = 0.12):
        self.action_set = action_set
        self.dt = action_set.limits.dt
        self.heading_weight = heading_weight
        self._cmds = []
        self._endpoints = []
        for a in action_set.actions:
            per_action = []
            for k in self.SCALES:
                cmd = VelocityCommand(k * a.command.omega, k * a.command.v)
                per_action.append(
                    (cmd, integrate_arc(Pose2(0.0, 0.0, 0.0), cmd, self.dt))
                )
            self._cmds.append(per_action)

    def act(self, obs: Observation) -> VelocityCommand:
        valid = np.flatnonzero(obs.mask)
        if valid.size == 0:
            return VelocityCommand(0.0, 0.0)
        d, ct, st, cp, sp = obs.target
        gx, gy = d * ct, d * st
        phi = math.atan2(sp, cp)
        best, best_score = None, math.inf
        for i in valid:
            for cmd, e in self._cmds[i]:
                score = math.hypot(e.x - gx, e.y - gy)
                score += self.heading_weight * abs(normalize_angle(phi - e.theta))
                if score < best_score:
                    best, best_score = cmd, score
        return best


class GuidancePolicy(Policy):
    """Decoupled planner+executor: plan once at episode start at a fixed
    inflation radius, then follow the RTR plan open loop. Exposes whether
    planning succeeded so reports can decompose planning vs control."""

    source = SOURCE_GUIDANCE

    def __init__(self, inflation: float, resolution: float = 0.02, context_cache=None):
        self.inflation = inflation
        self.resolution = resolution
        self.name = f"guidance[{inflation:g}m]"
        # a caller-supplied cache lets radius sweeps share clearance fields
        self._contexts = context_cache if context_cache is not None else {}
        self._shared = context_cache is not None
        self._env = None
        self._executor = None
        self.planning_success = False

    def begin_episode(self, env) -> None:
        self._env = env
        key = id(env.scenario)
        if key not in self._contexts:
            if not self._shared:
                self._contexts.clear()  # scenario sets are iterated, not mixed
            self._contexts[key] = PlanningContext(env.scenario, self.resolution)
        plan = self._contexts[key].plan(self.inflation, from_pose=env.pose)
        self.planning_success = plan is not None
        self._executor = (
            RTRExecutor(plan, env.pose, env.limits) if plan is not None else None
        )

    def act(self, obs: Observation) -> VelocityCommand | None:
        if self._executor is None:
            return None
        try:
            return self._executor.next_command(self._env.pose)
        except PlanExhausted:
            return None


def make_policy(spec: str, action_set: DiscreteActionSet, *, seed: int = 0,
                inflation: float = None, resolution: float = 0.02) -> Policy:
    """Policy from a CLI spec: random | scripted | guidance[:radius] |
    external:tcp:HOST:PORT (resolved by the bench module)."""
    if spec == "random":
        return RandomPolicy(action_set, seed)
    if spec == "scripted":
        return ScriptedPolicy(action_set)
    if spec == "guidance" or spec.startswith("guidance:"):
        r = inflation
        if spec.startswith("guidance:"):
            r = float(spec.split(":", 1)[1])
        if r is None:
            from .geometry import Footprint

            r = Footprint().circumradius
        return GuidancePolicy(r, resolution)
    raise ValueError(f"unknown policy spec {spec!r}")
