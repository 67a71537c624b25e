"""Benchmark harness: run a policy over scenario sets and decompose
success into planning and control rates per scenario class."""

import hashlib
import json
from dataclasses import dataclass, field

from .env import CAUSE_SUCCESS, EpisodeConfig, EscapeEnv
from .ipc import (
    ProtocolError,
    dial,
    handshake_env_side,
    nearest_action_index,
    obs_record,
    parse_act,
    step_record,
)
from .policies import GuidancePolicy, Policy, make_policy

CAUSE_INCOMPLETE = "incomplete"  # policy gave up / plan exhausted off-target
CAUSE_PROTOCOL = "protocol_error"


@dataclass
class ClassStats:
    episodes: int = 0
    successes: int = 0
    collisions: int = 0
    timeouts: int = 0
    incompletes: int = 0
    protocol_errors: int = 0
    planning_attempts: int = 0
    planning_successes: int = 0
    control_successes: int = 0
    total_steps: int = 0

    def rates(self, planner: bool) -> dict:
        out = {
            "episodes": self.episodes,
            "successes": self.successes,
            "collisions": self.collisions,
            "timeouts": self.timeouts,
            "incompletes": self.incompletes,
            "protocol_errors": self.protocol_errors,
            "mean_steps": (self.total_steps / self.episodes) if self.episodes else 0.0,
            "total_success_rate": (self.successes / self.episodes)
            if self.episodes
            else 0.0,
        }
        if planner:
            out["planning_success_rate"] = (
                self.planning_successes / self.planning_attempts
                if self.planning_attempts
                else 0.0
            )
            out["control_success_rate"] = (
                self.control_successes / self.planning_successes
                if self.planning_successes
                else 0.0
            )
            out["planning_successes"] = self.planning_successes
            out["control_successes"] = self.control_successes
        else:
            out["planning_success_rate"] = None
            out["control_success_rate"] = None
        return out


@dataclass
class BenchmarkReport:
    policy: str
    seed: int
    episodes_per_scenario: int
    config_hash: str
    planner_policy: bool
    classes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        overall = ClassStats()
        for st in self.classes.values():
            for f in ClassStats.__dataclass_fields__:
                setattr(overall, f, getattr(overall, f) + getattr(st, f))
        return {
            "policy": self.policy,
            "seed": self.seed,
            "episodes_per_scenario": self.episodes_per_scenario,
            "config_hash": self.config_hash,
            "classes": {
                label: self.classes[label].rates(self.planner_policy)
                for label in sorted(self.classes)
            },
            "overall": overall.rates(self.planner_policy),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class ExternalPolicy(Policy):
    """Bridges the bench loop to a remote policy over the IPC protocol.

    The bench side plays the environment role: it dials the address,
    handshakes, streams observations, and forwards step feedback.
    """

    def __init__(self, address: str, env: EscapeEnv, timeout: float = 5.0):
        self.name = f"external[{address}]"
        self.timeout = timeout
        self.conn = dial(address)
        handshake_env_side(self.conn, env, timeout)
        self.episode = -1
        self.step = 0
        self.env = env
        self.action_set = env.action_set

    def begin_episode(self, env) -> None:
        self.env = env
        self.episode += 1
        self.step = 0
        self.conn.send(
            {
                "type": "episode",
                "episode": self.episode,
                "scenario_seed": env.scenario.seed,
                "class": env.scenario.class_label(),
                "stage": env.config.stage,
                "goal": [env.goal.x, env.goal.y, env.goal.theta],
            }
        )

    def act(self, obs):
        self.conn.send(obs_record(self.episode, self.step, obs))
        rec = self.conn.recv(self.timeout)
        return parse_act(rec, self.action_set)

    def feedback(self, result, cmd, source) -> None:
        self.conn.send(
            step_record(
                self.episode,
                self.step,
                result,
                cmd,
                nearest_action_index(self.action_set, cmd),
                source,
            )
        )
        self.step += 1

    def end(self, summary: dict) -> None:
        self.conn.send({"type": "end", **summary})

    def close(self) -> None:
        self.conn.close()


def _config_hash(scenarios, policy_name, seed, episodes, max_steps) -> str:
    payload = json.dumps(
        {
            "scenario_seeds": [s.seed for s in scenarios],
            "policy": policy_name,
            "seed": seed,
            "episodes": episodes,
            "max_steps": max_steps,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def run_benchmark(
    scenarios,
    policy_spec: str,
    *,
    episodes_per_scenario: int = 1,
    seed: int = 0,
    max_steps: int = 100,
    inflation: float = None,
    resolution: float = 0.02,
    env_kwargs: dict = None,
    trace_dir=None,
    timeout: float = 5.0,
) -> BenchmarkReport:
    """Evaluation-mode benchmark (no hybrid guidance for external policies).

    A policy timeout or protocol violation aborts that episode and counts
    it as a failure, tallied separately as a protocol error.
    """
    if not scenarios:
        raise ValueError("empty scenario set")
    env_kwargs = dict(env_kwargs or {})
    config = EpisodeConfig(max_steps=max_steps)
    first_env = EscapeEnv(scenarios[0], config, **env_kwargs)

    if isinstance(policy_spec, Policy):
        policy = policy_spec
    elif policy_spec.startswith("external:"):
        policy = ExternalPolicy(policy_spec.split(":", 1)[1], first_env, timeout)
    else:
        policy = make_policy(
            policy_spec,
            first_env.action_set,
            seed=seed,
            inflation=inflation,
            resolution=resolution,
        )
    planner = isinstance(policy, GuidancePolicy)

    report = BenchmarkReport(
        policy=policy.name,
        seed=seed,
        episodes_per_scenario=episodes_per_scenario,
        config_hash=_config_hash(
            scenarios, policy.name, seed, episodes_per_scenario, max_steps
        ),
        planner_policy=planner,
    )

    shared = {
        "table": first_env.table,
        "action_set": first_env.action_set,
        "footprint": first_env.footprint,
        "limits": first_env.limits,
        "lidar_spec": first_env.lidar_spec,
    }
    shared.update(env_kwargs)

    ep_index = 0
    summary = {"episodes": 0, "successes": 0}
    for s_idx, scenario in enumerate(scenarios):
        env = first_env if s_idx == 0 else EscapeEnv(scenario, config, **shared)
        label = scenario.class_label()
        stats = report.classes.setdefault(label, ClassStats())
        for rep in range(episodes_per_scenario):
            trace_fh = None
            if trace_dir is not None:
                import pathlib

                tdir = pathlib.Path(trace_dir)
                tdir.mkdir(parents=True, exist_ok=True)
                trace_fh = open(tdir / f"episode_{ep_index:05d}.jsonl", "w")
                env.trace_to(trace_fh)
            obs = env.reset(seed=seed + ep_index)
            policy.begin_episode(env)
            stats.episodes += 1
            summary["episodes"] += 1
            if planner:
                stats.planning_attempts += 1
                if policy.planning_success:
                    stats.planning_successes += 1
            cause = None
            try:
                while True:
                    cmd = policy.act(obs)
                    if cmd is None:
                        cause = CAUSE_INCOMPLETE
                        break
                    result = env.step(cmd, source=policy.source)
                    if isinstance(policy, ExternalPolicy):
                        policy.feedback(result, cmd, policy.source)
                    obs = result.observation
                    if result.terminal:
                        cause = result.cause
                        break
            except (TimeoutError, ProtocolError):
                cause = CAUSE_PROTOCOL
            stats.total_steps += env.steps
            if cause == CAUSE_SUCCESS:
                stats.successes += 1
                summary["successes"] += 1
                if planner:
                    stats.control_successes += 1
            elif cause == "collision":
                stats.collisions += 1
            elif cause == "timeout":
                stats.timeouts += 1
            elif cause == CAUSE_PROTOCOL:
                stats.protocol_errors += 1
            else:
                stats.incompletes += 1
            if trace_fh is not None:
                env.trace_to(None)
                trace_fh.close()
            ep_index += 1
    if isinstance(policy, ExternalPolicy):
        try:
            policy.end(summary)
        except (OSError, ProtocolError):
            pass
    policy.close()
    return report
