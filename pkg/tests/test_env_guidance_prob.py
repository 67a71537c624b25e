import numpy as np
import pytest

from escapesim.env import (
    EpisodeConfig,
    EscapeEnv,
    SOURCE_GUIDANCE,
    SOURCE_POLICY,
)
from escapesim.geometry import ObstacleSet
from escapesim.kinematics import Pose2, VelocityCommand
from escapesim.scenario import Scenario


def _open_scenario():
    start, goal = Pose2(1, 2, 0), Pose2(3, 2, 0)
    return Scenario(
        obstacles=ObstacleSet([], (0, 0, 4, 4)),
        start=start,
        goal=goal,
        goal_tolerance=(0.05, 0.35),
        features=frozenset(),
        seed=0,
        witness_path=[start, goal],
    )


def test_guidance_prob_validation():
    with pytest.raises(ValueError):
        EpisodeConfig(guidance_prob=1.5)


def test_guidance_anneal_mixes_sources(table):
    env = EscapeEnv(
        _open_scenario(),
        EpisodeConfig(hybrid_guidance=True, guidance_prob=0.5, max_steps=400),
        table=table,
    )
    env.reset(seed=9)
    sources = []
    for _ in range(60):
        if env.terminal:
            break
        cmd, src = env.hybrid_action(VelocityCommand(0.0, 0.0))
        sources.append(src)
        env.step(cmd, source=src)
    assert SOURCE_GUIDANCE in sources and SOURCE_POLICY in sources


def test_guidance_prob_default_always_takes(table):
    env = EscapeEnv(
        _open_scenario(),
        EpisodeConfig(hybrid_guidance=True, max_steps=400),
        table=table,
    )
    env.reset(seed=9)
    for _ in range(30):
        if env.terminal:
            break
        cmd, src = env.hybrid_action(VelocityCommand(0.0, 0.0))
        assert src == SOURCE_GUIDANCE
        env.step(cmd, source=src)
