import dataclasses

import pytest

from escapesim.geometry import Footprint
from escapesim.kinematics import MotionLimits, build_action_space
from escapesim.lidar import LidarSpec
from escapesim.mask import precompute_boundary_table
from escapesim.scenario import GeneratorConfig, SCENARIO_CLASSES, generate


@pytest.fixture(scope="session")
def limits():
    return MotionLimits()


@pytest.fixture(scope="session")
def footprint():
    return Footprint()


@pytest.fixture(scope="session")
def action_set(limits):
    return build_action_space(limits)


@pytest.fixture(scope="session")
def lidar_spec():
    return LidarSpec()


@pytest.fixture(scope="session")
def table(footprint, action_set, lidar_spec):
    return precompute_boundary_table(footprint, action_set, lidar_spec)


@pytest.fixture(scope="session")
def scenario_batch():
    """Ten generated scenarios, two per class, fixed seeds."""
    out = []
    for k in range(10):
        cfg = dataclasses.replace(
            GeneratorConfig(), target_features=SCENARIO_CLASSES[k % 5]
        )
        out.append(generate(cfg, seed=100 + k))
    return out
