import dataclasses
import math

import numpy as np
import pytest

from escapesim.geometry import ObstacleSet, Polygon
from escapesim.kinematics import (
    DiscreteAction,
    DiscreteActionSet,
    Pose2,
    scale_action,
)
from escapesim.lidar import LidarSpec, ScanFrame, simulate_scan
from escapesim.mask import (
    BOUNDARY_MARGIN,
    MaskDimensionError,
    brute_force_mask,
    compute_mask,
    load_or_build_table,
    load_table,
    precompute_boundary_table,
    save_table,
)

FWD9 = 2 + 4 * 9  # largest-radius forward-left action


def _square(cx, cy, half):
    return Polygon(
        [
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
        ]
    )


def test_in_place_rows_are_disc(table, footprint):
    for row in (0, 1):
        assert np.allclose(
            table.dist[row], footprint.circumradius + BOUNDARY_MARGIN, atol=1e-12
        )


def test_forward_action_boundary(table, footprint, action_set, limits):
    a = action_set[FWD9]
    travel = a.command.v * limits.dt
    # forward ray: front half-extent plus one-step travel (arc sagitta slop)
    assert table.dist[FWD9][0] == pytest.approx(
        footprint.half_length + travel + BOUNDARY_MARGIN, abs=2e-3
    )
    # rear ray: the start footprint itself bounds the sweep, unpadded
    assert table.dist[FWD9][250] == pytest.approx(footprint.half_length, abs=2e-3)


def test_boundary_bounds(table, footprint, limits):
    cap = footprint.circumradius + limits.v_max * limits.dt + BOUNDARY_MARGIN + 1e-9
    assert np.all(table.dist >= 0.0)
    assert np.all(table.dist <= cap)


def test_table_deterministic(footprint, action_set, lidar_spec, table):
    again = precompute_boundary_table(footprint, action_set, lidar_spec)
    assert np.array_equal(table.dist, again.dist)


def test_compute_mask_open_scene(table, lidar_spec):
    scan = ScanFrame(np.full(lidar_spec.ray_count, lidar_spec.max_range), Pose2(0, 0, 0))
    assert compute_mask(scan, table).valid.all()


def test_compute_mask_tie_is_valid(table):
    scan = ScanFrame(table.dist.max(axis=0).copy(), Pose2(0, 0, 0))
    assert compute_mask(scan, table).valid.all()


def test_compute_mask_dimension_error(table):
    with pytest.raises(MaskDimensionError):
        compute_mask(ScanFrame(np.ones(10), Pose2(0, 0, 0)), table)


def test_wall_ahead_blocks_forward(table, footprint, action_set):
    # wall just past the front face at 0.18 m
    obs = ObstacleSet([_square(0.28, 0.0, 0.1)], (-6, -6, 6, 6))
    pose = Pose2(0, 0, 0)
    scan = simulate_scan(pose, obs)
    m = compute_mask(scan, table).valid
    bf = brute_force_mask(footprint, pose, action_set, obs).valid
    # soundness: every mask-valid action is oracle-valid
    assert not (m & ~bf).any()
    # forward large-radius actions blocked, backward ones clear
    assert not m[FWD9] and not m[FWD9 + 2]  # (+w,+v) and (-w,+v)
    assert m[FWD9 + 1] and m[FWD9 + 3]  # (+w,-v) and (-w,-v)
    back = [
        a.index
        for a in action_set.actions
        if a.kind == "turn" and a.command.v < 0 and a.radius >= 1.28
    ]
    assert all(m[i] for i in back)


def test_mask_monotone_in_ranges(table, lidar_spec):
    rng = np.random.default_rng(8)
    base = rng.uniform(0.15, 1.0, lidar_spec.ray_count)
    bigger = base + rng.uniform(0.0, 0.5, lidar_spec.ray_count)
    v0 = compute_mask(ScanFrame(base, Pose2(0, 0, 0)), table).valid
    v1 = compute_mask(ScanFrame(bigger, Pose2(0, 0, 0)), table).valid
    assert not (v0 & ~v1).any()


def test_scaled_step_stays_valid(table, footprint, action_set, lidar_spec, limits):
    """k<=1 scaling shrinks the sweep, so qualifying scans keep the action."""
    k = 0.5
    scaled_actions = []
    for a in action_set.actions:
        if a.in_place:
            scaled_actions.append(a)
        else:
            scaled_actions.append(
                DiscreteAction(a.index, scale_action(a, k, limits), a.radius, a.kind)
            )
    scaled_set = DiscreteActionSet(tuple(scaled_actions), limits)
    scaled_table = precompute_boundary_table(footprint, scaled_set, lidar_spec)
    rng = np.random.default_rng(4)
    for _ in range(20):
        ranges = rng.uniform(0.18, 0.6, lidar_spec.ray_count)
        scan = ScanFrame(ranges, Pose2(0, 0, 0))
        full = compute_mask(scan, table).valid
        scl = compute_mask(scan, scaled_table).valid
        assert not (full & ~scl).any()


def test_brute_force_empty_scene(footprint, action_set):
    obs = ObstacleSet([], (-6, -6, 6, 6))
    assert brute_force_mask(footprint, Pose2(0, 0, 0), action_set, obs).valid.all()


def test_brute_force_boxed_in(footprint, action_set):
    # four slabs at 2 mm clearance: every translating action collides
    g = 0.175 + 0.002 + 0.1
    obs = ObstacleSet(
        [_square(g, 0, 0.1), _square(-g, 0, 0.1), _square(0, g, 0.1), _square(0, -g, 0.1)],
        (-6, -6, 6, 6),
    )
    bf = brute_force_mask(footprint, Pose2(0, 0, 0), action_set, obs).valid
    for a in action_set.actions:
        if not a.in_place:
            assert not bf[a.index]


def test_table_roundtrip(tmp_path, table):
    path = tmp_path / "table.npz"
    save_table(table, path)
    loaded = load_table(path)
    assert np.array_equal(loaded.dist, table.dist)
    assert loaded.key() == table.key()


def test_table_cache(tmp_path, footprint, action_set, lidar_spec, table):
    t1 = load_or_build_table(tmp_path, footprint, action_set, lidar_spec)
    assert len(list(tmp_path.glob("boundary_*.npz"))) == 1
    t2 = load_or_build_table(tmp_path, footprint, action_set, lidar_spec)
    assert np.array_equal(t1.dist, t2.dist)
    assert np.array_equal(t1.dist, table.dist)


def test_soundness_randomized(scenario_batch, footprint, action_set, table):
    """No false valids on generated scenes; conservative rate stays low.
    (The full 1000-pair run lives in the acceptance suite.)"""
    from escapesim.geometry import collides

    rng = np.random.default_rng(21)
    false_valid = 0
    conservative = 0
    oracle_valid = 0
    pairs = 0
    while pairs < 60:
        sc = scenario_batch[pairs % len(scenario_batch)]
        xmin, ymin, xmax, ymax = sc.obstacles.arena
        pose = Pose2(
            rng.uniform(xmin + 0.26, xmax - 0.26),
            rng.uniform(ymin + 0.26, ymax - 0.26),
            rng.uniform(-math.pi, math.pi),
        )
        if collides(footprint, pose, sc.obstacles):
            continue
        pairs += 1
        scan = simulate_scan(pose, sc.obstacles)
        m = compute_mask(scan, table).valid
        bf = brute_force_mask(footprint, pose, action_set, sc.obstacles).valid
        false_valid += int((m & ~bf).sum())
        conservative += int((bf & ~m).sum())
        oracle_valid += int(bf.sum())
    assert false_valid == 0
    assert conservative / oracle_valid < 0.10
