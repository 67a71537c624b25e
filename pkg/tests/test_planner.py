import heapq
import math

import numpy as np
import pytest

from escapesim.geometry import ObstacleSet, Polygon, collides
from escapesim.kinematics import MotionLimits, Pose2, integrate_arc
from escapesim.planner import (
    SQRT2,
    CellOccupiedError,
    OccupancyGrid,
    PlanExhausted,
    PlanningContext,
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
from escapesim.scenario import Scenario, corridor_scenario


def _square(cx, cy, half):
    return Polygon(
        [
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
        ]
    )


def _scenario(polys, arena, start, goal):
    return Scenario(
        obstacles=ObstacleSet(polys, arena),
        start=start,
        goal=goal,
        goal_tolerance=(0.05, 0.35),
        features=frozenset(),
        seed=0,
        witness_path=[start, goal],
    )


# ---------------------------------------------------------------------------
# rasterize / inflate


def test_rasterize_empty():
    sc = _scenario([], (0, 0, 2, 2), Pose2(0.5, 0.5, 0), Pose2(1.5, 1.5, 0))
    grid = rasterize(sc, 0.02)
    assert grid.occupancy.shape == (100, 100)
    assert not grid.occupancy.any()


def test_rasterize_single_cell():
    sc = _scenario(
        [Polygon([[0.405, 0.405], [0.415, 0.405], [0.415, 0.415], [0.405, 0.415]])],
        (0, 0, 2, 2),
        Pose2(0.5, 0.5, 0),
        Pose2(1.5, 1.5, 0),
    )
    grid = rasterize(sc, 0.02)
    assert grid.occupancy[20, 20]
    assert grid.occupancy.sum() == 1


def test_rasterize_diagonal_connected():
    from scipy import ndimage

    # thin diagonal sliver: conservative rasterization leaves no gaps
    sc = _scenario(
        [Polygon([[0.2, 0.2], [0.21, 0.2], [1.61, 1.6], [1.6, 1.6]])],
        (0, 0, 2, 2),
        Pose2(0.5, 1.5, 0),
        Pose2(1.5, 0.5, 0),
    )
    grid = rasterize(sc, 0.02)
    _, n = ndimage.label(grid.occupancy, structure=np.ones((3, 3), dtype=int))
    assert n == 1


def test_inflate_identity_and_disc():
    occ = np.zeros((41, 41), dtype=bool)
    occ[20, 20] = True
    grid = OccupancyGrid(0.02, (0.0, 0.0), occ)
    same = inflate(grid, 0.0)
    assert np.array_equal(same.occupancy, occ)
    disc = inflate(grid, 0.1)
    ys, xs = np.mgrid[0:41, 0:41]
    expected = (ys - 20) ** 2 + (xs - 20) ** 2 <= 25
    assert np.array_equal(disc.occupancy, expected)


def test_inflate_monotone():
    rng = np.random.default_rng(0)
    occ = rng.random((40, 40)) < 0.1
    grid = OccupancyGrid(0.02, (0.0, 0.0), occ)
    prev = inflate(grid, 0.02).occupancy
    for r in (0.05, 0.1, 0.2):
        cur = inflate(grid, r).occupancy
        assert (prev & ~cur).sum() == 0
        prev = cur


# ---------------------------------------------------------------------------
# A*


def _dijkstra_cost(occ, start, goal):
    ny, nx = occ.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    moves = (
        (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
        (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
    )
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > dist.get(cell, math.inf):
            continue
        cx, cy = cell
        for dx, dy, c in moves:
            tx, ty = cx + dx, cy + dy
            if not (0 <= tx < nx and 0 <= ty < ny) or occ[ty, tx]:
                continue
            if dx != 0 and dy != 0 and (occ[cy, tx] or occ[ty, cx]):
                continue
            nd = d + c
            if nd < dist.get((tx, ty), math.inf):
                dist[(tx, ty)] = nd
                heapq.heappush(heap, (nd, (tx, ty)))
    return None


def test_astar_straight_line():
    grid = OccupancyGrid(1.0, (0.0, 0.0), np.zeros((10, 10), dtype=bool))
    path = astar(grid, (0, 0), (5, 0))
    assert path.cost == pytest.approx(5.0)
    path = astar(grid, (0, 0), (4, 4))
    assert path.cost == pytest.approx(4 * SQRT2)


def test_astar_walled_goal():
    occ = np.zeros((10, 10), dtype=bool)
    occ[4, :] = True
    grid = OccupancyGrid(1.0, (0.0, 0.0), occ)
    assert astar(grid, (0, 0), (0, 9)) is None


def test_astar_occupied_endpoints_distinct():
    occ = np.zeros((10, 10), dtype=bool)
    occ[0, 0] = True
    grid = OccupancyGrid(1.0, (0.0, 0.0), occ)
    with pytest.raises(CellOccupiedError):
        astar(grid, (0, 0), (5, 5))
    with pytest.raises(CellOccupiedError):
        astar(grid, (5, 5), (0, 0))


def test_astar_matches_dijkstra_on_random_grids():
    rng = np.random.default_rng(9)
    for _ in range(100):
        occ = rng.random((20, 20)) < 0.35
        occ[0, 0] = occ[19, 19] = False
        grid = OccupancyGrid(1.0, (0.0, 0.0), occ)
        path = astar(grid, (0, 0), (19, 19))
        oracle = _dijkstra_cost(occ, (0, 0), (19, 19))
        if oracle is None:
            assert path is None
        else:
            assert path is not None
            assert path.cost == pytest.approx(oracle, abs=1e-9)


# ---------------------------------------------------------------------------
# RTR conversion and execution


def test_rtr_straight_path():
    grid = OccupancyGrid(0.1, (0.0, 0.0), np.zeros((12, 12), dtype=bool))
    path = astar(grid, (1, 1), (10, 1))
    start = Pose2(0.15, 0.15, math.pi / 2)  # at the start cell center, facing +y
    goal = Pose2(1.05, 0.15, -math.pi / 4)  # at the goal cell center
    plan = path_to_rtr(path, start, goal)
    kinds = [type(p) for p in plan.primitives]
    assert kinds == [Rotate, Translate, Rotate]
    assert plan.primitives[0].delta == pytest.approx(-math.pi / 2)
    assert plan.primitives[1].dist == pytest.approx(0.9)
    assert plan.primitives[2].delta == pytest.approx(-math.pi / 4)


def test_rtr_l_shaped_path():
    occ = np.zeros((12, 12), dtype=bool)
    occ[0:11, 5] = True  # vertical wall with a gap at the top
    grid = OccupancyGrid(0.1, (0.0, 0.0), occ)
    path = astar(grid, (1, 1), (9, 1))
    start = Pose2(*grid.center_of((1, 1)), 0.0)
    goal = Pose2(*grid.center_of((9, 1)), 0.0)
    plan = path_to_rtr(path, start, goal)
    translates = [p for p in plan.primitives if isinstance(p, Translate)]
    assert len(translates) >= 2


def test_rtr_replay_reaches_goal(scenario_batch, limits):
    for sc in scenario_batch[:4]:
        ctx = PlanningContext(sc)
        plan = ctx.plan(0.2475)
        if plan is None:
            continue
        ex = RTRExecutor(plan, sc.start, limits)
        pose = sc.start
        for _ in range(3000):
            try:
                cmd = ex.next_command(pose)
            except PlanExhausted:
                break
            pose = integrate_arc(pose, cmd, limits.dt)
        assert math.hypot(pose.x - sc.goal.x, pose.y - sc.goal.y) <= 0.02 + 0.05
        from escapesim.kinematics import normalize_angle

        assert abs(normalize_angle(pose.theta - sc.goal.theta)) <= 1e-6 + 0.35


def test_rtr_replay_visits_waypoints(limits):
    occ = np.zeros((20, 20), dtype=bool)
    occ[5:15, 10] = True
    grid = OccupancyGrid(0.05, (0.0, 0.0), occ)
    path = astar(grid, (2, 2), (17, 17))
    start = Pose2(*grid.center_of((2, 2)), 0.3)
    goal = Pose2(*grid.center_of((17, 17)), -1.0)
    plan = path_to_rtr(path, start, goal)
    ex = RTRExecutor(plan, start, limits)
    visited = [np.array([start.x, start.y])]
    pose = start
    for _ in range(3000):
        try:
            cmd = ex.next_command(pose)
        except PlanExhausted:
            break
        pose = integrate_arc(pose, cmd, limits.dt)
        visited.append(np.array([pose.x, pose.y]))
    visited = np.array(visited)
    for wp in path.world_points:
        assert np.min(np.hypot(*(visited - wp).T)) <= grid.resolution + 1e-9


def test_executor_command_examples(limits):
    start = Pose2(0, 0, 0)
    ex = RTRExecutor(RTRPlan([Rotate(1.0)]), start, limits)
    cmd = ex.next_command(start)
    assert (cmd.omega, cmd.v) == (1.0, 0.0)
    ex = RTRExecutor(RTRPlan([Rotate(0.1)]), start, limits)
    cmd = ex.next_command(start)
    assert cmd.omega == pytest.approx(0.5)
    ex = RTRExecutor(RTRPlan([Translate(1.0)]), start, limits)
    cmd = ex.next_command(start)
    assert (cmd.omega, cmd.v) == (0.0, 0.3)
    with pytest.raises(PlanExhausted):
        ex2 = RTRExecutor(RTRPlan([]), start, limits)
        ex2.next_command(start)


# ---------------------------------------------------------------------------
# feasibility


def test_feasibility_open_room():
    sc = _scenario([], (0, 0, 3, 3), Pose2(0.5, 1.5, 0), Pose2(2.5, 1.5, 0))
    for r in (0.05, 0.1, 0.2, 0.2475):
        assert feasibility(sc, r)


def test_feasibility_narrow_gate_thresholds():
    # gate with half-gap 0.20 m between two wall slabs
    gap = 0.20
    walls = [
        Polygon([[1.9, 1.0 + gap], [2.1, 1.0 + gap], [2.1, 2.9], [1.9, 2.9]]),
        Polygon([[1.9, 0.1], [2.1, 0.1], [2.1, 1.0 - gap], [1.9, 1.0 - gap]]),
    ]
    sc = _scenario(walls, (0, 0, 4, 2.9), Pose2(0.7, 1.0, 0), Pose2(3.3, 1.0, 0))
    assert feasibility(sc, 0.175)
    assert not feasibility(sc, 0.2475)


def test_feasibility_monotone_in_radius(scenario_batch):
    for sc in scenario_batch[:6]:
        ctx = PlanningContext(sc)
        prev = True
        for r in (0.18, 0.20, 0.23, 0.2475):
            cur = ctx.feasible(r)
            assert prev or not cur  # once infeasible, stays infeasible
            prev = cur


def test_plans_at_max_inflation_execute_safely(scenario_batch, footprint, limits):
    checked = 0
    for sc in scenario_batch:
        ctx = PlanningContext(sc)
        plan = ctx.plan(footprint.circumradius)
        if plan is None:
            continue
        checked += 1
        ex = RTRExecutor(plan, sc.start, limits)
        pose = sc.start
        for _ in range(3000):
            try:
                cmd = ex.next_command(pose)
            except PlanExhausted:
                break
            nxt = integrate_arc(pose, cmd, limits.dt)
            # dense sub-sampling of the step
            for k in range(1, 6):
                p = integrate_arc(pose, cmd, limits.dt * k / 5)
                assert not collides(footprint, p, sc.obstacles)
            pose = nxt
    assert checked >= 2
