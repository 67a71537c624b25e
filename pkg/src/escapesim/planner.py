"""Occupancy-grid planning and rotate-translate execution.

The guidance pipeline is: rasterize obstacles, inflate by a disc radius so
the robot shrinks to a point, run 8-connected A*, and convert the grid
path into a plan of in-place rotations and straight translations that a
differential drive can execute exactly.

Feasibility checks use an exact clearance field (distance from each cell
center to the true obstacle polygons and arena walls) rather than the
cell-quantized dilation, plus a sub-cell safety slack of resolution/sqrt(2).
Every point of a free cell then keeps clearance > radius, which is what
makes plans at the circumscribed radius collision-free for the square
footprint in any orientation, including in-place rotation.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .geometry import Footprint
from .kinematics import MotionLimits, Pose2, VelocityCommand, normalize_angle
from .scenario import Scenario

SQRT2 = math.sqrt(2.0)
DEFAULT_RESOLUTION = 0.02
_POSITION_EPS = 1e-7
_HEADING_EPS = 1e-7


class CellOccupiedError(ValueError):
    """Start or goal cell lies in occupied space (distinct from no-path)."""


class PlanExhausted(RuntimeError):
    pass


@dataclass
class OccupancyGrid:
    resolution: float
    origin: tuple  # world (x, y) of the grid's lower-left corner
    occupancy: np.ndarray  # bool (ny, nx), [iy, ix]

    @property
    def shape(self):
        return self.occupancy.shape

    def cell_of(self, x: float, y: float):
        ix = int(math.floor((x - self.origin[0]) / self.resolution))
        iy = int(math.floor((y - self.origin[1]) / self.resolution))
        return ix, iy

    def center_of(self, cell):
        ix, iy = cell
        return (
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def in_bounds(self, cell) -> bool:
        ix, iy = cell
        ny, nx = self.occupancy.shape
        return 0 <= ix < nx and 0 <= iy < ny


@dataclass
class GridPath:
    cells: list
    world_points: np.ndarray

    @property
    def cost(self) -> float:
        """Path cost in cell units (1 per straight move, sqrt(2) diagonal)."""
        c = 0.0
        for (ax, ay), (bx, by) in zip(self.cells, self.cells[1:]):
            c += SQRT2 if (ax != bx and ay != by) else 1.0
        return c


@dataclass(frozen=True)
class Rotate:
    delta: float  # radians, in place


@dataclass(frozen=True)
class Translate:
    dist: float  # meters, straight along the current heading


@dataclass
class RTRPlan:
    primitives: list


def _grid_shape(arena, resolution):
    xmin, ymin, xmax, ymax = arena
    nx = int(math.ceil((xmax - xmin) / resolution - 1e-9))
    ny = int(math.ceil((ymax - ymin) / resolution - 1e-9))
    return nx, ny


def rasterize(scenario: Scenario, resolution: float = DEFAULT_RESOLUTION) -> OccupancyGrid:
    """Conservative rasterization: any cell overlapping an obstacle is occupied."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    arena = scenario.obstacles.arena
    nx, ny = _grid_shape(arena, resolution)
    verts, offsets = scenario.obstacles.flat()
    occ = _kernels.rasterize_cells(
        verts, offsets, arena[0], arena[1], resolution, nx, ny
    )
    return OccupancyGrid(resolution, (arena[0], arena[1]), np.asarray(occ, dtype=bool))


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Dilate the occupied set by a disc via a cell-distance transform."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0.0 or not grid.occupancy.any():
        return OccupancyGrid(grid.resolution, grid.origin, grid.occupancy.copy())
    edt = ndimage.distance_transform_edt(~grid.occupancy)
    occ = grid.occupancy | (edt <= radius / grid.resolution + 1e-9)
    return OccupancyGrid(grid.resolution, grid.origin, occ)


def _octile(ax, ay, bx, by):
    dx = abs(ax - bx)
    dy = abs(ay - by)
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar(grid: OccupancyGrid, start, goal):
    """Shortest 8-connected path (octile heuristic); None when disconnected.

    Diagonal moves are disallowed when either adjacent orthogonal cell is
    occupied (no corner cutting). Raises CellOccupiedError for blocked
    endpoints, which callers report separately from plain infeasibility.
    """
    occ = grid.occupancy
    ny, nx = occ.shape
    for name, cell in (("start", start), ("goal", goal)):
        if not grid.in_bounds(cell):
            raise CellOccupiedError(f"{name} cell {cell} outside grid")
        if occ[cell[1], cell[0]]:
            raise CellOccupiedError(f"{name} cell {cell} is occupied")
    if start == goal:
        pts = np.array([grid.center_of(start)])
        return GridPath([start], pts)

    g = np.full((ny, nx), np.inf)
    parent = np.full((ny, nx, 2), -1, dtype=np.int32)
    g[start[1], start[0]] = 0.0
    heap = [(_octile(*start, *goal), 0.0, start)]
    moves = (
        (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
        (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
    )
    while heap:
        f, gc, (cx, cy) = heapq.heappop(heap)
        if (cx, cy) == goal:
            cells = [(cx, cy)]
            while cells[-1] != start:
                px, py = parent[cells[-1][1], cells[-1][0]]
                cells.append((int(px), int(py)))
            cells.reverse()
            pts = np.array([grid.center_of(c) for c in cells])
            return GridPath(cells, pts)
        if gc > g[cy, cx]:
            continue
        for dx, dy, cost in moves:
            tx, ty = cx + dx, cy + dy
            if not (0 <= tx < nx and 0 <= ty < ny) or occ[ty, tx]:
                continue
            if dx != 0 and dy != 0 and (occ[cy, tx] or occ[ty, cx]):
                continue
            ng = gc + cost
            if ng < g[ty, tx]:
                g[ty, tx] = ng
                parent[ty, tx, 0] = cx
                parent[ty, tx, 1] = cy
                heapq.heappush(heap, (ng + _octile(tx, ty, *goal), ng, (tx, ty)))
    return None


def _merged_waypoints(path: GridPath):
    """Corner points of the grid polyline (collinear runs merged)."""
    cells = path.cells
    if len(cells) == 1:
        return [path.world_points[0]]
    pts = [path.world_points[0]]
    prev_dir = None
    for i in range(1, len(cells)):
        d = (cells[i][0] - cells[i - 1][0], cells[i][1] - cells[i - 1][1])
        if prev_dir is not None and d != prev_dir:
            pts.append(path.world_points[i - 1])
        prev_dir = d
    pts.append(path.world_points[-1])
    return pts


def path_to_rtr(path: GridPath, start: Pose2, goal: Pose2) -> RTRPlan:
    """Convert a grid path into rotations and straight translations.

    The route is start position -> start cell center -> merged grid
    corners -> goal cell center -> goal position, with a final rotation
    onto the goal heading. Keeping every straight segment inside the
    path's free cells is what preserves the inflation safety guarantee, so
    the exact start/goal positions are joined by short in-cell moves
    rather than by skewing the first and last grid segments.
    """
    prims = []
    heading = start.theta
    cur = np.array([start.x, start.y])
    targets = [np.asarray(w, dtype=float) for w in _merged_waypoints(path)]
    targets.append(np.array([goal.x, goal.y]))
    for t in targets:
        vec = t - cur
        dist = float(np.hypot(*vec))
        if dist <= _POSITION_EPS:
            continue
        want = math.atan2(vec[1], vec[0])
        turn = normalize_angle(want - heading)
        if abs(turn) > _HEADING_EPS:
            prims.append(Rotate(turn))
            heading = want
        prims.append(Translate(dist))
        cur = t
    final = normalize_angle(goal.theta - heading)
    if abs(final) > _HEADING_EPS:
        prims.append(Rotate(final))
    return RTRPlan(prims)


class RTRExecutor:
    """Steps an RTR plan with saturated velocity commands.

    Absolute targets are reconstructed from the plan and the start pose,
    so remaining amounts are re-derived from the live pose every call and
    exact execution lands exactly.
    """

    def __init__(self, plan: RTRPlan, start: Pose2, limits: MotionLimits):
        self.limits = limits
        self.targets = []
        heading = start.theta
        cur = np.array([start.x, start.y])
        for prim in plan.primitives:
            if isinstance(prim, Rotate):
                heading = normalize_angle(heading + prim.delta)
                self.targets.append(("rotate", heading))
            else:
                cur = cur + prim.dist * np.array([math.cos(heading), math.sin(heading)])
                self.targets.append(("translate", cur.copy()))
        self.idx = 0

    @property
    def done(self) -> bool:
        return self.idx >= len(self.targets)

    def next_command(self, pose: Pose2) -> VelocityCommand:
        lim = self.limits
        while self.idx < len(self.targets):
            kind, target = self.targets[self.idx]
            if kind == "rotate":
                rem = normalize_angle(target - pose.theta)
                if abs(rem) <= _HEADING_EPS:
                    self.idx += 1
                    continue
                w = max(-lim.omega_max, min(lim.omega_max, rem / lim.dt))
                return VelocityCommand(w, 0.0)
            vec = target - np.array([pose.x, pose.y])
            if float(np.hypot(*vec)) <= _POSITION_EPS:
                self.idx += 1
                continue
            rem = float(vec @ np.array([math.cos(pose.theta), math.sin(pose.theta)]))
            v = max(-lim.v_max, min(lim.v_max, rem / lim.dt))
            return VelocityCommand(0.0, v)
        raise PlanExhausted("RTR plan has no remaining primitives")


def next_guidance_action(
    executor: RTRExecutor, pose: Pose2, limits: MotionLimits = None
) -> VelocityCommand:
    """Velocity command advancing the executor's current primitive."""
    return executor.next_command(pose)


class PlanningContext:
    """Cached clearance field and plans for one scenario.

    The field holds each cell center's true distance to the nearest
    obstacle polygon or arena wall; thresholding it at
    radius + resolution/sqrt(2) produces the planning grid for any radius
    without re-rasterizing.
    """

    SAFETY_EPS = 1e-4

    def __init__(self, scenario: Scenario, resolution: float = DEFAULT_RESOLUTION):
        self.scenario = scenario
        self.resolution = resolution
        arena = scenario.obstacles.arena
        self.nx, self.ny = _grid_shape(arena, resolution)
        self.origin = (arena[0], arena[1])
        self._field = None
        self._grids = {}

    def clearance_field(self) -> np.ndarray:
        if self._field is None:
            xs = self.origin[0] + (np.arange(self.nx) + 0.5) * self.resolution
            ys = self.origin[1] + (np.arange(self.ny) + 0.5) * self.resolution
            gx, gy = np.meshgrid(xs, ys)
            pts = np.column_stack([gx.ravel(), gy.ravel()])
            verts, offsets = self.scenario.obstacles.flat()
            d = _kernels.scene_distance(
                pts, verts, offsets, self.scenario.obstacles.arena_array()
            )
            self._field = np.asarray(d).reshape(self.ny, self.nx)
        return self._field

    def grid(self, radius: float) -> OccupancyGrid:
        key = round(radius, 9)
        if key not in self._grids:
            slack = self.resolution / SQRT2 + self.SAFETY_EPS
            occ = self.clearance_field() <= radius + slack
            self._grids[key] = OccupancyGrid(self.resolution, self.origin, occ)
        return self._grids[key]

    def _cells(self, radius, from_pose):
        grid = self.grid(radius)
        src = from_pose if from_pose is not None else self.scenario.start
        return grid, grid.cell_of(src.x, src.y), grid.cell_of(
            self.scenario.goal.x, self.scenario.goal.y
        )

    def feasible(self, radius: float, from_pose: Pose2 = None) -> bool:
        grid, s, t = self._cells(radius, from_pose)
        try:
            return astar(grid, s, t) is not None
        except CellOccupiedError:
            return False

    def plan(self, radius: float, from_pose: Pose2 = None):
        """RTR plan at the given inflation radius, or None when infeasible."""
        grid, s, t = self._cells(radius, from_pose)
        src = from_pose if from_pose is not None else self.scenario.start
        try:
            path = astar(grid, s, t)
        except CellOccupiedError:
            return None
        if path is None:
            return None
        return path_to_rtr(path, src, self.scenario.goal)


def feasibility(
    scenario: Scenario,
    radius: float,
    resolution: float = DEFAULT_RESOLUTION,
    from_pose: Pose2 = None,
) -> bool:
    """One-shot feasibility probe (see PlanningContext for cached reuse)."""
    return PlanningContext(scenario, resolution).feasible(radius, from_pose)


def max_inflation_radius(fp: Footprint = Footprint()) -> float:
    """The circumscribed radius: inflation at which plans are rotation-safe."""
    return fp.circumradius
