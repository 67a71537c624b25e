"""Escape scenario generation: feasible by construction.

A scenario is built the safe way around: first a random collision-free
walk of the robot through an empty arena (the witness path), then
obstacles placed only outside the walk's swept envelope. Whatever else the
obstacles do, the recorded trajectory remains a valid escape.

Challenge features are constructed deliberately and then re-measured from
the finished scene; a scenario is only emitted when the measured tags
match the requested ones:

  NarrowExit        tightest bilateral passage half-width along the path
                    below the footprint circumradius (the passage fits the
                    robot but not its rotation disc);
  ConstrainedSpace  some obstacle within 5 cm of the swept footprint;
  SparseObstacles   at least two inter-obstacle gaps in the 15-30 cm band
                    (sub-robot gaps that look like passages but are not);
  LongCorridor      witness path longer than 3 m.
"""

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Footprint, ObstacleSet, Polygon, collides, footprint_at
from .kinematics import (
    MotionLimits,
    Pose2,
    build_action_space,
    integrate_arc,
    normalize_angle,
)

NARROW_EXIT = "NarrowExit"
CONSTRAINED_SPACE = "ConstrainedSpace"
SPARSE_OBSTACLES = "SparseObstacles"
LONG_CORRIDOR = "LongCorridor"
ALL_FEATURES = (NARROW_EXIT, CONSTRAINED_SPACE, SPARSE_OBSTACLES, LONG_CORRIDOR)

# Table-style scenario classes: feature combinations plus "simple"
SCENARIO_CLASSES = (
    frozenset(ALL_FEATURES),
    frozenset((NARROW_EXIT, CONSTRAINED_SPACE, SPARSE_OBSTACLES)),
    frozenset((NARROW_EXIT, CONSTRAINED_SPACE)),
    frozenset((NARROW_EXIT,)),
    frozenset(),
)

SCHEMA_VERSION = 1

# construction margin between the witness envelope and any obstacle
PLACEMENT_MARGIN = 0.002
ENVELOPE_SPACING = 0.02


class GenerationError(RuntimeError):
    """Retry budget exhausted for a (config, seed) pair."""


class ScenarioFormatError(ValueError):
    """Malformed scenario file."""


@dataclass(frozen=True)
class GeneratorConfig:
    arena_size: float = 4.0
    short_walk_range: tuple = (1.2, 2.4)
    long_walk_range: tuple = (3.3, 4.0)
    obstacle_count: tuple = (7, 12)
    obstacle_edge: tuple = (0.10, 0.55)
    clearance_tight: tuple = (0.006, 0.034)
    clearance_open: tuple = (0.08, 0.14)
    narrow_exit_tight: tuple = (0.190, 0.224)  # when ConstrainedSpace allowed
    narrow_exit_open: tuple = (0.236, 0.246)  # keeps clearance above the C cutoff
    open_exit_floor: float = 0.28
    constrained_threshold: float = 0.05
    corridor_length_threshold: float = 3.0
    sparse_band: tuple = (0.15, 0.30)
    goal_tolerance: tuple = (0.05, 0.35)
    target_features: frozenset | None = None
    max_attempts: int = 60
    seed_salt: int = 0

    def __post_init__(self):
        if self.obstacle_edge[0] < 0.10 - 1e-12:
            raise ValueError(
                "minimum obstacle edge below the Lidar chord floor (0.10 m)"
            )
        if self.target_features is not None:
            bad = set(self.target_features) - set(ALL_FEATURES)
            if bad:
                raise ValueError(f"unknown feature tags: {sorted(bad)}")


@dataclass
class Scenario:
    obstacles: ObstacleSet
    start: Pose2
    goal: Pose2
    goal_tolerance: tuple
    features: frozenset
    seed: int
    witness_path: list

    def __eq__(self, other):
        return isinstance(other, Scenario) and scenario_to_dict(
            self
        ) == scenario_to_dict(other)

    def class_label(self) -> str:
        return class_label(self.features)


def class_label(features: frozenset) -> str:
    if not features:
        return "simple"
    short = {
        NARROW_EXIT: "N",
        CONSTRAINED_SPACE: "C",
        SPARSE_OBSTACLES: "S",
        LONG_CORRIDOR: "L",
    }
    return "".join(short[f] for f in ALL_FEATURES if f in features)


def _rect_poly(cx, cy, ux, uy, hu, hn) -> Polygon:
    """Rectangle centered at (cx, cy), half-extent hu along unit (ux, uy)
    and hn along its left normal."""
    nx, ny = -uy, ux
    return Polygon(
        [
            [cx + ux * hu + nx * hn, cy + uy * hu + ny * hn],
            [cx - ux * hu + nx * hn, cy - uy * hu + ny * hn],
            [cx - ux * hu - nx * hn, cy - uy * hu - ny * hn],
            [cx + ux * hu - nx * hn, cy + uy * hu - ny * hn],
        ]
    )


# ---------------------------------------------------------------------------
# measurement (independent of construction; used by tests to re-verify tags)


def path_length(witness_path) -> float:
    pts = np.array([[p.x, p.y] for p in witness_path])
    return float(np.sum(np.hypot(*(np.diff(pts, axis=0).T))))


def min_path_clearance(scenario, fp: Footprint = Footprint()) -> float:
    """Smallest footprint-to-obstacle (or wall) distance along the path."""
    xmin, ymin, xmax, ymax = scenario.obstacles.arena
    best = math.inf
    for pose in scenario.witness_path:
        corners = footprint_at(fp, pose).vertices
        wall = min(
            corners[:, 0].min() - xmin,
            xmax - corners[:, 0].max(),
            corners[:, 1].min() - ymin,
            ymax - corners[:, 1].max(),
        )
        best = min(best, wall)
        for poly in scenario.obstacles.polygons:
            best = min(best, _kernels.poly_pair_distance(corners, poly.vertices))
    return best


def measured_exit_width(scenario, side_cap: float = 1.0) -> float:
    """Tightest passage half-width along the witness path.

    At each pose, obstacles (and walls) are split into the robot's left and
    right sides by the bearing of their nearest point; the passage width is
    the sum of the two nearest side distances, capped so an open side never
    reads as a squeeze. Returns half of the minimum passage width.
    """
    xmin, ymin, xmax, ymax = scenario.obstacles.arena
    best = math.inf
    for pose in scenario.witness_path:
        nx, ny = -math.sin(pose.theta), math.cos(pose.theta)
        left = side_cap
        right = side_cap
        candidates = []
        for poly in scenario.obstacles.polygons:
            d, qx, qy = _kernels.point_poly_nearest(pose.x, pose.y, poly.vertices)
            candidates.append((d, qx, qy))
        candidates.append((pose.x - xmin, xmin, pose.y))
        candidates.append((xmax - pose.x, xmax, pose.y))
        candidates.append((pose.y - ymin, pose.x, ymin))
        candidates.append((ymax - pose.y, pose.x, ymax))
        for d, qx, qy in candidates:
            side = (qx - pose.x) * nx + (qy - pose.y) * ny
            if side >= 0.0:
                left = min(left, d)
            else:
                right = min(right, d)
        best = min(best, (left + right) / 2.0)
    return best


def sparse_gap_count(scenario, band: tuple = (0.15, 0.30)) -> int:
    polys = [p.vertices for p in scenario.obstacles.polygons]
    count = 0
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            d = _kernels.poly_pair_distance(polys[i], polys[j])
            if band[0] <= d <= band[1]:
                count += 1
    return count


def measure_features(
    scenario, config: GeneratorConfig = GeneratorConfig(), fp: Footprint = Footprint()
) -> frozenset:
    """Re-derive the feature tags from the finished scene."""
    tags = set()
    if measured_exit_width(scenario) < fp.circumradius:
        tags.add(NARROW_EXIT)
    if min_path_clearance(scenario, fp) < config.constrained_threshold:
        tags.add(CONSTRAINED_SPACE)
    if sparse_gap_count(scenario, config.sparse_band) >= 2:
        tags.add(SPARSE_OBSTACLES)
    if path_length(scenario.witness_path) > config.corridor_length_threshold:
        tags.add(LONG_CORRIDOR)
    return frozenset(tags)


# ---------------------------------------------------------------------------
# generation


def _walk(rng, config, limits, fp, target_len):
    """Random action walk through the empty arena.

    Returns (dense_poses, step_indices): dense poses sampled every
    ENVELOPE_SPACING of effective travel (center plus rotation at the
    circumradius), and the indices of the per-step poses within them.
    """
    arena = config.arena_size
    margin = fp.circumradius + 0.16
    actions = build_action_space(limits)
    forward = [
        a for a in actions.actions if a.kind == "turn" and a.command.v > 0 and a.radius >= 0.16
    ]
    rc = fp.circumradius

    for _ in range(40):
        start = Pose2(
            rng.uniform(margin, arena - margin),
            rng.uniform(margin, arena - margin),
            rng.uniform(-math.pi, math.pi),
        )
        dense = [start]
        steps = [0]
        pose = start
        length = 0.0
        hold = 0
        action = None
        stuck = 0
        while length < target_len and stuck < 60:
            if hold == 0 or action is None:
                action = forward[rng.integers(len(forward))]
                hold = int(rng.integers(2, 7))
            nxt = integrate_arc(pose, action.command, limits.dt)
            sub_n = max(
                1,
                int(
                    math.ceil(
                        (abs(action.command.v) + abs(action.command.omega) * rc)
                        * limits.dt
                        / ENVELOPE_SPACING
                    )
                ),
            )
            subs = [
                integrate_arc(pose, action.command, limits.dt * k / sub_n)
                for k in range(1, sub_n + 1)
            ]
            ok = all(
                margin < p.x < arena - margin and margin < p.y < arena - margin
                for p in subs
            )
            if not ok:
                hold = 0
                stuck += 1
                continue
            dense.extend(subs)
            steps.append(len(dense) - 1)
            length += abs(action.command.v) * limits.dt
            pose = nxt
            hold -= 1
            stuck = 0
        if length >= target_len:
            return dense, steps
    return None, None


def _envelope(dense_poses, fp, pad):
    """Dilated footprints along the dense walk; anything outside is safe."""
    grown = Footprint(fp.half_length + pad, fp.half_width + pad)
    return [footprint_at(grown, p).vertices for p in dense_poses]


def _clear_of(poly: Polygon, regions, margin=0.0) -> bool:
    v = poly.vertices
    for reg in regions:
        if _kernels.poly_pair_distance(v, reg) <= margin:
            return False
    return True


def _inside_arena(poly: Polygon, arena_size, pad=0.01) -> bool:
    x0, y0, x1, y1 = poly.bounds()
    return x0 >= pad and y0 >= pad and x1 <= arena_size - pad and y1 <= arena_size - pad


def _straight_run_index(rng, dense, steps, lo_frac, hi_frac, max_kink):
    """Pick a step pose around which the walk is locally straight."""
    n = len(steps)
    lo = max(3, int(n * lo_frac))
    hi = min(n - 3, int(n * hi_frac))
    if hi <= lo:
        return None
    idxs = np.arange(lo, hi)
    rng.shuffle(idxs)
    for i in idxs:
        a = dense[steps[i - 2]].theta
        b = dense[steps[i + 2]].theta
        if abs(normalize_angle(b - a)) < max_kink:
            return int(i)
    return None


class _SqueezeGuard:
    """Incremental bilateral-passage tracker along the dense walk.

    Keeps, per pose, the nearest obstacle distance on each body side so a
    candidate obstacle can be rejected in O(poses) when it would pinch a
    non-NarrowExit scene below the open-exit floor.
    """

    def __init__(self, dense, arena, cap=1.0):
        self.cap = cap
        self.px = np.array([p.x for p in dense])
        self.py = np.array([p.y for p in dense])
        self.nx = np.array([-math.sin(p.theta) for p in dense])
        self.ny = np.array([math.cos(p.theta) for p in dense])
        xmin, ymin, xmax, ymax = arena
        self.left = np.full(len(dense), cap)
        self.right = np.full(len(dense), cap)
        for qx, qy, d in (
            (np.full_like(self.px, xmin), self.py, self.px - xmin),
            (np.full_like(self.px, xmax), self.py, xmax - self.px),
            (self.px, np.full_like(self.py, ymin), self.py - ymin),
            (self.px, np.full_like(self.py, ymax), ymax - self.py),
        ):
            self._fold(qx, qy, d)

    def _sides(self, poly):
        d = np.empty_like(self.px)
        qx = np.empty_like(self.px)
        qy = np.empty_like(self.px)
        for i in range(len(self.px)):
            d[i], qx[i], qy[i] = _kernels.point_poly_nearest(
                self.px[i], self.py[i], poly
            )
        return qx, qy, d

    def _fold(self, qx, qy, d):
        side = (qx - self.px) * self.nx + (qy - self.py) * self.ny
        on_left = side >= 0.0
        np.minimum(self.left, np.where(on_left, d, self.cap), out=self.left)
        np.minimum(self.right, np.where(on_left, self.cap, d), out=self.right)

    def width_with(self, poly) -> float:
        qx, qy, d = self._sides(poly)
        side = (qx - self.px) * self.nx + (qy - self.py) * self.ny
        left = np.minimum(self.left, np.where(side >= 0.0, d, self.cap))
        right = np.minimum(self.right, np.where(side >= 0.0, self.cap, d))
        return float(((left + right) / 2.0).min())

    def add(self, poly) -> None:
        self._fold(*self._sides(poly))


def generate(config: GeneratorConfig, seed: int) -> Scenario:
    """Generate one scenario; deterministic per (config, seed).

    Raises GenerationError when the retry budget runs out (pathological
    configuration).
    """
    fp = Footprint()
    limits = MotionLimits()
    target = config.target_features
    rng = np.random.default_rng(np.random.SeedSequence([seed, config.seed_salt]))

    for _attempt in range(config.max_attempts):
        scenario = _generate_once(rng, config, fp, limits, seed)
        if scenario is None:
            continue
        if target is None or scenario.features == target:
            return scenario
    raise GenerationError(
        f"could not generate a scenario for target={target} within "
        f"{config.max_attempts} attempts (seed {seed})"
    )


def _generate_once(rng, config, fp, limits, seed):
    target = config.target_features if config.target_features is not None else frozenset()
    want_n = NARROW_EXIT in target
    want_c = CONSTRAINED_SPACE in target
    want_s = SPARSE_OBSTACLES in target
    want_l = LONG_CORRIDOR in target
    arena = (0.0, 0.0, config.arena_size, config.arena_size)

    walk_range = config.long_walk_range if want_l else config.short_walk_range
    target_len = rng.uniform(*walk_range)
    dense, steps = _walk(rng, config, limits, fp, target_len)
    if dense is None:
        return None

    clearance = rng.uniform(
        *(config.clearance_tight if want_c else config.clearance_open)
    )
    envelope = _envelope(dense, fp, clearance + PLACEMENT_MARGIN)
    tight_envelope = _envelope(dense, fp, PLACEMENT_MARGIN)

    obstacles = []
    guard = None if want_n else _SqueezeGuard(dense, arena)

    def place(poly, feature=False, band_exempt=()):
        if not _inside_arena(poly, config.arena_size):
            return False
        regions = tight_envelope if feature else envelope
        if not _clear_of(poly, regions, 0.0):
            return False
        lo, hi = config.sparse_band
        for other in obstacles:
            if any(other is ex for ex in band_exempt):
                continue
            d = _kernels.poly_pair_distance(poly.vertices, other.vertices)
            if d <= 0.01:
                return False
            if lo - 0.01 <= d <= hi + 0.01:
                return False
        # keep non-NarrowExit scenes clear of accidental bilateral squeezes
        if guard is not None:
            if guard.width_with(poly.vertices) < config.open_exit_floor:
                return False
            guard.add(poly.vertices)
        obstacles.append(poly)
        return True

    # narrow exit gate: two walls flanking a straight stretch of the walk
    if want_n:
        exit_range = config.narrow_exit_tight if want_c else config.narrow_exit_open
        kink = 0.06 if want_c else 0.03
        placed = False
        for _ in range(25):
            i = _straight_run_index(rng, dense, steps, 0.45, 0.9, kink)
            if i is None:
                break
            p = dense[steps[i]]
            ux, uy = math.cos(p.theta), math.sin(p.theta)
            nx, ny = -uy, ux
            exit_w = rng.uniform(*exit_range)
            wt = rng.uniform(0.10, 0.16) / 2.0
            wl = rng.uniform(0.40, 0.85) / 2.0
            wall_a = _rect_poly(
                p.x + nx * (exit_w + wl), p.y + ny * (exit_w + wl), nx, ny, wl, wt
            )
            wall_b = _rect_poly(
                p.x - nx * (exit_w + wl), p.y - ny * (exit_w + wl), nx, ny, wl, wt
            )
            if place(wall_a, feature=True):
                if place(wall_b, feature=True, band_exempt=(wall_a,)):
                    placed = True
                    break
                obstacles.remove(wall_a)
        if not placed:
            return None

    # constrained space: one obstacle hugging the swept footprint
    if want_c:
        placed = False
        for _ in range(25):
            i = _straight_run_index(rng, dense, steps, 0.2, 0.8, 0.05)
            if i is None:
                break
            p = dense[steps[i]]
            ux, uy = math.cos(p.theta), math.sin(p.theta)
            nx, ny = -uy, ux
            side = 1.0 if rng.random() < 0.5 else -1.0
            gap = clearance + PLACEMENT_MARGIN + 0.006
            hu = rng.uniform(0.08, 0.22)
            hn = rng.uniform(0.05, 0.14)
            hug = _rect_poly(
                p.x + side * nx * (fp.half_width + gap + hn),
                p.y + side * ny * (fp.half_width + gap + hn),
                ux,
                uy,
                hu,
                hn,
            )
            if place(hug, feature=True):
                placed = True
                break
        if not placed:
            return None

    # sparse obstacles: two deliberate sub-robot gaps
    if want_s:
        pairs = 0
        for _ in range(60):
            if pairs >= 2:
                break
            psi = rng.uniform(-math.pi, math.pi)
            ux, uy = math.cos(psi), math.sin(psi)
            cx = rng.uniform(0.3, config.arena_size - 0.3)
            cy = rng.uniform(0.3, config.arena_size - 0.3)
            hu1, hn1, hu2, hn2 = rng.uniform(0.05, 0.12, size=4)
            lo_b, hi_b = config.sparse_band
            g = rng.uniform(lo_b + 0.01, hi_b - 0.01)
            r1 = _rect_poly(cx, cy, ux, uy, hu1, hn1)
            off = hu1 + g + hu2
            r2 = _rect_poly(cx + ux * off, cy + uy * off, ux, uy, hu2, hn2)
            if place(r1, feature=True):
                if place(r2, feature=True, band_exempt=(r1,)):
                    pairs += 1
                else:
                    obstacles.remove(r1)
        if pairs < 2:
            return None

    # random clutter up to the sampled obstacle count
    count = int(rng.integers(config.obstacle_count[0], config.obstacle_count[1] + 1))
    tries = 0
    while len(obstacles) < count and tries < 200:
        tries += 1
        cx = rng.uniform(0.1, config.arena_size - 0.1)
        cy = rng.uniform(0.1, config.arena_size - 0.1)
        hu = rng.uniform(*config.obstacle_edge) / 2.0
        hn = rng.uniform(*config.obstacle_edge) / 2.0
        psi = rng.uniform(-math.pi, math.pi) if rng.random() < 0.5 else 0.0
        place(_rect_poly(cx, cy, math.cos(psi), math.sin(psi), hu, hn))

    if len(obstacles) < config.obstacle_count[0]:
        return None

    obs = ObstacleSet(list(obstacles), arena)
    scenario = Scenario(
        obstacles=obs,
        start=dense[0],
        goal=dense[-1],
        goal_tolerance=config.goal_tolerance,
        features=frozenset(),
        seed=seed,
        witness_path=list(dense),
    )
    scenario.features = measure_features(scenario, config)

    # construction guarantee, verified cheaply before emitting
    if any(collides(fp, p, obs) for p in (dense[0], dense[-1])):
        return None
    return scenario


# ---------------------------------------------------------------------------
# benchmark sets


def build_benchmark_sets(
    config: GeneratorConfig, train_count: int = 1800, test_count: int = 360,
    base_seed: int = 0,
):
    """Train and test scenario collections on disjoint seed ranges.

    Both sets cycle through the five scenario classes (feature combinations
    plus simple), so a test count divisible by five is stratified exactly.
    """
    if train_count <= 0 or test_count <= 0:
        raise ValueError("counts must be positive")
    train = [
        generate(
            dataclasses.replace(config, target_features=SCENARIO_CLASSES[k % 5]),
            base_seed + k,
        )
        for k in range(train_count)
    ]
    test = [
        generate(
            dataclasses.replace(config, target_features=SCENARIO_CLASSES[k % 5]),
            base_seed + train_count + k,
        )
        for k in range(test_count)
    ]
    return train, test


def corridor_scenario(
    length: float = 2.0, half_width: float = 0.28, seed: int = 0
) -> Scenario:
    """Toy straight-corridor escape task (used for trainer smoke tests)."""
    rng = np.random.default_rng(seed)
    hw = half_width + rng.uniform(-0.015, 0.015)
    ax = length + 1.2
    ay = 2.0
    cy = ay / 2.0 + rng.uniform(-0.05, 0.05)
    x0 = 0.45
    start = Pose2(x0, cy, rng.uniform(-0.12, 0.12))
    goal = Pose2(x0 + length, cy, 0.0)
    wall_len = (length + 0.7) / 2.0
    wall_t = 0.08
    walls = [
        _rect_poly(x0 + length / 2.0, cy + hw + wall_t, 1.0, 0.0, wall_len, wall_t),
        _rect_poly(x0 + length / 2.0, cy - hw - wall_t, 1.0, 0.0, wall_len, wall_t),
    ]
    obs = ObstacleSet(walls, (0.0, 0.0, ax, ay))
    n = int(length / 0.02)
    witness = [start] + [
        Pose2(x0 + length * k / n, cy, 0.0) for k in range(1, n + 1)
    ]
    scenario = Scenario(
        obstacles=obs,
        start=start,
        goal=goal,
        goal_tolerance=(0.05, 0.35),
        features=frozenset(),
        seed=seed,
        witness_path=witness,
    )
    scenario.features = measure_features(scenario)
    return scenario


# ---------------------------------------------------------------------------
# serialization


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "seed": s.seed,
        "arena": list(s.obstacles.arena),
        "obstacles": [p.vertices.tolist() for p in s.obstacles.polygons],
        "start": [s.start.x, s.start.y, s.start.theta],
        "goal": [s.goal.x, s.goal.y, s.goal.theta],
        "tolerance": list(s.goal_tolerance),
        "features": sorted(s.features),
        "witness_path": [[p.x, p.y, p.theta] for p in s.witness_path],
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        version = d["version"]
        if version != SCHEMA_VERSION:
            raise ScenarioFormatError(f"unsupported schema version {version!r}")
        for tag in d["features"]:
            if tag not in ALL_FEATURES:
                raise ScenarioFormatError(f"unknown feature tag {tag!r}")
        polys = [Polygon(v) for v in d["obstacles"]]
        obs = ObstacleSet(polys, tuple(float(v) for v in d["arena"]))
        witness = [Pose2(*map(float, p)) for p in d["witness_path"]]
        return Scenario(
            obstacles=obs,
            start=Pose2(*map(float, d["start"])),
            goal=Pose2(*map(float, d["goal"])),
            goal_tolerance=tuple(float(v) for v in d["tolerance"]),
            features=frozenset(d["features"]),
            seed=int(d["seed"]),
            witness_path=witness,
        )
    except ScenarioFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ScenarioFormatError(f"malformed scenario record: {e}") from e


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(s), f)
        f.write("\n")


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"unparseable scenario file {path}: {e}") from e
    return scenario_from_dict(d)
