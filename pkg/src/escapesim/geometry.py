"""Polygon primitives, footprint placement, IOU, and swept-arc collision.

Contact convention is conservative throughout: polygons touching at a
single point or edge count as colliding, and a footprint touching the
arena boundary counts as leaving it.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .kinematics import DiscreteAction, Pose2, pose_at_arc_length


class GeometryError(ValueError):
    pass


class Polygon:
    """Simple polygon, vertices ordered counter-clockwise."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs at least 3 (x, y) vertices")
        a = signed_area(v)
        if a < 0:
            v = v[::-1].copy()
            a = -a
        if a <= 0:
            raise GeometryError("polygon area must be positive")
        self.vertices = v

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    def bounds(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return lo[0], lo[1], hi[0], hi[1]

    def __eq__(self, other):
        return isinstance(other, Polygon) and np.array_equal(
            self.vertices, other.vertices
        )


def signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x = v[:, 0]
    y = v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Footprint:
    """Axis-aligned body-frame rectangle; the default is the 35 cm square."""

    half_length: float = 0.175
    half_width: float = 0.175

    @property
    def circumradius(self) -> float:
        return math.hypot(self.half_length, self.half_width)


@dataclass
class ObstacleSet:
    """Obstacle polygons inside an axis-aligned arena rectangle."""

    polygons: list
    arena: tuple  # (xmin, ymin, xmax, ymax)
    _flat: tuple = field(default=None, repr=False, compare=False)
    _segments: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.arena
        if xmax <= xmin or ymax <= ymin:
            raise GeometryError("arena rectangle is degenerate")
        for p in self.polygons:
            bx0, by0, bx1, by1 = p.bounds()
            if bx0 < xmin - 1e-9 or by0 < ymin - 1e-9 or bx1 > xmax + 1e-9 or by1 > ymax + 1e-9:
                raise GeometryError("obstacle vertex outside arena bounds")

    def flat(self):
        """(verts, offsets) arrays for the kernels; cached."""
        if self._flat is None:
            if self.polygons:
                verts = np.concatenate([p.vertices for p in self.polygons])
                offsets = np.cumsum([0] + [len(p.vertices) for p in self.polygons])
            else:
                verts = np.zeros((0, 2))
                offsets = np.zeros(1, dtype=np.int64)
            self._flat = (
                np.ascontiguousarray(verts, dtype=np.float64),
                np.ascontiguousarray(offsets, dtype=np.int64),
            )
        return self._flat

    def segments(self) -> np.ndarray:
        """All obstacle edges plus the four arena walls as (M, 4) rows."""
        if self._segments is None:
            rows = []
            for p in self.polygons:
                v = p.vertices
                nxt = np.roll(v, -1, axis=0)
                rows.append(np.concatenate([v, nxt], axis=1))
            xmin, ymin, xmax, ymax = self.arena
            rows.append(
                np.array(
                    [
                        [xmin, ymin, xmax, ymin],
                        [xmax, ymin, xmax, ymax],
                        [xmax, ymax, xmin, ymax],
                        [xmin, ymax, xmin, ymin],
                    ]
                )
            )
            self._segments = np.ascontiguousarray(
                np.concatenate(rows), dtype=np.float64
            )
        return self._segments

    def arena_array(self) -> np.ndarray:
        return np.asarray(self.arena, dtype=np.float64)


def footprint_at(fp: Footprint, pose: Pose2) -> Polygon:
    """Body-frame rectangle transformed to the world frame."""
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    hl, hw = fp.half_length, fp.half_width
    body = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[ct, -st], [st, ct]])
    return Polygon(body @ rot.T + [pose.x, pose.y])


def _clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman: subject clipped to a convex CCW polygon."""
    output = subject
    n = len(clip)
    for i in range(n):
        if len(output) == 0:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        pts = output
        kept = []
        prev = pts[-1]
        prev_side = (bx - ax) * (prev[1] - ay) - (by - ay) * (prev[0] - ax)
        for cur in pts:
            side = (bx - ax) * (cur[1] - ay) - (by - ay) * (cur[0] - ax)
            if side >= 0.0:
                if prev_side < 0.0:
                    t = prev_side / (prev_side - side)
                    kept.append(prev + t * (cur - prev))
                kept.append(cur)
            elif prev_side >= 0.0:
                t = prev_side / (prev_side - side)
                kept.append(prev + t * (cur - prev))
            prev, prev_side = cur, side
        output = np.array(kept) if kept else np.zeros((0, 2))
    return output


def iou(a: Polygon, b: Polygon) -> float:
    """Intersection-over-union of two convex polygons."""
    inter = _clip_convex(a.vertices, b.vertices)
    ia = abs(signed_area(inter)) if len(inter) >= 3 else 0.0
    union = a.area + b.area - ia
    if union <= 0:
        return 0.0
    return min(1.0, ia / union)


def collides(fp: Footprint, pose: Pose2, obs: ObstacleSet) -> bool:
    """True iff the footprint touches any obstacle or the arena boundary."""
    verts, offsets = obs.flat()
    return bool(
        _kernels.rect_collides(
            pose.x,
            pose.y,
            pose.theta,
            fp.half_length,
            fp.half_width,
            verts,
            offsets,
            obs.arena_array(),
        )
    )


def arc_pose_samples(
    pose: Pose2, action: DiscreteAction, s_values, circumradius: float
) -> np.ndarray:
    """(K, 3) poses at the given arc lengths along the action's path."""
    out = np.empty((len(s_values), 3))
    for i, s in enumerate(s_values):
        p = pose_at_arc_length(pose, action, float(s), circumradius)
        out[i, 0] = p.x
        out[i, 1] = p.y
        out[i, 2] = p.theta
    return out


def max_free_arc(
    fp: Footprint,
    pose: Pose2,
    action: DiscreteAction,
    obs: ObstacleSet,
    s_max: float,
    ds: float = 0.005,
) -> float:
    """Brute-force free-arc-length oracle.

    Samples poses along the action's arc at spacing ``ds`` (plus the exact
    endpoint ``s_max``) and returns the largest sampled arc length whose
    prefix is entirely collision-free; 0 if the first increment already
    collides. For in-place rotations arc length is measured at the
    footprint's circumscribed radius (see ``arc_length_per_step``).
    """
    if ds <= 0 or s_max <= 0:
        raise ValueError("ds and s_max must be positive")
    n = int(math.floor(s_max / ds + 1e-9))
    svals = [ds * (k + 1) for k in range(n)]
    if not svals or s_max - svals[-1] > 1e-12:
        svals.append(s_max)
    poses = arc_pose_samples(pose, action, svals, fp.circumradius)
    verts, offsets = obs.flat()
    hit = _kernels.sweep_first_collision(
        poses, fp.half_length, fp.half_width, verts, offsets, obs.arena_array()
    )
    if hit < 0:
        return s_max
    if hit == 0:
        return 0.0
    return svals[hit - 1]
