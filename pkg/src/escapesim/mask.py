"""Precomputed Lidar action mask for the discrete command set.

For every action, the footprint swept over one control interval is reduced
to a per-ray boundary distance: the farthest point of the swept region
reachable within the ray's angular cone. A live scan then classifies all
actions with one vectorized comparison - an action is valid when every ray
reports a range at or beyond its boundary distance, i.e. nothing can sit
inside the swept region.

Conservative conventions:
  * in-place rotations use the full circumscribed disc, which covers any
    rotation amount;
  * each ray's boundary is maximized over the cone spanning one full
    angular gap to either side, so an obstacle surface between two rays is
    still charged to the nearest rays;
  * swept points beyond the start footprint carry a safety pad
    (BOUNDARY_MARGIN). A scan only samples obstacle surfaces at the ray
    directions, so a face tilted relative to the rays can dip between two
    of them by up to its radial slope times the angular gap (about
    reach * gap, ~4 mm at 0.31 m reach, for the worst right-angle corner);
    the pad also absorbs the sweep's pose-sample spacing. The start
    footprint itself stays unpadded: the current pose is known collision
    free, so obstacles sit strictly outside it and motions that retreat
    from a nearby surface remain valid.
  * equality (range == boundary) counts as valid, matching the geometry
    module's touching-counts-as-collision convention on the other side.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Footprint, ObstacleSet, max_free_arc
from .kinematics import (
    DiscreteActionSet,
    MotionLimits,
    Pose2,
    arc_length_per_step,
    build_action_space,
    integrate_arc,
)
from .lidar import LidarSpec, ScanFrame, body_ray_angles

SWEEP_SAMPLE_SPACING = 0.005

# covers between-ray interpolation of obstacle surfaces plus the sweep's
# sample spacing (see module docstring)
BOUNDARY_MARGIN = 0.008


class MaskDimensionError(ValueError):
    """Scan length does not match the boundary table's ray count."""


@dataclass
class BoundaryTable:
    """Scene-independent per-action, per-ray boundary distances."""

    dist: np.ndarray  # (n_actions, ray_count)
    footprint: Footprint
    limits: MotionLimits
    spec: LidarSpec
    dt: float

    def key(self) -> str:
        """Content hash of everything the table depends on."""
        payload = json.dumps(
            {
                "footprint": [self.footprint.half_length, self.footprint.half_width],
                "limits": [self.limits.omega_max, self.limits.v_max, self.limits.dt],
                "spec": [self.spec.ray_count, self.spec.max_range],
                "dt": self.dt,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class ActionValidity:
    valid: np.ndarray  # (n_actions,) bool

    def __len__(self):
        return len(self.valid)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.valid)


def _sweep_corner_sets(action, fp: Footprint, dt: float) -> np.ndarray:
    """Footprint corners at dense pose samples along one step, body frame.

    Sample spacing bounds the displacement of any footprint point (center
    speed plus rotational speed at the circumscribed radius) by
    SWEEP_SAMPLE_SPACING.
    """
    w = abs(action.command.omega)
    v = abs(action.command.v)
    travel = (v + w * fp.circumradius) * dt
    n = max(1, int(math.ceil(travel / SWEEP_SAMPLE_SPACING)))
    origin = Pose2(0.0, 0.0, 0.0)
    poses = [origin] + [
        integrate_arc(origin, action.command, dt * k / n) for k in range(1, n + 1)
    ]
    arr = np.array([[p.x, p.y, p.theta] for p in poses])
    hl, hw = fp.half_length, fp.half_width
    ct = np.cos(arr[:, 2])
    st = np.sin(arr[:, 2])
    corners = np.empty((len(poses), 4, 2))
    for c, (sx, sy) in enumerate(((1, 1), (-1, 1), (-1, -1), (1, -1))):
        corners[:, c, 0] = arr[:, 0] + ct * sx * hl - st * sy * hw
        corners[:, c, 1] = arr[:, 1] + st * sx * hl + ct * sy * hw
    return corners


def precompute_boundary_table(
    fp: Footprint,
    action_set: DiscreteActionSet,
    spec: LidarSpec = LidarSpec(),
    dt: float | None = None,
) -> BoundaryTable:
    """Build the boundary table for one control interval.

    Deterministic: equal inputs produce bit-identical tables.
    """
    dt = action_set.limits.dt if dt is None else dt
    angles = body_ray_angles(spec)
    gap = spec.angular_gap
    dist = np.empty((len(action_set), spec.ray_count))
    for a, action in enumerate(action_set.actions):
        if action.in_place:
            # a rotating square sweeps its circumscribed disc
            dist[a, :] = fp.circumradius + BOUNDARY_MARGIN
            continue
        corners = _sweep_corner_sets(action, fp, dt)
        dist[a, :] = _kernels.cone_far_table(
            corners, angles, gap, fp.half_length, fp.half_width, BOUNDARY_MARGIN
        )
    return BoundaryTable(dist, fp, action_set.limits, spec, dt)


def compute_mask(scan: ScanFrame, table: BoundaryTable) -> ActionValidity:
    """Classify all actions against one scan: O(actions x rays) compares."""
    if scan.ranges.shape[0] != table.dist.shape[1]:
        raise MaskDimensionError(
            f"scan has {scan.ranges.shape[0]} rays, table expects {table.dist.shape[1]}"
        )
    valid = (scan.ranges[None, :] >= table.dist).all(axis=1)
    return ActionValidity(valid)


def brute_force_mask(
    fp: Footprint,
    pose: Pose2,
    action_set: DiscreteActionSet,
    obs: ObstacleSet,
    dt: float | None = None,
    ds: float = SWEEP_SAMPLE_SPACING,
) -> ActionValidity:
    """Ground-truth mask from the free-arc oracle (test use).

    An action is valid when the oracle's free arc covers the full one-step
    arc length. For turning actions the center-arc sampling step is scaled
    down by r/(r + circumradius) so that footprint corners move at most
    ``ds`` between samples even on tight turns.
    """
    dt = action_set.limits.dt if dt is None else dt
    rc = fp.circumradius
    valid = np.zeros(len(action_set), dtype=bool)
    for a, action in enumerate(action_set.actions):
        step = arc_length_per_step(action, dt, rc)
        if step <= 0.0:
            valid[a] = True
            continue
        if action.in_place:
            ds_a = ds
        else:
            r = action.radius
            ds_a = ds * r / (r + rc) if r is not None and math.isfinite(r) else ds
        free = max_free_arc(fp, pose, action, obs, s_max=step, ds=ds_a)
        valid[a] = free >= step - 1e-12
    return ActionValidity(valid)


def save_table(table: BoundaryTable, path) -> None:
    """Cache to disk: .npz with the distance matrix and a JSON meta record."""
    meta = json.dumps(
        {
            "key": table.key(),
            "footprint": [table.footprint.half_length, table.footprint.half_width],
            "limits": [table.limits.omega_max, table.limits.v_max, table.limits.dt],
            "spec": [table.spec.ray_count, table.spec.max_range],
            "dt": table.dt,
        }
    )
    np.savez(path, dist=table.dist, meta=np.frombuffer(meta.encode(), dtype=np.uint8))


def load_table(path) -> BoundaryTable:
    with np.load(path) as data:
        dist = data["dist"]
        meta = json.loads(bytes(data["meta"]).decode())
    fp = Footprint(*meta["footprint"])
    limits = MotionLimits(*meta["limits"])
    spec = LidarSpec(ray_count=int(meta["spec"][0]), max_range=meta["spec"][1])
    table = BoundaryTable(dist, fp, limits, spec, meta["dt"])
    if table.key() != meta["key"]:
        raise ValueError("boundary table cache key mismatch")
    return table


def load_or_build_table(
    cache_dir,
    fp: Footprint,
    action_set: DiscreteActionSet,
    spec: LidarSpec = LidarSpec(),
    dt: float | None = None,
) -> BoundaryTable:
    """Fetch a cached table by content hash, building and storing on miss."""
    import pathlib

    probe = BoundaryTable(
        np.zeros((0, 0)), fp, action_set.limits, spec,
        action_set.limits.dt if dt is None else dt,
    )
    path = pathlib.Path(cache_dir) / f"boundary_{probe.key()}.npz"
    if path.exists():
        return load_table(path)
    table = precompute_boundary_table(fp, action_set, spec, dt)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_table(table, path)
    return table


def default_table(limits: MotionLimits = MotionLimits()) -> BoundaryTable:
    """Convenience: table for the default robot, built in memory."""
    return precompute_boundary_table(Footprint(), build_action_space(limits))
