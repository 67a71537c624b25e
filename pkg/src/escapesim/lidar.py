"""Single-line 2D Lidar simulation: 500 evenly spaced rays per sweep.

Ray j points at body-frame angle 2*pi*j/ray_count; the sensor sits at the
robot's geometric center with ray 0 aligned to the heading. Ranges are hit
distances against obstacle edges and the arena walls, clamped to
max_range (misses report max_range). Noise-free by default.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import ObstacleSet
from .kinematics import TWO_PI, Pose2


class InvalidPoseError(ValueError):
    """Sensor origin inside an obstacle or outside the arena."""


@dataclass(frozen=True)
class LidarSpec:
    ray_count: int = 500
    max_range: float = 8.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.ray_count < 3:
            raise ValueError("ray_count must be >= 3")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    @property
    def angular_gap(self) -> float:
        return TWO_PI / self.ray_count

    @property
    def chord_floor(self) -> float:
        """Chord between adjacent rays at max range: the minimum obstacle
        size the scan is guaranteed not to miss."""
        return self.angular_gap * self.max_range


@dataclass
class ScanFrame:
    ranges: np.ndarray
    pose_stamp: Pose2


def body_ray_angles(spec: LidarSpec) -> np.ndarray:
    return TWO_PI * np.arange(spec.ray_count) / spec.ray_count


def simulate_scan(
    pose: Pose2, obs: ObstacleSet, spec: LidarSpec = LidarSpec(), rng=None
) -> ScanFrame:
    """Cast all rays from the robot center at ``pose``.

    Raises InvalidPoseError when the center lies inside (or on) an obstacle
    or outside the arena, since ranges are meaningless there.
    """
    xmin, ymin, xmax, ymax = obs.arena
    if not (xmin < pose.x < xmax and ymin < pose.y < ymax):
        raise InvalidPoseError("sensor origin outside arena")
    for p in obs.polygons:
        d, _, _ = _kernels.point_poly_nearest(pose.x, pose.y, p.vertices)
        if d == 0.0:
            raise InvalidPoseError("sensor origin inside an obstacle")
    angles = pose.theta + body_ray_angles(spec)
    ranges = _kernels.raycast(pose.x, pose.y, angles, obs.segments(), spec.max_range)
    if spec.noise_sigma > 0.0:
        rng = np.random.default_rng() if rng is None else rng
        ranges = ranges + rng.normal(0.0, spec.noise_sigma, size=ranges.shape)
        ranges = np.clip(ranges, 1e-9, spec.max_range)
    return ScanFrame(np.asarray(ranges, dtype=np.float64), pose)
