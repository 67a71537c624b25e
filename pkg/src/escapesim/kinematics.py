"""Differential-drive arc kinematics and the 42-action discrete command set.

A command (omega, v) held for one control interval moves the robot along a
circular arc of radius v/omega (a straight line as omega -> 0, a spin in
place when v = 0). The discrete set contains two in-place rotations plus
ten exponentially spaced turning radii, each with all four sign
combinations of (omega, v). Scaling a command by k > 0 keeps the turning
radius, so every scaled variant traces the same circle at a different
speed.
"""

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# below this |omega| the arc formula degenerates; use the straight-line limit
OMEGA_STRAIGHT_EPS = 1e-6

RADIUS_COUNT = 10
ACTION_COUNT = 2 + 4 * RADIUS_COUNT  # 42


def normalize_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(theta + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


@dataclass(frozen=True)
class Pose2:
    """Planar pose; heading normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class VelocityCommand:
    """Angular (rad/s) and linear (m/s) velocity held for one interval."""

    omega: float
    v: float


@dataclass(frozen=True)
class MotionLimits:
    omega_max: float = 1.0
    v_max: float = 0.3
    dt: float = 0.2

    def __post_init__(self):
        if self.omega_max <= 0 or self.v_max <= 0 or self.dt <= 0:
            raise ValueError("motion limits must be positive")


IN_PLACE = "in_place"
TURN = "turn"


@dataclass(frozen=True)
class DiscreteAction:
    """One entry of the discrete command set.

    ``radius`` is the unsigned turning radius |v/omega| for turns, None for
    in-place rotations, and may be math.inf for a synthetic straight
    command (not part of the built set but accepted by arc sampling).
    """

    index: int
    command: VelocityCommand
    radius: float | None
    kind: str

    @property
    def in_place(self) -> bool:
        return self.kind == IN_PLACE


@dataclass(frozen=True)
class DiscreteActionSet:
    actions: tuple
    limits: MotionLimits

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, i: int) -> DiscreteAction:
        return self.actions[i]

    def command_array(self) -> np.ndarray:
        """(N, 2) array of (omega, v) rows, index-aligned."""
        return np.array([[a.command.omega, a.command.v] for a in self.actions])


class ScaleRangeError(ValueError):
    """Scaling a command past the motion limits."""


def integrate_arc(pose: Pose2, cmd: VelocityCommand, dt: float) -> Pose2:
    """Closed-form arc endpoint after holding ``cmd`` for ``dt`` seconds.

    Exact (not an integrator): theta' = theta + omega*dt, position moves
    along the circle of radius v/omega; for |omega| below
    OMEGA_STRAIGHT_EPS the straight-line limit is used to avoid
    cancellation in v/omega.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w, v = cmd.omega, cmd.v
    if abs(w) < OMEGA_STRAIGHT_EPS:
        return Pose2(
            pose.x + v * dt * math.cos(pose.theta),
            pose.y + v * dt * math.sin(pose.theta),
            pose.theta,
        )
    theta1 = pose.theta + w * dt
    r = v / w
    return Pose2(
        pose.x + r * (math.sin(theta1) - math.sin(pose.theta)),
        pose.y - r * (math.cos(theta1) - math.cos(pose.theta)),
        theta1,
    )


def build_action_space(limits: MotionLimits) -> DiscreteActionSet:
    """Construct the 42-action set for the given limits.

    Ordering (fixed so masks and policy heads stay index-aligned):
      0: (+omega_max, 0)   in-place, counter-clockwise
      1: (-omega_max, 0)   in-place, clockwise
      2 + 4*i + c for radius index i = 0..9, r_i = 0.01 * 2**i meters,
      with sign combination c: 0 -> (+w, +v), 1 -> (+w, -v),
      2 -> (-w, +v), 3 -> (-w, -v), where
      w = min(omega_max, v_max / r_i) and v = min(v_max, omega_max * r_i).
    """
    actions = [
        DiscreteAction(0, VelocityCommand(limits.omega_max, 0.0), None, IN_PLACE),
        DiscreteAction(1, VelocityCommand(-limits.omega_max, 0.0), None, IN_PLACE),
    ]
    for i in range(RADIUS_COUNT):
        r = 0.01 * 2.0**i
        w = min(limits.omega_max, limits.v_max / r)
        v = min(limits.v_max, limits.omega_max * r)
        for c, (sw, sv) in enumerate(((1, 1), (1, -1), (-1, 1), (-1, -1))):
            actions.append(
                DiscreteAction(
                    2 + 4 * i + c, VelocityCommand(sw * w, sv * v), r, TURN
                )
            )
    return DiscreteActionSet(tuple(actions), limits)


def scale_action(
    action: DiscreteAction, k: float, limits: MotionLimits
) -> VelocityCommand:
    """Scale (omega, v) by k > 0; keeps the turning radius.

    Raises ScaleRangeError when the scaled command leaves the limits.
    """
    if k <= 0:
        raise ValueError("scale factor must be positive")
    w = k * action.command.omega
    v = k * action.command.v
    tol = 1.0 + 1e-12
    if abs(w) > limits.omega_max * tol or abs(v) > limits.v_max * tol:
        raise ScaleRangeError(
            f"scaled command ({w:.6g}, {v:.6g}) exceeds limits "
            f"({limits.omega_max}, {limits.v_max})"
        )
    return VelocityCommand(w, v)


def arc_length_per_step(action: DiscreteAction, dt: float, circumradius: float) -> float:
    """Arc length covered in one control interval.

    For translating commands this is |v|*dt along the center path; for
    in-place rotations the outermost footprint corner traces the arc, so
    the length is measured at ``circumradius``.
    """
    if action.in_place:
        return abs(action.command.omega) * dt * circumradius
    return abs(action.command.v) * dt


def pose_at_arc_length(
    pose: Pose2, action: DiscreteAction, s: float, circumradius: float
) -> Pose2:
    """Pose after traveling arc length ``s`` >= 0 along the action's path.

    The parameterization is geometric: it depends on the action's circle
    and direction signs only, not its speed, so any k-scaled variant of the
    same action yields identical poses at equal arc length.
    """
    if s == 0.0:
        return pose
    w, v = action.command.omega, action.command.v
    if action.in_place:
        dtheta = math.copysign(s / circumradius, w)
        return Pose2(pose.x, pose.y, pose.theta + dtheta)
    t = s / abs(v)
    return integrate_arc(pose, action.command, t)
