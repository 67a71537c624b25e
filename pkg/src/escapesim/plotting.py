"""Trajectory plots: episode trace -> self-contained SVG."""

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .geometry import Footprint, footprint_at
from .kinematics import Pose2


class TraceError(ValueError):
    pass


def parse_trace(path):
    """(header, steps) of the first episode in a JSONL trace.

    Multi-episode files (e.g. from `serve --trace`) are truncated at the
    second header. Parse errors name the offending line.
    """
    header = None
    steps = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceError(f"line {lineno}: malformed JSON ({e})") from e
            kind = rec.get("type")
            if kind == "header":
                if header is not None:
                    break
                header = rec
            elif kind == "step":
                try:
                    Pose2(*rec["pose"])
                except (KeyError, TypeError, ValueError) as e:
                    raise TraceError(f"line {lineno}: bad step record ({e})") from e
                steps.append(rec)
            else:
                raise TraceError(f"line {lineno}: unknown record type {kind!r}")
    if header is None:
        raise TraceError("trace has no header record")
    return header, steps


def plot_trajectory(trace_path, out_path) -> None:
    """Render obstacles (filled), the start footprint in red, the final in
    blue, and intermediate footprints on a red-to-blue gradient."""
    header, steps = parse_trace(trace_path)
    fp = Footprint(*header["footprint"])
    arena = header["scenario"]["arena"]
    poses = [Pose2(*header["start"])] + [Pose2(*s["pose"]) for s in steps]

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.add_patch(
        plt.Rectangle(
            (arena[0], arena[1]),
            arena[2] - arena[0],
            arena[3] - arena[1],
            fill=False,
            edgecolor="0.3",
            linewidth=1.2,
        )
    )
    for verts in header["scenario"]["obstacles"]:
        ax.fill(*np.asarray(verts).T, color="black")
    goal = Pose2(*header["goal"])
    gv = footprint_at(fp, goal).vertices
    ax.plot(*np.vstack([gv, gv[:1]]).T, color="green", linestyle="--", linewidth=1.0)

    n = len(poses)
    for i, pose in enumerate(poses):
        t = i / (n - 1) if n > 1 else 0.0
        color = (1.0 - t, 0.0, t)
        v = footprint_at(fp, pose).vertices
        ax.plot(*np.vstack([v, v[:1]]).T, color=color, linewidth=1.0)
    ax.set_aspect("equal")
    ax.set_xlim(arena[0] - 0.1, arena[2] + 0.1)
    ax.set_ylim(arena[1] - 0.1, arena[3] + 0.1)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.savefig(out_path, format="svg", bbox_inches="tight")
    plt.close(fig)
