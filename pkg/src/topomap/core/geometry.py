"""Small geometric primitives: angles, bearings, and segment/box clipping."""

from __future__ import annotations

import math

import numpy as np

from .types import Obstacle

__all__ = [
    "wrap_angle",
    "azimuth_elevation",
    "segment_box_overlap",
    "segment_crosses_box",
    "obstacle_traversals",
]

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    w = np.remainder(np.asarray(a) + math.pi, TWO_PI) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    if np.ndim(a) == 0:
        return float(w)
    return w


def azimuth_elevation(origin: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """Bearing from origin to target: azimuth in [0, 2*pi), elevation in
    [-pi/2, pi/2]."""
    d = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    az = math.atan2(d[1], d[0]) % TWO_PI
    horiz = math.hypot(d[0], d[1])
    el = math.atan2(d[2] if d.shape[0] > 2 else 0.0, horiz)
    return az, el


def segment_box_overlap(p0: np.ndarray, p1: np.ndarray, box: Obstacle) -> float:
    """Length of the segment p0->p1 inside an axis-aligned box (meters).

    Standard slab clipping: intersect the parameter interval [0, 1] with the
    per-axis entry/exit intervals.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for axis in range(3):
        lo, hi = box.min_corner[axis], box.max_corner[axis]
        if abs(d[axis]) < 1e-15:
            if not (lo <= p0[axis] <= hi):
                return 0.0
            continue
        ta = (lo - p0[axis]) / d[axis]
        tb = (hi - p0[axis]) / d[axis]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 >= t1:
            return 0.0
    return float((t1 - t0) * np.linalg.norm(d))


def segment_crosses_box(p0: np.ndarray, p1: np.ndarray, box: Obstacle, eps: float = 1e-9) -> bool:
    """True when the segment passes through the box interior (not a graze)."""
    return segment_box_overlap(p0, p1, box) > eps


def obstacle_traversals(
    p0: np.ndarray, p1: np.ndarray, obstacles
) -> list[tuple[Obstacle, float]]:
    """All obstacles the segment passes through, with traversed thickness."""
    out = []
    for ob in obstacles:
        length = segment_box_overlap(p0, p1, ob)
        if length > 1e-9:
            out.append((ob, length))
    return out
