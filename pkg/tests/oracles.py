"""Independent brute-force re-implementations used as test oracles.

Everything here is written with plain loops and direct products, sharing no
code path with the package: no log-space accumulation, no grid restriction,
no vectorization.
"""

from __future__ import annotations

import math


def s_curve(p0: float, r: float, R: float, d: float) -> float:
    if d <= r:
        return p0
    if d >= R:
        return 0.0
    return p0 * (R - d) / (R - r)


def _wrap(a: float) -> float:
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if w == -math.pi else w


def window_contains(pose, vertex, azimuth, elevation, half_h, half_v) -> bool:
    dx = vertex[0] - pose[0]
    dy = vertex[1] - pose[1]
    dz = (vertex[2] - pose[2]) if len(vertex) > 2 and len(pose) > 2 else 0.0
    az = math.atan2(dy, dx)
    el = math.atan2(dz, math.hypot(dx, dy))
    ok_az = half_h >= math.pi or abs(_wrap(az - azimuth)) <= half_h
    ok_el = half_v >= math.pi or abs(_wrap(el - elevation)) <= half_v
    return ok_az and ok_el


def brute_force_field(
    poses,
    received,
    p0,
    r,
    R,
    grid_vertices,
    sectors=None,
    margin=0.0,
):
    """Direct product likelihood at every vertex; returns list of values."""
    values = []
    for v in grid_vertices:
        prod = 1.0
        for k, pose in enumerate(poses):
            d = math.dist(v, pose)
            s = s_curve(p0, r, R, d)
            z = s if received[k] else 1.0 - s
            if sectors is not None and received[k] and sectors[k] is not None:
                az, el, hbw, vbw = sectors[k]
                if not window_contains(pose, v, az, el, hbw / 2 + margin, vbw / 2 + margin):
                    z = 0.0
            prod *= z
            if prod == 0.0:
                break
        values.append(prod)
    return values


def brute_force_argmax(grid_vertices, values):
    """Max value with lexicographically smallest coordinate among ties."""
    best = max(values)
    tied = [tuple(v) for v, val in zip(grid_vertices, values) if val == best]
    return min(tied), best
