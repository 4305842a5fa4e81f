"""Classical anchor-based position estimators used as comparison baselines:
lateration from distances, triangulation from subtended angles, and a
received-power weighted centroid.
"""

from __future__ import annotations

import math

import numpy as np

from .core import PhysicalPoint
from .errors import DegenerateGeometryError

__all__ = [
    "trilaterate",
    "multilaterate",
    "triangulate",
    "rssi_weighted_centroid",
]


def _lateration_system(anchors: np.ndarray, distances: np.ndarray):
    """Linearize the range equations by subtracting the last anchor's."""
    last = anchors[-1]
    d_last = distances[-1]
    P = 2.0 * (anchors[:-1] - last)
    Q = (
        np.sum(anchors[:-1] ** 2, axis=1)
        - np.sum(last**2)
        + d_last**2
        - distances[:-1] ** 2
    )
    return P, Q


def trilaterate(anchors, distances) -> PhysicalPoint:
    """Position from exactly 3 anchors (2D) or 4 anchors (3D).

    Solves the linearized square system; collinear (2D) or coplanar (3D)
    anchors make it singular.
    """
    anchors = np.asarray(anchors, dtype=float)
    distances = np.asarray(distances, dtype=float)
    dims = anchors.shape[1]
    if dims not in (2, 3):
        raise ValueError("anchors must be 2D or 3D points")
    if len(anchors) != dims + 1:
        raise ValueError(f"trilateration in {dims}D needs exactly {dims + 1} anchors")
    P, Q = _lateration_system(anchors, distances)
    if abs(np.linalg.det(P)) < 1e-9:
        raise DegenerateGeometryError("anchors are collinear/coplanar")
    x = np.linalg.solve(P, Q)
    return PhysicalPoint(*x) if dims == 3 else PhysicalPoint(x[0], x[1])


def multilaterate(anchors, distances) -> PhysicalPoint:
    """Least-squares position from n >= dims + 1 anchors.

    With exact distances this equals trilateration on any full-rank subset.
    """
    anchors = np.asarray(anchors, dtype=float)
    distances = np.asarray(distances, dtype=float)
    dims = anchors.shape[1]
    if len(anchors) < dims + 1:
        raise ValueError(f"multilateration in {dims}D needs at least {dims + 1} anchors")
    P, Q = _lateration_system(anchors, distances)
    if np.linalg.matrix_rank(P, tol=1e-9) < dims:
        raise DegenerateGeometryError("anchor geometry is rank deficient")
    x, *_ = np.linalg.lstsq(P, Q, rcond=None)
    return PhysicalPoint(*x) if dims == 3 else PhysicalPoint(x[0], x[1])


def _angle_circles(p1: np.ndarray, p2: np.ndarray, angle: float):
    """The two circles through p1, p2 whose minor arc subtends the chord at
    the given inscribed angle (seen from the major arc)."""
    if not (1e-9 < angle < math.pi - 1e-9):
        raise DegenerateGeometryError("subtended angles must lie strictly in (0, pi)")
    chord = p2 - p1
    L = np.linalg.norm(chord)
    if L < 1e-12:
        raise DegenerateGeometryError("coincident anchors")
    radius = L / (2.0 * math.sin(angle))
    h = (L / 2.0) / math.tan(angle)  # signed center offset from the midpoint
    mid = (p1 + p2) / 2.0
    normal = np.array([-chord[1], chord[0]]) / L
    return [(mid + h * normal, radius), (mid - h * normal, radius)]


def _circle_intersections(c1, r1, c2, r2):
    d = np.linalg.norm(c2 - c1)
    if d < 1e-12 or d > r1 + r2 + 1e-9 or d < abs(r1 - r2) - 1e-9:
        return []
    a = (r1**2 - r2**2 + d**2) / (2 * d)
    h2 = r1**2 - a**2
    h = math.sqrt(max(h2, 0.0))
    base = c1 + a * (c2 - c1) / d
    off = np.array([-(c2 - c1)[1], (c2 - c1)[0]]) / d * h
    if h < 1e-12:
        return [base]
    return [base + off, base - off]


def _subtended(p: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    cu = u - p
    cv = v - p
    nu = np.linalg.norm(cu)
    nv = np.linalg.norm(cv)
    if nu < 1e-12 or nv < 1e-12:
        return math.nan
    return math.acos(float(np.clip(np.dot(cu, cv) / (nu * nv), -1.0, 1.0)))


def triangulate(anchors, angles) -> PhysicalPoint:
    """Position from the three angles subtending anchor pairs at the unknown.

    ``angles[k]`` is the angle subtended at the unknown point by the anchor
    pair omitting anchor k: (angle BC, angle AC, angle AB). Each angle
    constrains the unknown to an arc; candidates come from intersecting the
    circle constructions and are validated against the angles themselves,
    which rejects the mirror solution (it subtends supplementary angles).
    """
    anchors = np.asarray(anchors, dtype=float)[:, :2]
    if len(anchors) != 3:
        raise ValueError("triangulation needs exactly 3 anchors")
    A, B, C = anchors
    pair_points = [(B, C), (A, C), (A, B)]
    circles = [_angle_circles(p, q, ang) for (p, q), ang in zip(pair_points, angles)]

    anchor_tol = 1e-6
    consistent: list[np.ndarray] = []
    for c1, r1 in circles[0]:
        for c2, r2 in circles[1]:
            for cand in _circle_intersections(c1, r1, c2, r2):
                if min(np.linalg.norm(cand - a) for a in anchors) < anchor_tol:
                    continue  # shared-anchor intersection, not the unknown
                err = sum(
                    abs(_subtended(cand, p, q) - ang)
                    for (p, q), ang in zip(pair_points, angles)
                )
                if err < 1e-5 and all(
                    np.linalg.norm(cand - c) > 1e-6 for c in consistent
                ):
                    consistent.append(cand)
    if not consistent:
        raise DegenerateGeometryError("subtended angles are mutually inconsistent")
    if len(consistent) > 1:
        # exterior vantage points can have a mirror twin subtending the very
        # same three angles; angle-only data cannot break that tie
        raise DegenerateGeometryError(
            "angles admit two vantage points; resection is ambiguous here"
        )
    return PhysicalPoint(consistent[0][0], consistent[0][1])


def rssi_weighted_centroid(anchors, rx_powers_dbm) -> PhysicalPoint:
    """Centroid of the three strongest anchors weighted by linear rx power."""
    anchors = np.asarray(anchors, dtype=float)
    powers = np.asarray(rx_powers_dbm, dtype=float)
    if len(anchors) < 3:
        raise DegenerateGeometryError("need at least three heard anchors")
    top = np.argsort(powers)[-3:]
    w = 10.0 ** (powers[top] / 10.0)
    centroid = (anchors[top] * w[:, None]).sum(axis=0) / w.sum()
    if anchors.shape[1] == 3:
        return PhysicalPoint(*centroid)
    return PhysicalPoint(centroid[0], centroid[1])
