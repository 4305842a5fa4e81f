"""The reception-probability curve and the grid likelihood search.

Coordinate estimation works the same way for every mapping algorithm in this
package: each timestep contributes a per-vertex factor (reception probability
when a packet arrived, its complement when it did not, and a 0/1 beam-window
factor when the reception carried a sector identity), and the estimate is the
grid vertex maximizing the product. The product is accumulated in log space;
zero factors short-circuit a vertex instead of producing log(0). Ties break
to the lexicographically smallest (x, y, z), which makes the argmax identical
under any partitioning of the vertex set across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TopologyCoordinate, wrap_angle
from .errors import InfeasibleEvidenceError, UnlocatableNodeError

__all__ = [
    "ReceptionProbabilityFn",
    "GridSpec",
    "LikelihoodField",
    "SectorRecord",
    "s_of_d",
    "z1",
    "z2_angular",
    "beam_window_margin",
    "ml_search",
]

TWO_PI = 2.0 * math.pi

# Vertex-count ceiling for one vectorized distance block; larger problems are
# evaluated in pose chunks to bound memory.
_BLOCK_LIMIT = 4_000_000


@dataclass(frozen=True)
class ReceptionProbabilityFn:
    """Piecewise-linear map from link distance to reception probability.

    Equals ``p0`` out to ``r``, falls linearly to zero at ``R``, and is zero
    beyond. Requires 0 < p0 <= 1 and 0 < r < R.
    """

    p0: float
    r: float
    R: float

    def __post_init__(self):
        if not (0.0 < self.p0 <= 1.0):
            raise ValueError("p0 must lie in (0, 1]")
        if not (0.0 < self.r < self.R):
            raise ValueError("need 0 < r < R")

    def __call__(self, d):
        return s_of_d(self, d)


def s_of_d(fn: ReceptionProbabilityFn, d):
    """Reception probability at distance ``d`` (scalar or array)."""
    d = np.asarray(d, dtype=float)
    out = np.where(
        d <= fn.r,
        fn.p0,
        np.where(d >= fn.R, 0.0, fn.p0 * (fn.R - d) / (fn.R - fn.r)),
    )
    if out.ndim == 0:
        return float(out)
    return out


def z1(fn: ReceptionProbabilityFn, d, received: bool):
    """Per-timestep distance factor: S(d) on reception, 1 - S(d) otherwise."""
    s = s_of_d(fn, d)
    return s if received else 1.0 - s


@dataclass(frozen=True)
class SectorRecord:
    """Direction evidence attached to one reception: the reporting beam's
    boresight and widths."""

    azimuth: float
    elevation: float
    horizontal_beamwidth: float
    vertical_beamwidth: float


def beam_window_margin(grid_step: float, fn_R: float) -> float:
    """Half-width widening that absorbs grid discretization error."""
    return math.atan(grid_step / fn_R)


def z2_angular(
    robot_pose: np.ndarray,
    sector: SectorRecord,
    vertex: np.ndarray,
    margin: float = 0.0,
) -> int:
    """0/1 beam-window factor for a vertex seen from the reporting pose.

    The window is the sector beam widened by ``margin`` on each side, with
    closed bounds. A half-width of pi or more accepts every azimuth.
    """
    robot_pose = np.asarray(robot_pose, dtype=float)
    vertex = np.asarray(vertex, dtype=float)
    dvec = vertex - robot_pose
    az = math.atan2(dvec[1], dvec[0])
    el = math.atan2(dvec[2] if dvec.shape[0] > 2 else 0.0, math.hypot(dvec[0], dvec[1]))
    half_h = sector.horizontal_beamwidth / 2.0 + margin
    half_v = sector.vertical_beamwidth / 2.0 + margin
    ok_az = half_h >= math.pi or abs(wrap_angle(az - sector.azimuth)) <= half_h
    ok_el = half_v >= math.pi or abs(wrap_angle(el - sector.elevation)) <= half_v
    return int(ok_az and ok_el)


@dataclass(frozen=True)
class GridSpec:
    """A regular evaluation lattice: origin, step, and per-axis vertex counts.

    ``dimensionality`` is 2 or 3; planar grids keep z fixed at the origin's z.
    """

    origin: tuple[float, float, float]
    step: float
    counts: tuple[int, ...]
    dimensionality: int = 2

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be > 0")
        if self.dimensionality not in (2, 3):
            raise ValueError("dimensionality must be 2 or 3")
        if len(self.counts) != self.dimensionality:
            raise ValueError("need one count per axis")
        if any(c < 1 for c in self.counts):
            raise ValueError("counts must be >= 1")

    def axes(self) -> list[np.ndarray]:
        return [
            self.origin[i] + self.step * np.arange(self.counts[i])
            for i in range(self.dimensionality)
        ]

    def vertices(self) -> np.ndarray:
        """All grid vertices as an (M, 3) array, C-ordered over the axes."""
        axes = self.axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        cols = [m.reshape(-1) for m in mesh]
        while len(cols) < 3:
            cols.append(np.full_like(cols[0], self.origin[2]))
        return np.stack(cols, axis=1)

    @classmethod
    def from_region(
        cls, lo, hi, step: float, dimensionality: int = 2, snap: bool = True
    ) -> "GridSpec":
        """Grid covering [lo, hi]. With ``snap`` the origin sits on integer
        multiples of the step, so grids built for different nodes share
        vertices exactly."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        origin = []
        counts = []
        for i in range(dimensionality):
            o = math.floor(lo[i] / step) * step if snap else lo[i]
            origin.append(o)
            counts.append(max(1, int(math.floor((hi[i] - o) / step + 1e-9)) + 1))
        while len(origin) < 3:
            # fixed axis of a planar grid: sit at the center of the region
            mid = (float(lo[2]) + float(hi[2])) / 2.0 if len(lo) > 2 else 0.0
            origin.append(mid)
        return cls(tuple(origin), step, tuple(counts), dimensionality)

    @classmethod
    def around_points(
        cls, points: np.ndarray, radius: float, step: float,
        dimensionality: int = 2, snap: bool = True,
    ) -> "GridSpec":
        """Grid covering the radius-neighborhood of a point set."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = pts.min(axis=0) - radius
        hi = pts.max(axis=0) + radius
        return cls.from_region(lo, hi, step, dimensionality, snap)


@dataclass(frozen=True)
class LikelihoodField:
    """Per-vertex reception likelihoods plus the chosen maximum."""

    grid: GridSpec
    values: np.ndarray  # shaped like grid.counts
    argmax_vertex: TopologyCoordinate
    peak: float


def _lexicographic_argmax(grid: GridSpec, values: np.ndarray) -> tuple[TopologyCoordinate, float]:
    peak = float(values.max())
    tied = np.argwhere(values == peak)
    # Index order equals coordinate order because axes are ascending.
    idx = tied[0] if len(tied) == 1 else min(map(tuple, tied))
    coord = [grid.origin[i] + grid.step * idx[i] for i in range(grid.dimensionality)]
    while len(coord) < 3:
        coord.append(grid.origin[2])
    return TopologyCoordinate(*coord), peak


def ml_search(
    poses: np.ndarray,
    received: np.ndarray,
    fn: ReceptionProbabilityFn,
    grid: GridSpec,
    sectors: "list[SectorRecord | None] | None" = None,
    window_margin: float = 0.0,
    node_id: int | None = None,
) -> LikelihoodField:
    """Maximize the per-vertex product of timestep factors over the grid.

    ``poses`` is (n, 3) robot/anchor positions, ``received`` the matching
    reception flags, and ``sectors`` optional per-timestep direction records
    (entries may be None; direction constrains only reception timesteps).
    Evaluation is restricted to the union of R-balls around reception poses;
    everything outside has zero likelihood by construction.

    Raises :class:`UnlocatableNodeError` when nothing was received and
    :class:`InfeasibleEvidenceError` when the evidence zeroes every vertex.
    """
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    if poses.shape[1] == 2:
        poses = np.column_stack([poses, np.zeros(len(poses))])
    received = np.asarray(received, dtype=bool)
    if len(received) != len(poses):
        raise ValueError("poses and received must have equal length")
    if sectors is not None and len(sectors) != len(poses):
        raise ValueError("sectors must align with poses")

    rec_idx = np.nonzero(received)[0]
    if rec_idx.size == 0:
        raise UnlocatableNodeError(node_id)

    vertices = grid.vertices()
    values_flat = np.zeros(len(vertices))

    # Restrict to the union of R-balls around reception poses.
    mask = np.zeros(len(vertices), dtype=bool)
    for k in rec_idx:
        d2 = np.sum((vertices - poses[k]) ** 2, axis=1)
        mask |= d2 <= fn.R * fn.R
    active = np.nonzero(mask)[0]

    if active.size:
        V = vertices[active]
        lo = V.min(axis=0)
        hi = V.max(axis=0)

        # Poses farther than R from the active region contribute a factor of
        # exactly 1 (non-reception beyond R), so they can be skipped.
        clamped = np.clip(poses, lo, hi)
        near = np.linalg.norm(poses - clamped, axis=1) <= fn.R
        keep = np.nonzero(near | received)[0]

        log_p = np.zeros(active.size)
        alive = np.ones(active.size, dtype=bool)

        chunk = max(1, _BLOCK_LIMIT // max(1, active.size))
        for start in range(0, len(keep), chunk):
            ks = keep[start : start + chunk]
            d = np.linalg.norm(V[:, None, :] - poses[ks][None, :, :], axis=2)
            s = s_of_d(fn, d)
            z = np.where(received[ks][None, :], s, 1.0 - s)
            if sectors is not None:
                for j, k in enumerate(ks):
                    rec = sectors[k]
                    if rec is None or not received[k]:
                        continue
                    w = _window_mask(V, poses[k], rec, window_margin)
                    z[:, j] *= w
            nz = z > 0.0
            row_alive = nz.all(axis=1)
            alive &= row_alive
            safe = np.where(nz, z, 1.0)
            log_p += np.sum(np.log(safe), axis=1)
            log_p[~alive] = -np.inf

        vals = np.where(alive, np.exp(log_p), 0.0)
        values_flat[active] = vals

    if not np.any(values_flat > 0.0):
        raise InfeasibleEvidenceError(
            f"likelihood is zero everywhere on the grid (node {node_id})"
        )

    values = values_flat.reshape(grid.counts)
    argmax, peak = _lexicographic_argmax(grid, values)
    return LikelihoodField(grid=grid, values=values, argmax_vertex=argmax, peak=peak)


def _window_mask(
    V: np.ndarray, pose: np.ndarray, rec: SectorRecord, margin: float
) -> np.ndarray:
    """Vectorized beam-window membership of vertices seen from one pose."""
    d = V - pose[None, :]
    az = np.arctan2(d[:, 1], d[:, 0])
    el = np.arctan2(d[:, 2], np.hypot(d[:, 0], d[:, 1]))
    half_h = rec.horizontal_beamwidth / 2.0 + margin
    half_v = rec.vertical_beamwidth / 2.0 + margin
    ok_az = (
        np.ones(len(V), dtype=bool)
        if half_h >= math.pi
        else np.abs(wrap_angle(az - rec.azimuth)) <= half_h
    )
    ok_el = (
        np.ones(len(V), dtype=bool)
        if half_v >= math.pi
        else np.abs(wrap_angle(el - rec.elevation)) <= half_v
    )
    return (ok_az & ok_el).astype(float)
