"""Map-quality metrics and energy accounting.

The headline metric is the one-hop connectivity error: the percentage of
physical one-hop neighbor relations an estimated map violates. Each node
gets a per-axis communication ellipse in the estimated frame, sized by how
the map stretched that node's distance to a pair of reference axis lines,
and a neighbor violates the relation when its image falls outside the
ellipse. Distance-error statistics, a sector-displacement histogram, and a
similarity (scale + orthogonal + shift) alignment round out the toolbox.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, MetricUndefinedError, MissingCountError

__all__ = [
    "ConnectivityEllipse",
    "ConnectivityErrorResult",
    "AlignmentTransform",
    "EnergyCounts",
    "one_hop_connectivity_error",
    "distance_error_stats",
    "sector_displacement",
    "procrustes_fit",
    "apply_alignment",
    "energy_estimate",
]


def _paired_arrays(physical: dict, estimated: dict) -> tuple[list, np.ndarray, np.ndarray]:
    missing = sorted(set(estimated) - set(physical))
    if missing:
        raise ValueError(f"estimated map has ids missing from physical map: {missing}")
    ids = sorted(set(physical) & set(estimated))
    if not ids:
        raise ValueError("maps share no node ids")

    def row(v):
        a = v.as_array() if hasattr(v, "as_array") else np.asarray(v, dtype=float)
        return np.concatenate([a, np.zeros(3 - len(a))]) if len(a) < 3 else a[:3]

    P = np.array([row(physical[i]) for i in ids])
    T = np.array([row(estimated[i]) for i in ids])
    return ids, P, T


@dataclass(frozen=True)
class ConnectivityEllipse:
    """Per-node communication region in the estimated frame: one semi-axis
    per reference line, along that line's image direction."""

    axes: tuple[float, ...]
    directions: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if any(a <= 0 for a in self.axes):
            raise ValueError("ellipse axes must be positive")


@dataclass(frozen=True)
class ConnectivityErrorResult:
    total_percent: float
    per_node_ratio: dict[int, float]
    ellipses: dict[int, ConnectivityEllipse]
    violations: int
    relations: int


def one_hop_connectivity_error(
    physical: dict, estimated: dict, comm_radius: float
) -> ConnectivityErrorResult:
    """Fraction of physical one-hop relations violated by the estimated map.

    Reference lines run through the physical centroid along each coordinate
    axis (two lines in 2D, three in 3D). The extreme nodes inside a
    half-radius band around each line define the line's image, whose
    direction and per-node stretch set the ellipse axes. Stretch ratios are
    shrunk toward the global median with a half-radius regularizer so nodes
    sitting on a reference line stay well conditioned; the regularizer
    scales with the map, which keeps the metric invariant under similarity
    transforms of the estimated frame.
    """
    ids, P, T = _paired_arrays(physical, estimated)
    n = len(ids)
    planar = np.allclose(P[:, 2], P[0, 2]) and np.allclose(T[:, 2], T[0, 2])
    dims = 2 if planar else 3
    P = P[:, :dims]
    T = T[:, :dims]
    centroid = P.mean(axis=0)

    directions = []
    phys_dist = np.zeros((n, dims))
    topo_dist = np.zeros((n, dims))
    for a in range(dims):
        perp = np.delete(P - centroid, a, axis=1)
        band = np.linalg.norm(perp, axis=1) <= comm_radius / 2.0
        if band.sum() < 2:
            band = np.ones(n, dtype=bool)
        cand = np.nonzero(band)[0]
        hi_node = cand[np.argmax(P[cand, a])]
        lo_node = cand[np.argmin(P[cand, a])]
        chord = P[hi_node] - P[lo_node]
        chord_norm = np.linalg.norm(chord)
        if chord_norm < 1e-12:
            raise MetricUndefinedError(f"reference line for axis {a} has zero length")
        image = T[hi_node] - T[lo_node]
        norm = np.linalg.norm(image)
        if norm < 1e-12:
            raise MetricUndefinedError(f"image line for axis {a} has zero length")
        u = image / norm
        directions.append(u)
        # perpendicular distances to the line through the reference nodes and
        # to its image; the same node pair anchors both, so an undistorted
        # map gives identical distances
        w = chord / chord_norm
        rel_p = P - P[lo_node]
        proj_p = rel_p @ w
        phys_dist[:, a] = np.linalg.norm(rel_p - np.outer(proj_p, w), axis=1)
        rel_t = T - T[lo_node]
        proj = rel_t @ u
        topo_dist[:, a] = np.linalg.norm(rel_t - np.outer(proj, u), axis=1)

    # global stretch scale from well-conditioned nodes
    good = phys_dist > 0.25 * comm_radius
    if good.any():
        global_scale = float(np.median(topo_dist[good] / phys_dist[good]))
    else:
        global_scale = 1.0
    if global_scale <= 0:
        global_scale = 1.0
    lam = comm_radius / 2.0
    ratios = (topo_dist + lam * global_scale) / (phys_dist + lam)
    axes = np.maximum(ratios * comm_radius, 1e-12)

    # ellipse frame: the first image direction plus Gram-Schmidt completions
    # of the others; an orthonormal frame keeps the test exact on identity
    # maps even when the image chords come out skewed. Chords that collapse
    # onto an earlier direction (coarse grids can do that) are replaced by a
    # perpendicular completion rather than failing the whole metric.
    frame: list[np.ndarray] = []
    for u in directions:
        v = u.copy()
        for e in frame:
            v = v - (v @ e) * e
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            basis = np.stack(frame, axis=0)
            _, _, vt = np.linalg.svd(basis)
            v = vt[len(frame)]
            norm = 1.0
        frame.append(v / norm)
    inv_basis = np.stack(frame, axis=0)  # orthonormal: inverse is transpose

    d2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
    adjacency = (d2 <= comm_radius**2 + 1e-12) & ~np.eye(n, dtype=bool)

    violations = 0
    relations = 0
    per_node_ratio = {}
    ellipses = {}
    for i in range(n):
        nbrs = np.nonzero(adjacency[i])[0]
        relations += len(nbrs)
        e_i = 0
        for j in nbrs:
            comps = inv_basis @ (T[j] - T[i])
            if float(np.sum((comps / axes[i]) ** 2)) > 1.0 + 1e-9:
                e_i += 1
        violations += e_i
        per_node_ratio[ids[i]] = e_i / len(nbrs) if len(nbrs) else 0.0
        ellipses[ids[i]] = ConnectivityEllipse(
            tuple(float(x) for x in axes[i]),
            tuple(tuple(float(c) for c in u) for u in frame),
        )

    total = 100.0 * violations / relations if relations else 0.0
    return ConnectivityErrorResult(total, per_node_ratio, ellipses, violations, relations)


def distance_error_stats(
    physical: dict, estimated: dict, align: "AlignmentTransform | bool | None" = None
):
    """Per-node position errors: (mean, variance, sorted samples).

    ``align=True`` fits and applies the similarity alignment first; an
    explicit :class:`AlignmentTransform` is applied as given.
    """
    ids, P, T = _paired_arrays(physical, estimated)
    planar = np.allclose(P[:, 2], P[0, 2]) and np.allclose(T[:, 2], T[0, 2])
    dims = 2 if planar else 3
    P = P[:, :dims]
    T = T[:, :dims]
    if align is True:
        align = procrustes_fit(T, P)
    if isinstance(align, AlignmentTransform):
        T = apply_alignment(align, T)
    err = np.linalg.norm(P - T, axis=1)
    return float(err.mean()), float(err.var()), np.sort(err)


def _sector_index(dx: float, dy: float, num_sectors: int) -> int:
    az = math.atan2(dy, dx) % (2 * math.pi)
    return int(az // (2 * math.pi / num_sectors)) % num_sectors


def sector_displacement(
    physical: dict, estimated: dict, num_sectors: int, comm_radius: float
) -> dict[int, int]:
    """Histogram of wrapped sector-index differences over neighbor pairs.

    For every ordered physical one-hop pair, compare the sector the neighbor
    truly lies in against the sector its estimate implies; differences wrap
    so the displacement lies in [0, num_sectors / 2].
    """
    if num_sectors % 2:
        raise ValueError("sector displacement needs an even sector count")
    ids, P, T = _paired_arrays(physical, estimated)
    n = len(ids)
    d2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
    adjacency = (d2 <= comm_radius**2 + 1e-12) & ~np.eye(n, dtype=bool)
    hist = {k: 0 for k in range(num_sectors // 2 + 1)}
    for i in range(n):
        for j in np.nonzero(adjacency[i])[0]:
            s_true = _sector_index(P[j, 0] - P[i, 0], P[j, 1] - P[i, 1], num_sectors)
            s_est = _sector_index(T[j, 0] - T[i, 0], T[j, 1] - T[i, 1], num_sectors)
            diff = abs(s_true - s_est)
            hist[min(diff, num_sectors - diff)] += 1
    return hist


@dataclass(frozen=True)
class AlignmentTransform:
    """Similarity map between frames: Y ~ scale * X @ rotation + shift."""

    scale: float
    rotation: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        eye = self.rotation.T @ self.rotation
        if not np.allclose(eye, np.eye(len(eye)), atol=1e-9):
            raise ValueError("rotation must be orthogonal")


def procrustes_fit(X: np.ndarray, Y: np.ndarray) -> AlignmentTransform:
    """Least-squares similarity transform taking point set X onto Y.

    Solves min over (b, T, c) of ||Y - (b X T + c)||^2 with T orthogonal
    (reflections allowed: estimated maps can come out mirrored).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or len(X) < 2:
        raise DegenerateGeometryError("need two equal-size point sets of >= 2 points")
    mx = X.mean(axis=0)
    my = Y.mean(axis=0)
    Xc = X - mx
    Yc = Y - my
    norm_x = float(np.sum(Xc**2))
    if norm_x < 1e-24:
        raise DegenerateGeometryError("all source points coincide")
    U, sing, Vt = np.linalg.svd(Xc.T @ Yc)
    T = U @ Vt
    b = float(np.sum(sing) / norm_x)
    c = my - b * mx @ T
    return AlignmentTransform(scale=b, rotation=T, shift=c)


def apply_alignment(t: AlignmentTransform, X: np.ndarray) -> np.ndarray:
    return t.scale * np.asarray(X, dtype=float) @ t.rotation + t.shift


@dataclass(frozen=True)
class EnergyCounts:
    """Packet counts feeding one algorithm's transceiver-energy formula.

    Only the counts the named algorithm's formula uses need to be set.
    """

    algorithm: str  # mltm | rssi | tpm | mmtm | dmmtm_ss | dmmtm_hs
    e_tx: float  # joules per transmitted packet
    e_rx: float = 0.0  # joules per received packet
    num_nodes: int | None = None  # N
    num_samples: int | None = None  # n, dwell count
    num_anchors: int | None = None  # M / N_A
    neighbor_anchors: int | None = None  # m
    packets_to_neighbors: int | None = None  # p
    packets_from_neighbors: int | None = None  # q
    sectors: int | None = None  # s
    avg_samples: float | None = None  # mean sweeps heard per node

    def __post_init__(self):
        for name in (
            "num_nodes", "num_samples", "num_anchors", "neighbor_anchors",
            "packets_to_neighbors", "packets_from_neighbors", "sectors",
        ):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")


def energy_estimate(counts: EnergyCounts) -> float:
    """Total transceiver energy in joules for the named algorithm."""

    def need(name):
        v = getattr(counts, name)
        if v is None:
            raise MissingCountError(name, counts.algorithm)
        return v

    a = counts.algorithm
    if a == "mltm":
        return need("num_nodes") * need("num_samples") * counts.e_tx
    if a == "rssi":
        N, M, m = need("num_nodes"), need("num_anchors"), need("neighbor_anchors")
        return M * counts.e_tx + (N - M) * m * counts.e_rx
    if a == "tpm":
        N, M = need("num_nodes"), need("num_anchors")
        p, q = need("packets_to_neighbors"), need("packets_from_neighbors")
        return N * M * (p * counts.e_tx + q * counts.e_rx)
    if a == "mmtm":
        N, nbar, s = need("num_nodes"), need("avg_samples"), need("sectors")
        return N * (nbar * counts.e_rx + nbar * s * counts.e_tx)
    if a == "dmmtm_ss":
        N, NA = need("num_nodes"), need("num_anchors")
        s, m = need("sectors"), need("neighbor_anchors")
        return 2 * NA * s * counts.e_tx + (N + NA) * m * counts.e_rx
    if a == "dmmtm_hs":
        N, NA = need("num_nodes"), need("num_anchors")
        s, m = need("sectors"), need("neighbor_anchors")
        nbar = need("avg_samples")
        static = 2 * NA * s * counts.e_tx + (N + NA) * m * counts.e_rx
        return static + N * (nbar * counts.e_rx + nbar * s * counts.e_tx)
    raise ValueError(f"unknown algorithm tag {a!r}")
