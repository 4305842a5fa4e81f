"""Decentralized target search on an estimated coordinate map.

Sensor nodes timestamp the moments a moving target passes within sensing
range. A pursuing robot repeatedly polls its local neighborhood for those
timestamp sets, fuses them into per-time target fixes, smooths the fixes
with an uncertainty-robust Kalman recursion, fits per-axis polynomial
motion curves, rebuilds them around the target's direction-change times to
extrapolate, and steps toward the predicted position over an eight-point
ring, avoiding obstacles. Distances all live in the map's coordinate frame;
no physical ranging is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import NetworkScenario, PhysicalPoint, TopologyCoordinate, seeded_rng
from .errors import (
    DegenerateGeometryError,
    IsolatedRobotError,
    NumericalFailureError,
    RobotTrappedError,
)
from .propagation import make_channel

__all__ = [
    "DetectionLog",
    "RkfParams",
    "TargetTrack",
    "TrajectoryCurve",
    "SearchTrace",
    "initial_detection",
    "robot_self_locate",
    "fuse_detection_points",
    "rkf_smooth",
    "estimate_curve_degree",
    "fit_axis_curve",
    "finalize_curve",
    "next_robot_state",
    "run_search",
    "export_trace_csv",
]


@dataclass
class DetectionLog:
    """Per-node ordered timestamps at which the node sensed the target."""

    timestamps: dict[int, list[float]] = field(default_factory=dict)

    def record(self, node_id: int, t: float) -> None:
        log = self.timestamps.setdefault(node_id, [])
        if log and t < log[-1]:
            raise ValueError("detection timestamps must be non-decreasing")
        log.append(t)

    def for_node(self, node_id: int) -> tuple[float, ...]:
        return tuple(self.timestamps.get(node_id, ()))


@dataclass(frozen=True)
class RkfParams:
    """Constant-velocity filter parameters with a norm-bounded uncertainty
    budget ``zeta`` on the velocity feed-through."""

    sampling_time: float = 1.0
    process_cov: np.ndarray | None = None  # 4x4 Q
    measurement_cov: np.ndarray | None = None  # 2x2 R
    zeta: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.zeta < 1.0):
            raise ValueError("zeta must lie in [0, 1)")

    @property
    def A(self) -> np.ndarray:
        t = self.sampling_time
        return np.array(
            [[1, 0, t, 0], [0, 1, 0, t], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float
        )

    @property
    def B(self) -> np.ndarray:
        t = self.sampling_time
        return np.array([[t, 0], [0, t], [0, 0], [0, 0]], dtype=float)

    @property
    def C(self) -> np.ndarray:
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)

    @property
    def K(self) -> np.ndarray:
        return np.array([[0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)

    def q_matrix(self) -> np.ndarray:
        if self.process_cov is not None:
            return np.asarray(self.process_cov, dtype=float)
        t = self.sampling_time
        # white-acceleration default
        q = 0.05
        B = self.B
        return q * (B @ B.T) + q * t * np.diag([0.0, 0.0, 1.0, 1.0])

    def r_matrix(self) -> np.ndarray:
        if self.measurement_cov is not None:
            return np.asarray(self.measurement_cov, dtype=float)
        return 0.25 * np.eye(2)


@dataclass
class TargetTrack:
    """Filtered target state history: (X, Y, Vx, Vy) per step."""

    states: np.ndarray  # (n, 4)
    covariances: np.ndarray  # (n, 4, 4)

    @property
    def state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def covariance(self) -> np.ndarray:
        return self.covariances[-1]


def _assert_positive_definite(P: np.ndarray, step: int) -> None:
    try:
        np.linalg.cholesky((P + P.T) / 2.0)
    except np.linalg.LinAlgError:
        raise NumericalFailureError(step, f"covariance not positive definite at step {step}")


def rkf_smooth(
    measurements: np.ndarray,
    params: RkfParams,
    x0: np.ndarray | None = None,
    p0: np.ndarray | None = None,
) -> TargetTrack:
    """Filter position fixes through the uncertainty-robust recursion.

    The mobility model lets the velocity feed through to the position with
    an unknown per-axis factor within ``1 +- zeta``. The recursion budgets
    for that by inflating the predicted covariance with an extra process
    term (zeta*t)^2/3 * diag(vx^2, vy^2) before the standard measurement
    update; the 1/3 is the second moment of a disturbance spread uniformly
    over the bound (the hard worst case over-smooths). Joseph form keeps the
    covariance symmetric. With zeta = 0 the recursion is exactly the
    standard Kalman filter.
    """
    z = np.atleast_2d(np.asarray(measurements, dtype=float))
    if z.shape[1] != 2:
        raise ValueError("measurements must be (n, 2) position fixes")
    if len(z) == 0:
        raise ValueError("need at least one measurement")
    A, B, C, K = params.A, params.B, params.C, params.K
    Q = params.q_matrix()
    R = params.r_matrix()
    t = params.sampling_time

    x = np.array([z[0, 0], z[0, 1], 0.0, 0.0]) if x0 is None else np.asarray(x0, float)
    P = np.diag([1.0, 1.0, 4.0, 4.0]) if p0 is None else np.asarray(p0, float)

    states = []
    covs = []
    eye = np.eye(4)
    for k, y in enumerate(z):
        if k > 0:
            x = A @ x
            spread = (params.zeta * t) ** 2 / 3.0 * np.diag(
                [x[2] ** 2, x[3] ** 2, 0.0, 0.0]
            )
            P = A @ P @ A.T + Q + spread
        S = C @ P @ C.T + R
        G = P @ C.T @ np.linalg.inv(S)
        x = x + G @ (y - C @ x)
        IKC = eye - G @ C
        P = IKC @ P @ IKC.T + G @ R @ G.T
        _assert_positive_definite(P, k)
        states.append(x.copy())
        covs.append(P.copy())
    return TargetTrack(np.array(states), np.array(covs))


def initial_detection(detector_coords) -> TopologyCoordinate:
    """Unweighted centroid of the nodes that sensed the target first."""
    pts = [c.as_array() if hasattr(c, "as_array") else np.asarray(c, float) for c in detector_coords]
    if not pts:
        raise ValueError("no detecting nodes")
    mean = np.mean(pts, axis=0)
    return TopologyCoordinate(*np.pad(mean, (0, 3 - len(mean))))


def robot_self_locate(neighbor_coords, weights) -> TopologyCoordinate:
    """Power-ratio weighted centroid of replying neighbors."""
    pts = [
        c.as_array() if hasattr(c, "as_array") else np.asarray(c, float)
        for c in neighbor_coords
    ]
    w = np.asarray(weights, dtype=float)
    if len(pts) == 0 or len(pts) != len(w):
        raise IsolatedRobotError("no neighbor replies to locate against")
    if w.sum() <= 0:
        raise IsolatedRobotError("neighbor weights are all zero")
    mean = (np.asarray(pts) * w[:, None]).sum(axis=0) / w.sum()
    return TopologyCoordinate(*np.pad(mean, (0, 3 - len(mean))))


def fuse_detection_points(
    new_coords_by_time: dict[float, list[np.ndarray]],
    prior: dict[float, tuple[np.ndarray, int]],
) -> dict[float, tuple[np.ndarray, int]]:
    """Running-average fusion of fresh detector coordinates with stored
    estimates, the prior weighted by how many nodes built it."""
    fused = dict(prior)
    for t, coords in new_coords_by_time.items():
        if not coords:
            continue
        total = np.sum([np.asarray(c, float)[:2] for c in coords], axis=0)
        count = len(coords)
        if t in fused:
            prev, n_prev = fused[t]
            total = total + np.asarray(prev, float)[:2] * n_prev
            count += n_prev
        fused[t] = (total / count, count)
    return fused


def estimate_curve_degree(positions, magnitude_guard: float = 1.0) -> int:
    """Count direction reversals whose latest move is large enough.

    A reversal at step k needs consecutive increments of opposite sign and
    the newest increment's magnitude above the guard, which suppresses
    jitter-scale zigzags.
    """
    x = np.asarray(positions, dtype=float)
    count = 0
    for k in range(2, len(x)):
        d1 = x[k] - x[k - 1]
        d0 = x[k - 1] - x[k - 2]
        if d1 * d0 < 0 and abs(d1) > magnitude_guard:
            count += 1
    return count


@dataclass(frozen=True)
class TrajectoryCurve:
    """One axis of the target's motion: the raw least-squares polynomial and
    the rebuilt final form a * prod(t - TD_i) + C."""

    axis: str
    degree: int
    coefficients: tuple[float, ...]  # raw a_0..a_p
    residual: float
    direction_change_times: tuple[float, ...] = ()
    mean_interval: float = 0.0
    scale: float = 1.0
    offset: float = 0.0

    def raw_value(self, t) -> np.ndarray | float:
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coefficients))

    def basis_value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for root in self.direction_change_times:
            out = out * (t - root)
        return out

    def final_value(self, t):
        return self.scale * self.basis_value(t) + self.offset


def fit_axis_curve(times, positions, degree: int, axis: str = "x") -> TrajectoryCurve:
    """Least-squares polynomial through (t, position) samples via the normal
    equations; the residual is the summed squared misfit."""
    t = np.asarray(times, dtype=float)
    x = np.asarray(positions, dtype=float)
    if len(t) < degree + 1:
        raise ValueError("need at least degree + 1 samples")
    powers = np.vander(t, degree + 1, increasing=True)  # columns t^0..t^p
    T = powers.T @ powers
    rhs = powers.T @ x
    if np.linalg.matrix_rank(T, tol=1e-9 * max(1.0, float(np.abs(T).max()))) < degree + 1:
        raise DegenerateGeometryError(
            "normal matrix is rank deficient (repeated times or degree too high)"
        )
    coeffs = np.linalg.solve(T, rhs)
    residual = float(np.sum((powers @ coeffs - x) ** 2))
    return TrajectoryCurve(axis, degree, tuple(coeffs.tolist()), residual)


def finalize_curve(
    raw: TrajectoryCurve,
    anchors: list[tuple[float, float]],
    t_start: float,
    t_end: float,
    extend: int = 2,
) -> TrajectoryCurve:
    """Rebuild the curve around direction-change times for extrapolation.

    Direction changes are the real roots of the raw derivative; the set is
    extended past the data by multiples of the mean same-direction interval.
    The rebuilt polynomial scale * prod(t - TD_i) + offset passes exactly
    through the two anchoring detections.
    """
    coeffs = np.asarray(raw.coefficients)
    roots: list[float] = []
    if len(coeffs) > 1:
        deriv = np.polynomial.polynomial.polyder(coeffs)
        if np.any(np.abs(deriv) > 0):
            for r in np.polynomial.polynomial.polyroots(deriv):
                if abs(r.imag) < 1e-9:
                    roots.append(float(r.real))
    roots.sort()
    inside = [r for r in roots if t_start <= r <= t_end]
    fence = [t_start] + inside + [t_end]
    gaps = [b - a for a, b in zip(fence, fence[1:]) if b > a]
    mean_interval = float(np.mean(gaps)) if gaps else max(t_end - t_start, 1.0)
    if mean_interval <= 0:
        mean_interval = max(t_end - t_start, 1.0)
    td = list(roots)
    for m in range(1, extend + 1):
        td.append(t_end + m * mean_interval)

    if len(anchors) < 2:
        raise DegenerateGeometryError("need two anchoring detections")
    (t1, x1), (t2, x2) = anchors[-2], anchors[-1]
    shell = TrajectoryCurve(
        raw.axis, raw.degree, raw.coefficients, raw.residual,
        tuple(td), mean_interval, 1.0, 0.0,
    )
    b1 = float(shell.basis_value(t1))
    b2 = float(shell.basis_value(t2))
    if abs(b1 - b2) < 1e-12:
        raise DegenerateGeometryError("anchoring detections leave the curve underdetermined")
    a = (x1 - x2) / (b1 - b2)
    c = x1 - a * b1
    return TrajectoryCurve(
        raw.axis, raw.degree, raw.coefficients, raw.residual,
        tuple(td), mean_interval, a, c,
    )


def next_robot_state(
    robot: TopologyCoordinate,
    target: TopologyCoordinate,
    obstacle_free,
    step: float,
) -> TopologyCoordinate:
    """Pick the cheapest of eight ring points around the robot.

    Cost is the uniform move cost plus straight-line distance from the
    candidate to the predicted target; blocked candidates are skipped and
    ties break to the smallest ring index.
    """
    best = None
    for k in range(1, 9):
        ang = (k - 1) * math.pi / 4.0
        cand = TopologyCoordinate(
            robot.x + step * math.cos(ang), robot.y + step * math.sin(ang), robot.z
        )
        if not obstacle_free(cand):
            continue
        cost = step + math.hypot(cand.x - target.x, cand.y - target.y)
        if best is None or cost < best[0] - 1e-12:
            best = (cost, k, cand)
    if best is None:
        raise RobotTrappedError("all eight candidate moves are blocked")
    return best[2]


# --------------------------------------------------------------------------
# full search loop


@dataclass
class SearchTrace:
    """Per-step record of the pursuit."""

    rows: list  # (t, robot_x, robot_y, pred_x, pred_y, true_x, true_y, e_pr)
    captured: bool
    capture_time: float | None


def export_trace_csv(trace: SearchTrace, path) -> None:
    lines = ["t,robot_x,robot_y,pred_x,pred_y,target_x,target_y,e_pr"]
    for row in trace.rows:
        lines.append(",".join(f"{v:.6f}" for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _power_weight(prx_dbm: float, ptx_dbm: float) -> float:
    return 10.0 ** ((prx_dbm - ptx_dbm) / 10.0)


def run_search(
    scenario: NetworkScenario,
    topology: dict[int, TopologyCoordinate],
    target_script,
    duration: float,
    robot_start: TopologyCoordinate,
    robot_speed: float = 2.0,
    head_start: float = 5.0,
    sensing_radius: float = 2.0,
    capture_radius: float | None = None,
    epsilon: float | None = None,
    rkf_params: RkfParams | None = None,
    rng: np.random.Generator | None = None,
) -> SearchTrace:
    """Pursue a scripted target using only node timestamps and map coords.

    ``target_script(t)`` gives the target's true position while t is inside
    [0, duration]; the robot starts after ``head_start``. The map is assumed
    co-registered with the deployment frame (survey-built maps are), so the
    robot's map coordinate doubles as its physical position for link and
    capture checks.
    """
    if capture_radius is None:
        capture_radius = robot_speed
    if epsilon is None:
        epsilon = robot_speed / 4.0
    if rkf_params is None:
        rkf_params = RkfParams(sampling_time=1.0)
    if rng is None:
        rng = seeded_rng(scenario.rng_seed, "search")
    channel = make_channel(scenario)

    nodes = {n.id: n for n in scenario.nodes}
    log = DetectionLog()
    fused: dict[float, tuple[np.ndarray, int]] = {}
    known_detections: dict[int, set[float]] = {i: set() for i in nodes}

    # the robot's true position integrates the commanded steps; the map fix
    # from neighbor replies only steers the next-step choice
    robot_phys = robot_start.as_array()
    robot_est = robot_start
    rows = []
    captured = False
    capture_time = None
    entry_point: np.ndarray | None = None  # sink-reported first fix

    for t in np.arange(0.0, duration + 1e-9, rkf_params.sampling_time):
        target_pos = np.asarray(target_script(t), dtype=float)
        # nodes sense the target within range
        first_detectors = []
        for node in scenario.nodes:
            if (
                math.hypot(
                    node.position.x - target_pos[0], node.position.y - target_pos[1]
                )
                <= sensing_radius
            ):
                log.record(node.id, float(t))
                if entry_point is None and node.id in topology:
                    first_detectors.append(topology[node.id])
        if entry_point is None and first_detectors:
            entry_point = initial_detection(first_detectors).as_array()[:2]
        if t < head_start:
            continue

        # poll the neighborhood: nodes whose packets arrive and whose map
        # coordinates lie within the polling radius
        replies = []
        node_pos_all = scenario.positions()
        max_range = getattr(channel, "max_range", None)
        if max_range is None:
            candidates = scenario.nodes
        else:
            near = np.linalg.norm(node_pos_all - robot_phys, axis=1) <= max_range
            candidates = [scenario.nodes[i] for i in np.nonzero(near)[0]]
        for node in candidates:
            if node.id not in topology:
                continue
            d_phys = np.linalg.norm(node.position.as_array() - robot_phys)
            if d_phys < 1e-9:
                # robot parked on a node (its own fix can coincide with a
                # neighbor's coordinate): trivially heard at full power
                weight_sample = None
            else:
                weight_sample = channel.sample(node, robot_phys, rng)
                if not weight_sample.received:
                    continue
            coord = topology[node.id]
            d_map = math.hypot(coord.x - robot_phys[0], coord.y - robot_phys[1])
            replies.append((node, coord, weight_sample, d_map))
        polling = [r for r in replies if r[3] <= robot_speed + epsilon]
        if not polling:
            polling = replies  # widen rather than stall when locally isolated
        if polling:
            coords = [c for _, c, _, _ in polling]
            weights = [
                1.0 if s is None else _power_weight(s.rx_power, s.tx_power)
                for _, _, s, _ in polling
            ]
            if not all(math.isfinite(w) for w in weights):
                weights = [1.0] * len(coords)
            robot_est = robot_self_locate(coords, weights)
        else:
            robot_est = TopologyCoordinate(*robot_phys)

        # gather fresh timestamps from every heard node
        new_by_time: dict[float, list[np.ndarray]] = {}
        for node, coord, _, _ in replies:
            for ts in log.for_node(node.id):
                if ts in known_detections[node.id]:
                    continue
                known_detections[node.id].add(ts)
                new_by_time.setdefault(ts, []).append(coord.as_array()[:2])
        fused = fuse_detection_points(new_by_time, fused)

        predicted = None
        if fused:
            times = np.array(sorted(fused))
            points = np.array([fused[tt][0] for tt in times])
            if len(times) >= 3:
                track = rkf_smooth(points, rkf_params).states[:, :2]
                anchors_x = list(zip(times[-2:], points[-2:, 0]))
                anchors_y = list(zip(times[-2:], points[-2:, 1]))
                try:
                    deg_x = max(estimate_curve_degree(track[:, 0]), 1)
                    deg_y = max(estimate_curve_degree(track[:, 1]), 1)
                    raw_x = fit_axis_curve(times, track[:, 0], min(deg_x, len(times) - 1), "x")
                    raw_y = fit_axis_curve(times, track[:, 1], min(deg_y, len(times) - 1), "y")
                    fin_x = finalize_curve(raw_x, anchors_x, times[0], times[-1])
                    fin_y = finalize_curve(raw_y, anchors_y, times[0], times[-1])
                    predicted = np.array(
                        [float(fin_x.final_value(t)), float(fin_y.final_value(t))]
                    )
                except DegenerateGeometryError:
                    predicted = points[-1]
            else:
                predicted = points[-1]
        if predicted is None and entry_point is not None:
            # nothing heard locally yet: head for the sink-reported entry fix
            predicted = entry_point
        if predicted is None:
            rows.append(
                (t, robot_phys[0], robot_phys[1], math.nan, math.nan,
                 target_pos[0], target_pos[1], math.nan)
            )
            continue

        e_pr = math.hypot(predicted[0] - target_pos[0], predicted[1] - target_pos[1])
        rows.append(
            (t, robot_phys[0], robot_phys[1], predicted[0], predicted[1],
             target_pos[0], target_pos[1], e_pr)
        )

        def obstacle_free(c: TopologyCoordinate) -> bool:
            # the step is checked where it will actually be walked
            delta = c.as_array() - robot_est.as_array()
            p = PhysicalPoint(*(robot_phys + delta))
            return not any(ob.contains(p) for ob in scenario.obstacles)

        chosen = next_robot_state(
            robot_est, TopologyCoordinate(predicted[0], predicted[1]),
            obstacle_free, robot_speed,
        )
        robot_phys = robot_phys + (chosen.as_array() - robot_est.as_array())
        if math.hypot(robot_phys[0] - target_pos[0], robot_phys[1] - target_pos[1]) <= capture_radius:
            captured = True
            capture_time = float(t)
            break

    return SearchTrace(rows=rows, captured=captured, capture_time=capture_time)
