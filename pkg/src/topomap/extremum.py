"""Gradient-free level-set seeking with a unicycle robot.

The environmental field is a sum of radial sources sampled by the sensor
network. The robot steers with a bang-bang turn-rate law on the surface
s = d_dot + sat(d - d0): full turn one way or the other depending on the
sign, which slides the robot onto the desired field level and holds it
there. Field value and position both come from power-weighted neighbor
replies; no gradients and no physical distances are estimated. On reaching
the level around a removable source the source is extinguished and, after
its residue fades, the pursuit continues toward the remaining sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import NetworkScenario, TopologyCoordinate, seeded_rng
from .errors import IsolatedRobotError
from .propagation import field_noise_sigma, make_channel

__all__ = [
    "FieldSource",
    "FieldModel",
    "NavigationParams",
    "NavigationState",
    "SeekTrace",
    "estimate_position_and_field",
    "control_step",
    "integrate_kinematics",
    "run_seek",
    "export_seek_csv",
    "export_field_csv",
]

SIGN_ZERO_BAND = 1e-12


@dataclass
class FieldSource:
    center: tuple[float, float]
    amplitude: float
    spread: float
    removable: bool = True
    removed_at: float | None = None

    def __post_init__(self):
        if self.amplitude <= 0 or self.spread <= 0:
            raise ValueError("amplitude and spread must be positive")

    def contribution(self, x, y) -> float:
        dx = x - self.center[0]
        dy = y - self.center[1]
        return self.amplitude * math.exp(-(dx * dx + dy * dy) / self.spread)


@dataclass
class FieldModel:
    """Sum of radial sources; removed sources keep contributing until their
    residue fades."""

    sources: list[FieldSource]
    fade_time: float = 0.0

    def active_sources(self, t: float | None = None):
        for s in self.sources:
            if s.removed_at is None or t is None or t < s.removed_at + self.fade_time:
                yield s

    def value(self, x: float, y: float, t: float | None = None) -> float:
        return float(sum(s.contribution(x, y) for s in self.active_sources(t)))

    def remove_nearest(self, x: float, y: float, t: float) -> int | None:
        """Extinguish the nearest still-removable source; returns its index."""
        best = None
        for i, s in enumerate(self.sources):
            if not s.removable or s.removed_at is not None:
                continue
            d = math.hypot(x - s.center[0], y - s.center[1])
            if best is None or d < best[0]:
                best = (d, i)
        if best is None:
            return None
        self.sources[best[1]].removed_at = t
        return best[1]

    def any_active(self, t: float) -> bool:
        return any(True for _ in self.active_sources(t))


@dataclass(frozen=True)
class NavigationParams:
    speed: float = 0.5  # units per second
    omega_max: float = 1.0  # rad/s
    gain: float = 1.0
    saturation: float = 0.1
    target_level: float = 9.0
    control_period: float = 0.5

    def __post_init__(self):
        if min(self.speed, self.omega_max, self.gain, self.saturation) <= 0:
            raise ValueError("speed, omega_max, gain, and saturation must be positive")


@dataclass(frozen=True)
class NavigationState:
    x: float
    y: float
    heading: float  # wrapped to (-pi, pi]
    level: float | None = None  # latest field estimate
    level_rate: float | None = None  # backward difference of the estimate

    def __post_init__(self):
        if not (-math.pi < self.heading <= math.pi + 1e-12):
            object.__setattr__(
                self, "heading", math.remainder(self.heading, 2 * math.pi)
            )


def estimate_position_and_field(
    neighbor_coords, readings, weights
) -> tuple[TopologyCoordinate, float]:
    """Power-weighted averages of neighbor coordinates and readings.

    Both outputs are convex combinations, so the field estimate always lies
    within the range of the contributing readings.
    """
    pts = [
        c.as_array() if hasattr(c, "as_array") else np.asarray(c, float)
        for c in neighbor_coords
    ]
    w = np.asarray(weights, dtype=float)
    r = np.asarray(readings, dtype=float)
    if len(pts) == 0 or w.sum() <= 0:
        raise IsolatedRobotError("no neighbor replies")
    w = w / w.sum()
    mean = (np.asarray(pts) * w[:, None]).sum(axis=0)
    level = float((r * w).sum())
    return TopologyCoordinate(*np.pad(mean, (0, 3 - len(mean)))), level


def _sgn(a: float) -> float:
    if abs(a) < SIGN_ZERO_BAND:
        return 0.0
    return 1.0 if a > 0 else -1.0


def control_step(state: NavigationState, params: NavigationParams) -> float:
    """Turn rate from the sliding surface on the level error.

    The saturated error term is gain * e inside the saturation band and
    gain * saturation * sign(e) outside; the commanded turn rate is
    +-omega_max by the sign of level_rate plus that term (zero exactly on
    the surface).
    """
    if state.level is None or state.level_rate is None:
        raise ValueError("state needs level and level_rate estimates")
    e = state.level - params.target_level
    if abs(e) <= params.saturation:
        sat = params.gain * e
    else:
        sat = params.gain * params.saturation * _sgn(e)
    return _sgn(state.level_rate + sat) * params.omega_max


def integrate_kinematics(
    state: NavigationState, omega: float, dt: float, speed: float
) -> NavigationState:
    """Exact unicycle arc over one control period.

    Straight segment for zero turn rate, otherwise a circular arc of radius
    speed / omega; either way the path length is exactly speed * dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    th = state.heading
    if abs(omega) < 1e-15:
        x = state.x + speed * dt * math.cos(th)
        y = state.y + speed * dt * math.sin(th)
        new_heading = th
    else:
        r = speed / omega
        new_heading = th + omega * dt
        x = state.x + r * (math.sin(new_heading) - math.sin(th))
        y = state.y - r * (math.cos(new_heading) - math.cos(th))
    wrapped = math.remainder(new_heading, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return replace(state, x=x, y=y, heading=wrapped)


@dataclass
class SeekTrace:
    """Rows: (t, x, y, heading, level estimate, omega, true field value).

    ``reached_level_at`` is the first time the robot's true field value
    enters the arrival band (the estimate drives the steering; arrival is a
    physical event). ``arc_to_level`` is the path length walked up to that
    moment.
    """

    rows: list
    reached_level_at: float | None
    removals: list  # (t, source index)
    arc_length: float
    arc_to_level: float | None

    def levels(self) -> np.ndarray:
        return np.array([r[4] for r in self.rows])

    def true_levels(self) -> np.ndarray:
        return np.array([r[6] for r in self.rows])


def export_seek_csv(trace: SeekTrace, path) -> None:
    lines = ["t,x,y,theta,d,omega,d_true"]
    for row in trace.rows:
        lines.append(",".join(f"{v:.6f}" for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def export_field_csv(field_model: FieldModel, bounds, path, step: float = 1.0,
                     t: float | None = None) -> None:
    """Field samples on a grid for plotting level curves."""
    lo, hi = bounds
    lines = ["x,y,d"]
    for y in np.arange(lo[1], hi[1] + 1e-9, step):
        for x in np.arange(lo[0], hi[0] + 1e-9, step):
            lines.append(f"{x:.3f},{y:.3f},{field_model.value(x, y, t):.6f}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def run_seek(
    scenario: NetworkScenario,
    field_model: FieldModel,
    params: NavigationParams,
    duration: float,
    start: tuple[float, float, float],
    snr_db: float = math.inf,
    topology: dict[int, TopologyCoordinate] | None = None,
    arrival_tolerance: float = 0.2,
    rng: np.random.Generator | None = None,
) -> SeekTrace:
    """Steer the robot onto the desired field level using network readings.

    Sensor errors are drawn fresh at every poll (sensors re-measure each
    reporting interval) with the noise level set by the requested ensemble
    SNR. Each control period the robot polls its neighborhood, forms
    weighted position/field estimates, differentiates the level estimate
    backward in time, applies the bang-bang law, and advances one exact arc.
    Reaching the level near a removable source extinguishes it; after the
    fade time the remaining sources define the field.
    """
    if rng is None:
        rng = seeded_rng(scenario.rng_seed, "seek")
    if topology is None:
        topology = {
            n.id: TopologyCoordinate(n.position.x, n.position.y)
            for n in scenario.nodes
        }
    channel = make_channel(scenario)

    positions = scenario.positions()
    sigma = field_noise_sigma(
        _SnapshotField(field_model, 0.0), positions, snr_db
    )

    state = NavigationState(start[0], start[1], start[2], None, None)
    rows = []
    removals = []
    reached_at = None
    arc = 0.0
    arc_to_level = None
    settle_until = -math.inf

    node_pos = scenario.positions()
    max_range = getattr(channel, "max_range", None)

    t = 0.0
    while t <= duration + 1e-9:
        robot_pos = np.array([state.x, state.y, 0.0])
        coords = []
        readings = []
        weights = []
        if max_range is None:
            candidates = range(len(scenario.nodes))
        else:
            dists = np.linalg.norm(node_pos - robot_pos, axis=1)
            candidates = np.nonzero(dists <= max_range)[0]
        for i in candidates:
            node = scenario.nodes[i]
            if node.id not in topology:
                continue
            d_phys = float(np.linalg.norm(node.position.as_array() - robot_pos))
            if d_phys < 1e-9:
                w = 1.0
            else:
                sample = channel.sample(node, robot_pos, rng)
                if not sample.received:
                    continue
                w = 10.0 ** ((sample.rx_power - sample.tx_power) / 10.0)
            noise = 0.0 if sigma == 0.0 else float(rng.normal(0.0, sigma))
            coords.append(topology[node.id])
            readings.append(
                field_model.value(node.position.x, node.position.y, t) + noise
            )
            weights.append(w)
        if coords:
            _, level = estimate_position_and_field(coords, readings, weights)
        else:
            level = state.level if state.level is not None else 0.0

        rate = 0.0 if state.level is None else (level - state.level) / params.control_period
        state = replace(state, level=level, level_rate=rate)

        # arrival and source removal are physical events at the robot
        true_level = field_model.value(state.x, state.y, t)
        if abs(true_level - params.target_level) < arrival_tolerance:
            if reached_at is None:
                reached_at = t
                arc_to_level = arc
            if t >= settle_until and field_model.any_active(t):
                removed = field_model.remove_nearest(state.x, state.y, t)
                if removed is not None:
                    removals.append((t, removed))
                    settle_until = t + field_model.fade_time

        omega = control_step(state, params)
        rows.append((t, state.x, state.y, state.heading, level, omega, true_level))
        state = integrate_kinematics(state, omega, params.control_period, params.speed)
        arc += params.speed * params.control_period
        t += params.control_period

    return SeekTrace(
        rows=rows,
        reached_level_at=reached_at,
        removals=removals,
        arc_length=arc,
        arc_to_level=arc_to_level,
    )


class _SnapshotField:
    """Freeze the field at one instant for noise calibration."""

    def __init__(self, model: FieldModel, t: float):
        self.model = model
        self.t = t

    def value(self, x, y):
        return self.model.value(x, y, self.t)
