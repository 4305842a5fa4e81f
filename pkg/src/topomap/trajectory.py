"""Survey paths for the mapping robot.

The workhorse is an online serpentine ("S"-shape) planner that needs no map:
it climbs a lane until its obstacle sensor fires or it stops hearing nodes,
sidesteps one lane over, reverses, and keeps a registry of obstacle contacts
so it can come back around and cover the shadowed region behind each one. It
terminates once every node has been heard a required number of times.

Reference paths used for comparisons (random walk, inward spiral, Hilbert
curve) are offline waypoint lists. Antenna setups describe how a sectored
receiver covers 3D space from a planar path: fixed-elevation stacked arrays,
a vertical sweep with a packet-keep constant, or flat sectors for a path
that itself covers the vertical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import NetworkScenario, PhysicalPoint, seeded_rng
from .errors import CoverageError

__all__ = [
    "RobotPose",
    "TrajectoryPlan",
    "OmniAntenna",
    "VerticalArrayAntenna",
    "VerticalSweepAntenna",
    "PlanarSectorAntenna",
    "SShapePlanner",
    "ScriptedPlanner",
    "plan_s_shape",
    "plan_reference",
    "make_sense_fn",
    "antenna_observation",
    "export_trajectory_csv",
]


@dataclass(frozen=True)
class RobotPose:
    position: PhysicalPoint
    heading: float  # radians, counter-clockwise from +x
    timestamp: float  # seconds


@dataclass(frozen=True)
class OmniAntenna:
    """Omnidirectional receiver (RF mapping)."""


@dataclass(frozen=True)
class VerticalArrayAntenna:
    """Stacked sector arrays at fixed elevation angles (one array each)."""

    elevations: tuple[float, ...]


@dataclass(frozen=True)
class VerticalSweepAntenna:
    """Sectors swept in elevation; a packet is kept only when a uniform draw
    exceeds ``keep_constant`` (sweep misalignment loss)."""

    sweep_min: float = 0.0
    sweep_max: float = math.pi / 2
    keep_constant: float = 0.6

    def __post_init__(self):
        if not (0.0 < self.keep_constant < 1.0):
            raise ValueError("keep_constant must lie in (0, 1)")


@dataclass(frozen=True)
class PlanarSectorAntenna:
    """Zero-elevation sectors; vertical coverage comes from the path itself."""


AntennaSetup = OmniAntenna | VerticalArrayAntenna | VerticalSweepAntenna | PlanarSectorAntenna


@dataclass(frozen=True)
class TrajectoryPlan:
    """A precomputed waypoint list."""

    waypoints: tuple[RobotPose, ...]
    speed: float
    antenna_setup: AntennaSetup = OmniAntenna()

    def positions(self) -> np.ndarray:
        return np.array([w.position.as_array() for w in self.waypoints])

    def as_planner(self) -> "ScriptedPlanner":
        return ScriptedPlanner(self.waypoints)


# --------------------------------------------------------------------------
# sensing


def make_sense_fn(scenario: NetworkScenario, margin: float = 1e-9):
    """Ideal one-step ray sensor over the scenario's obstacles and bounds.

    Returns ``sense(position, direction, distance)`` -> None | "obstacle" |
    "bounds" for the first blocker within ``distance``.
    """
    lo, hi = scenario.bounds

    def sense(position: np.ndarray, direction: np.ndarray, distance: float):
        target = np.asarray(position, dtype=float) + np.asarray(direction) * distance
        probe = PhysicalPoint(*target)
        for ob in scenario.obstacles:
            if ob.contains(probe, margin=margin):
                return "obstacle"
        if not all(a - margin <= v <= b + margin for v, a, b in zip(target, lo, hi)):
            return "bounds"
        return None

    return sense


# --------------------------------------------------------------------------
# planners


class ScriptedPlanner:
    """Replays a fixed pose list, ignoring observations."""

    def __init__(self, waypoints):
        self._waypoints = list(waypoints)
        self._i = 0

    def start(self) -> RobotPose:
        self._i = 1
        return self._waypoints[0]

    def advance(self, heard_ids) -> RobotPose | None:
        if self._i >= len(self._waypoints):
            return None
        pose = self._waypoints[self._i]
        self._i += 1
        return pose


class SShapePlanner:
    """Online serpentine coverage with obstacle registry and detour.

    The planner knows only the node count, its own pose, a one-step obstacle
    sensor, and which nodes it heard at the previous dwell. Lanes run along
    ``lane_axis`` (default y; z for the vertical-plane variant); sidesteps
    run along ``transit_axis``. In three dimensions a third axis indexes
    parallel sweep planes visited in sequence.

    Termination: every node heard at least ``packets_required`` times. If a
    full sweep ends early the sweep direction reverses and coverage repeats;
    the step budget bounds the total walk.
    """

    def __init__(
        self,
        start: PhysicalPoint,
        sense_fn,
        num_nodes: int,
        lane_spacing: float,
        speed: float = 1.0,
        timestep: float = 1.0,
        packets_required: int = 5,
        max_steps: int = 20_000,
        dimensionality: int = 2,
        plane_spacing: float | None = None,
        turn_on_silence: bool | None = None,
        finish_on_budget: bool = False,
    ):
        self.sense = sense_fn
        self.num_nodes = num_nodes
        self.lane_spacing = lane_spacing
        self.speed = speed
        self.timestep = timestep
        self.step_len = speed * timestep
        self.packets_required = packets_required
        self.max_steps = max_steps
        self.dimensionality = dimensionality
        self.plane_spacing = plane_spacing or lane_spacing
        # planar sweeps learn the network edge from silence; the vertical
        # variant turns only at obstacles and ceiling/floor
        if turn_on_silence is None:
            turn_on_silence = dimensionality == 2
        self.turn_on_silence = turn_on_silence
        # survey-time-budget mode: stop cleanly instead of raising when the
        # quota cannot be met (nodes left short become unlocatable downstream)
        self.finish_on_budget = finish_on_budget

        # axis roles: planar sweeps move lanes along y and sidestep along x;
        # the 3D variant runs vertical lanes (z) in x-z planes stacked along y
        if dimensionality == 3:
            self._lane_ax, self._transit_ax, self._plane_ax = 2, 0, 1
        else:
            self._lane_ax, self._transit_ax, self._plane_ax = 1, 0, None

        self._pos = start.as_array()
        self._t = 0.0
        self._dir_sign = 1.0
        self._transit_sign = 1.0
        self._plane_sign = 1.0
        self._counts = np.zeros(num_nodes, dtype=int)
        self._steps = 0
        self._transit_left = 0.0
        self._plane_left = 0.0
        self._fwd_obstacles: list[np.ndarray] = []
        self._bwd_obstacles: list[np.ndarray] = []
        self._detour_target: float | None = None

    # -- protocol ----------------------------------------------------------

    def start(self) -> RobotPose:
        return self._pose()

    def advance(self, heard_ids) -> RobotPose | None:
        for i in heard_ids:
            self._counts[i] += 1
        if np.all(self._counts >= self.packets_required):
            return None
        if self._steps >= self.max_steps:
            if self.finish_on_budget:
                return None
            unheard = np.nonzero(self._counts < self.packets_required)[0]
            raise CoverageError(unheard.tolist())
        self._steps += 1
        self._step(bool(heard_ids))
        return self._pose()

    # -- mechanics ----------------------------------------------------------

    def _pose(self) -> RobotPose:
        return RobotPose(PhysicalPoint(*self._pos), self._heading(), self._t)

    def _heading(self) -> float:
        if self._detour_target is not None:
            return math.pi if self._transit_sign > 0 else 0.0
        if self._transit_left > 0:
            return 0.0 if self._transit_sign > 0 else math.pi
        return (math.pi / 2) * self._dir_sign if self._lane_ax == 1 else 0.0

    def _unit(self, axis: int, sign: float) -> np.ndarray:
        u = np.zeros(3)
        u[axis] = sign
        return u

    def _try_move(self, axis: int, sign: float, dist: float):
        hit = self.sense(self._pos, self._unit(axis, sign), dist)
        if hit is None:
            self._pos = self._pos + self._unit(axis, sign) * dist
        return hit

    def _step(self, heard_any: bool) -> None:
        L = self.step_len
        self._t += self.timestep

        # resume interrupted sidesteps / plane changes first
        if self._transit_left > 0:
            d = min(L, self._transit_left)
            hit = self._try_move(self._transit_ax, self._transit_sign, d)
            if hit == "bounds":
                self._on_sweep_edge()
            elif hit == "obstacle":
                self._transit_left = 0.0  # cut the sidestep short, keep going
            else:
                self._transit_left -= d
            return
        if self._plane_left > 0:
            d = min(L, self._plane_left)
            hit = self._try_move(self._plane_ax, self._plane_sign, d)
            if hit is None:
                self._plane_left -= d
            else:
                self._plane_left = 0.0
            return

        # detour back across covered lanes to sweep behind an obstacle
        if self._detour_target is not None:
            delta = self._detour_target - self._pos[self._transit_ax]
            sign = math.copysign(1.0, delta) if abs(delta) > 1e-9 else 0.0
            if sign == 0.0 or abs(delta) < 1e-9:
                self._detour_target = None
            else:
                d = min(L, abs(delta))
                hit = self._try_move(self._transit_ax, sign, d)
                if hit is not None or abs(self._detour_target - self._pos[self._transit_ax]) < 1e-9:
                    self._detour_target = None
                return
        self._maybe_start_detour()
        if self._detour_target is not None:
            return

        # lane motion
        hit = self.sense(self._pos, self._unit(self._lane_ax, self._dir_sign), L)
        if hit == "obstacle":
            self._register_obstacle()
            self._turn()
        elif hit == "bounds" or (self.turn_on_silence and not heard_any):
            self._turn()
        else:
            self._pos = self._pos + self._unit(self._lane_ax, self._dir_sign) * L

    def _turn(self) -> None:
        self._dir_sign = -self._dir_sign
        self._transit_left = self.lane_spacing
        # attempt the first increment immediately so the turn consumes a step
        d = min(self.step_len, self._transit_left)
        hit = self._try_move(self._transit_ax, self._transit_sign, d)
        if hit == "bounds":
            self._transit_left = 0.0
            self._on_sweep_edge()
        elif hit == "obstacle":
            self._transit_left = 0.0
        else:
            self._transit_left -= d

    def _on_sweep_edge(self) -> None:
        """The sidestep ran out of room: this sweep is done."""
        self._transit_left = 0.0
        if self.dimensionality == 3:
            hit = self.sense(
                self._pos, self._unit(self._plane_ax, self._plane_sign), self.plane_spacing
            )
            if hit is None:
                self._plane_left = self.plane_spacing
                # the fresh plane gets swept back the other way
                self._transit_sign = -self._transit_sign
                return
            # no more planes this way: come back through them
            self._plane_sign = -self._plane_sign
        # sweep back the other way until the packet quota is met
        self._transit_sign = -self._transit_sign

    def _register_obstacle(self) -> None:
        if self._dir_sign > 0:
            self._fwd_obstacles.append(self._pos.copy())
        else:
            self._bwd_obstacles.append(self._pos.copy())

    def _maybe_start_detour(self) -> None:
        registry = self._fwd_obstacles if self._dir_sign > 0 else self._bwd_obstacles
        if not registry:
            return
        mark = registry[0]
        passed = (
            self._pos[self._lane_ax] > mark[self._lane_ax]
            if self._dir_sign > 0
            else self._pos[self._lane_ax] < mark[self._lane_ax]
        )
        if not passed:
            return
        back = -self._transit_sign
        if self.sense(self._pos, self._unit(self._transit_ax, back), self.step_len) is not None:
            return
        self._detour_target = mark[self._transit_ax]
        registry.pop(0)


def plan_s_shape(
    scenario: NetworkScenario,
    lane_spacing: float | None = None,
    speed: float = 1.0,
    packets_required: int = 5,
    start: PhysicalPoint | None = None,
    max_steps: int = 20_000,
    dimensionality: int | None = None,
    plane_spacing: float | None = None,
    turn_on_silence: bool | None = None,
    finish_on_budget: bool = False,
) -> SShapePlanner:
    """Online serpentine planner for a scenario.

    The planner itself stays map-free: the scenario is used only to build its
    obstacle sensor and pick a start corner. Lane spacing defaults to the
    communication radius so every point lies within reception range of a lane.
    """
    if dimensionality is None:
        dimensionality = 2 if scenario.is_planar else 3
    lo, hi = scenario.bounds
    if start is None:
        eps = 1e-6
        z0 = lo[2] + eps if dimensionality == 3 else 0.0
        start = PhysicalPoint(lo[0] + eps, lo[1] + eps, z0)
    spacing = lane_spacing if lane_spacing is not None else scenario.environment.comm_radius
    return SShapePlanner(
        start=start,
        sense_fn=make_sense_fn(scenario),
        num_nodes=len(scenario.nodes),
        lane_spacing=spacing,
        speed=speed,
        packets_required=packets_required,
        max_steps=max_steps,
        dimensionality=dimensionality,
        plane_spacing=plane_spacing,
        turn_on_silence=turn_on_silence,
        finish_on_budget=finish_on_budget,
    )


# --------------------------------------------------------------------------
# reference paths


def plan_reference(kind: str, scenario: NetworkScenario, speed: float = 1.0,
                   steps: int | None = None, lane_spacing: float | None = None) -> TrajectoryPlan:
    """Deterministic comparison paths: random_walk, spiral, or hilbert."""
    lo, hi = scenario.bounds
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    spacing = lane_spacing if lane_spacing is not None else scenario.environment.comm_radius
    if kind == "random_walk":
        rng = seeded_rng(scenario.rng_seed, "trajectory.random_walk")
        n = steps or int(4 * (w * h) / max(spacing, 1.0))
        pos = np.array([lo[0] + w / 2, lo[1] + h / 2, 0.0])
        heading = float(rng.uniform(0, 2 * math.pi))
        poses = [RobotPose(PhysicalPoint(*pos), heading, 0.0)]
        for k in range(1, n):
            heading += float(rng.normal(0.0, 0.8))
            for _ in range(16):
                cand = pos + speed * np.array([math.cos(heading), math.sin(heading), 0.0])
                inside = lo[0] <= cand[0] <= hi[0] and lo[1] <= cand[1] <= hi[1]
                if inside and not any(
                    ob.contains(PhysicalPoint(*cand)) for ob in scenario.obstacles
                ):
                    break
                heading = float(rng.uniform(0, 2 * math.pi))
            else:
                cand = pos
            pos = cand
            poses.append(RobotPose(PhysicalPoint(*pos), heading % (2 * math.pi), float(k)))
        return TrajectoryPlan(tuple(poses), speed)

    if kind == "spiral":
        cx, cy = lo[0] + w / 2, lo[1] + h / 2
        r0 = min(w, h) / 2 - 1e-6
        pitch = spacing
        poses = []
        theta = 0.0
        r = r0
        t = 0.0
        while r > pitch / 4:
            x = cx + r * math.cos(theta)
            y = cy + r * math.sin(theta)
            poses.append(RobotPose(PhysicalPoint(x, y), (theta + math.pi / 2) % (2 * math.pi), t))
            dtheta = speed / max(r, pitch / 4)
            theta += dtheta
            r = r0 - pitch * theta / (2 * math.pi)
            t += 1.0
        return TrajectoryPlan(tuple(poses), speed)

    if kind == "hilbert":
        side = max(w, h)
        order = 1
        while side / (2**order) > scenario.environment.comm_radius:
            order += 1
        n_cells = 2**order
        cell = side / n_cells
        poses = []
        t = 0.0
        prev = None
        for d in range(n_cells * n_cells):
            x, y = _hilbert_d2xy(order, d)
            px = lo[0] + (x + 0.5) * cell
            py = lo[1] + (y + 0.5) * cell
            heading = 0.0
            if prev is not None:
                heading = math.atan2(py - prev[1], px - prev[0]) % (2 * math.pi)
                t += math.dist(prev, (px, py)) / speed
            poses.append(RobotPose(PhysicalPoint(px, py), heading, t))
            prev = (px, py)
        return TrajectoryPlan(tuple(poses), speed)

    raise ValueError(f"unknown reference path kind {kind!r}")


def _hilbert_d2xy(order: int, d: int) -> tuple[int, int]:
    """Cell index along the curve -> (x, y) cell coordinates."""
    x = y = 0
    t = d
    s = 1
    while s < 2**order:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x, y = s - 1 - x, s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


# --------------------------------------------------------------------------


def antenna_observation(setup, pose, node, robot_cfg, env, obstacles=(), rng=None):
    """One sector-sweep observation of a node under an antenna setup.

    Returns None when nothing was heard, else (received, best robot sector id).
    Thin wrapper over the sector-sweep exchange so path planning and antenna
    modeling stay in one place for callers working with plans.
    """
    from .mmtm import sls_exchange  # local import; exchange logic lives there

    result = sls_exchange(pose, robot_cfg, setup, node, env, obstacles, rng)
    if result is None:
        return None
    return True, result


def export_trajectory_csv(poses, path) -> None:
    """Write poses as ``t,x,y,z,heading`` with '.' decimals."""
    lines = ["t,x,y,z,heading"]
    for p in poses:
        lines.append(
            f"{p.timestamp:.6f},{p.position.x:.6f},{p.position.y:.6f},"
            f"{p.position.z:.6f},{p.heading:.6f}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
