"""Scenario construction: deployment templates, validation, and JSON files.

Templates cover the simulated deployments: regular and jittered grids,
random fills, a circular region with obstacles, a concave void, indoor 3D
volumes (warehouse with racks, open greenhouse), and 3D surface deployments
(cylindrical, spherical). Generation is deterministic for a fixed
(template, count, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityError
from .rng import seeded_rng
from .types import (
    ENVIRONMENT_PRESETS,
    MMWAVE_TX_POWER_DBM,
    RF_TX_POWER_DBM,
    EnvironmentProfile,
    NetworkScenario,
    Obstacle,
    PhysicalPoint,
    SectorConfig,
    SensorNode,
)

__all__ = [
    "ScenarioSpec",
    "generate_scenario",
    "validate_scenario",
    "ValidationReport",
    "scenario_to_json",
    "scenario_from_json",
    "TEMPLATES",
]

SCHEMA_VERSION = 1

# Templates where nodes carry sector antennas by default.
_MM_TEMPLATES = {"warehouse", "greenhouse"}

_DEFAULT_ENVIRONMENTS = {
    "grid": "suburban",
    "random": "suburban",
    "sparse_grid": "light_tree",
    "circular": "suburban",
    "concave_void": "suburban",
    "warehouse": "warehouse",
    "greenhouse": "greenhouse",
    "cylindrical": "suburban",
    "spherical": "suburban",
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to build one deployment deterministically."""

    template: str
    num_nodes: int
    seed: int
    environment: str | EnvironmentProfile | None = None
    size: tuple[float, ...] | None = None  # (W, H) or (W, H, D) meters
    min_spacing: float = 1.0  # minimum distance between adjacent nodes
    num_obstacles: int | None = None
    anchor_ratio: float = 0.0
    node_sectors: int | None = None
    vertical_beamwidth: float = math.pi / 4
    tx_power: float | None = None
    max_attempts: int = 200

    def resolved_environment(self) -> EnvironmentProfile:
        env = self.environment
        if env is None:
            env = _DEFAULT_ENVIRONMENTS.get(self.template, "suburban")
        if isinstance(env, str):
            return ENVIRONMENT_PRESETS[env]
        return env


@dataclass(frozen=True)
class ValidationReport:
    """Findings from checking a scenario's invariants. Empty means valid."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def generate_scenario(spec: ScenarioSpec) -> NetworkScenario:
    """Build the deployment described by ``spec``.

    Raises :class:`CapacityError` when rejection sampling cannot place the
    requested node count at the requested spacing within the attempt budget.
    """
    if spec.template not in TEMPLATES:
        raise ValueError(
            f"unknown template {spec.template!r}; choose one of {sorted(TEMPLATES)}"
        )
    env = spec.resolved_environment()
    positions, obstacles, bounds = TEMPLATES[spec.template](spec)

    tx = spec.tx_power
    if tx is None:
        tx = MMWAVE_TX_POWER_DBM if env.model_kind == "mmwave_ci" else RF_TX_POWER_DBM

    sectors = spec.node_sectors
    if sectors is None and spec.template in _MM_TEMPLATES:
        sectors = 8

    rng = seeded_rng(spec.seed, "scenario.orientation")
    nodes = []
    elevation_cycle = (0.0, spec.vertical_beamwidth / 2, -spec.vertical_beamwidth / 2)
    for i, p in enumerate(positions):
        cfg = None
        if sectors:
            offset = float(rng.uniform(0.0, 2.0 * math.pi / sectors))
            start = int(rng.integers(0, len(elevation_cycle)))
            cycle = elevation_cycle[start:] + elevation_cycle[:start]
            cfg = SectorConfig.uniform(
                sectors, spec.vertical_beamwidth, azimuth_offset=offset, elevations=cycle
            )
        nodes.append(
            SensorNode(
                id=i,
                position=PhysicalPoint(*np.round(p, 9)),
                transmit_power=tx,
                sector_config=cfg,
            )
        )

    if spec.anchor_ratio > 0:
        anchor_rng = seeded_rng(spec.seed, "scenario.anchors")
        n_anchors = max(1, int(round(spec.anchor_ratio * len(nodes))))
        chosen = set(anchor_rng.choice(len(nodes), size=n_anchors, replace=False).tolist())
        nodes = [
            SensorNode(n.id, n.position, n.transmit_power, n.sector_config, i in chosen)
            for i, n in enumerate(nodes)
        ]

    return NetworkScenario(
        nodes=tuple(nodes),
        obstacles=tuple(obstacles),
        environment=env,
        bounds=bounds,
        rng_seed=spec.seed,
    )


def validate_scenario(scenario: NetworkScenario) -> ValidationReport:
    """Report invariant violations without mutating the scenario."""
    findings: list[str] = []
    lo, hi = scenario.bounds
    for n in scenario.nodes:
        p = (n.position.x, n.position.y, n.position.z)
        if not all(a - 1e-9 <= v <= b + 1e-9 for v, a, b in zip(p, lo, hi)):
            findings.append(f"node {n.id} outside bounds")
        for k, ob in enumerate(scenario.obstacles):
            if ob.contains(n.position):
                findings.append(f"node {n.id} inside obstacle {k}")

    if len(scenario.nodes) > 1:
        pos = scenario.positions()
        rc = scenario.environment.comm_radius
        d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
        adj = d2 <= rc * rc + 1e-12
        seen = np.zeros(len(pos), dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.nonzero(adj[i] & ~seen)[0]:
                seen[j] = True
                stack.append(int(j))
        if not seen.all():
            missing = [scenario.nodes[int(j)].id for j in np.nonzero(~seen)[0]]
            findings.append(
                f"communication graph disconnected under radius {rc}; "
                f"unreached node ids: {missing}"
            )

    return ValidationReport(tuple(findings))


# --------------------------------------------------------------------------
# placement helpers


def _rejection_fill(
    spec: ScenarioSpec,
    sampler,
    obstacles,
    count: int | None = None,
) -> np.ndarray:
    """Sample ``count`` positions with minimum spacing, outside obstacles.

    ``sampler(rng)`` proposes one candidate position per call.
    """
    count = spec.num_nodes if count is None else count
    rng = seeded_rng(spec.seed, "scenario.place")
    placed: list[np.ndarray] = []
    budget = spec.max_attempts * max(count, 1)
    attempts = 0
    while len(placed) < count:
        if attempts >= budget:
            raise CapacityError(
                f"could only place {len(placed)}/{count} nodes with spacing "
                f"{spec.min_spacing} in template {spec.template!r}"
            )
        attempts += 1
        cand = np.asarray(sampler(rng), dtype=float)
        pt = PhysicalPoint(*cand)
        if any(ob.contains(pt) for ob in obstacles):
            continue
        if placed and np.min(
            np.linalg.norm(np.asarray(placed) - cand, axis=1)
        ) < spec.min_spacing:
            continue
        placed.append(cand)
    return np.asarray(placed)


def _planar_bounds(size):
    w, h = size[0], size[1]
    return ((0.0, 0.0, 0.0), (float(w), float(h), 0.0))


def _volume_bounds(size):
    w, h, d = size
    return ((0.0, 0.0, 0.0), (float(w), float(h), float(d)))


# --------------------------------------------------------------------------
# templates


def _template_grid(spec: ScenarioSpec):
    size = spec.size or (10.0, 10.0)
    k = math.ceil(math.sqrt(spec.num_nodes))
    xs = np.linspace(0.0, size[0], k) if k > 1 else np.array([size[0] / 2])
    ys = np.linspace(0.0, size[1], k) if k > 1 else np.array([size[1] / 2])
    pts = [(x, y, 0.0) for y in ys for x in xs][: spec.num_nodes]
    return np.asarray(pts), [], _planar_bounds(size)


def _template_sparse_grid(spec: ScenarioSpec):
    spacing = max(spec.min_spacing, 1.7)
    k = math.ceil(math.sqrt(spec.num_nodes))
    side = (k - 1) * spacing if k > 1 else spacing
    rng = seeded_rng(spec.seed, "scenario.place")
    jitter = min(0.2, 0.45 * (spacing - spec.min_spacing))
    pts = []
    for j in range(k):
        for i in range(k):
            if len(pts) >= spec.num_nodes:
                break
            dx, dy = rng.uniform(-jitter, jitter, size=2)
            pts.append((i * spacing + dx, j * spacing + dy, 0.0))
    pts = np.asarray(pts)
    pts -= pts.min(axis=0)
    hi = pts.max(axis=0)
    return pts, [], ((0.0, 0.0, 0.0), (float(hi[0]), float(hi[1]), 0.0))


def _template_random(spec: ScenarioSpec):
    if spec.size:
        size = spec.size
    else:
        side = math.sqrt(spec.num_nodes / 0.5)  # ~0.5 nodes / m^2
        size = (max(side, 10.0), max(side, 10.0))
    bounds = _planar_bounds(size)

    def sample(rng):
        return (rng.uniform(0, size[0]), rng.uniform(0, size[1]), 0.0)

    pts = _rejection_fill(spec, sample, [])
    return pts, [], bounds


def _default_circular_obstacles(radius: float, center) -> list[Obstacle]:
    cx, cy = center
    s = radius / 4.5
    spots = [(-0.45, 0.1), (0.25, 0.45), (0.2, -0.4)]
    return [
        Obstacle(
            (cx + fx * radius - s / 2, cy + fy * radius - s / 2, -0.5),
            (cx + fx * radius + s / 2, cy + fy * radius + s / 2, 0.5),
            absorption_coefficient=1.0,
            mmwave_opaque=True,
        )
        for fx, fy in spots
    ]


def _template_circular(spec: ScenarioSpec):
    # Disk sized for ~0.5 nodes / m^2; denser fills jam against the 1 m
    # minimum spacing under rejection sampling.
    if spec.size:
        radius = min(spec.size[0], spec.size[1]) / 2
    else:
        radius = math.sqrt(spec.num_nodes / (0.5 * math.pi))
    margin = 1.0
    side = 2 * (radius + margin)
    center = (side / 2, side / 2)
    n_obs = 3 if spec.num_obstacles is None else spec.num_obstacles
    obstacles = _default_circular_obstacles(radius, center)[:n_obs]

    def sample(rng):
        r = radius * math.sqrt(rng.uniform())
        th = rng.uniform(0, 2 * math.pi)
        return (center[0] + r * math.cos(th), center[1] + r * math.sin(th), 0.0)

    pts = _rejection_fill(spec, sample, obstacles)
    return pts, obstacles, _planar_bounds((side, side))


def _template_concave_void(spec: ScenarioSpec):
    size = spec.size or (25.0, 25.0)
    w, h = size[0], size[1]
    # A notch cut from the bottom edge makes the region concave.
    void = Obstacle(
        (0.36 * w, -0.01, -0.5),
        (0.64 * w, 0.55 * h, 0.5),
        absorption_coefficient=1.0,
        mmwave_opaque=True,
    )

    def sample(rng):
        return (rng.uniform(0, w), rng.uniform(0, h), 0.0)

    pts = _rejection_fill(spec, sample, [void])
    return pts, [void], _planar_bounds(size)


def _warehouse_racks(size) -> list[Obstacle]:
    w, h, d = size
    racks = []
    n_rows = max(2, int(w // 7))
    for r in range(n_rows):
        x0 = (r + 1) * w / (n_rows + 1) - 0.4
        racks.append(
            Obstacle(
                (x0, 0.15 * h, 0.0),
                (x0 + 0.8, 0.85 * h, 0.6 * d),
                absorption_coefficient=2.0,
                mmwave_opaque=True,
            )
        )
    return racks


def _template_warehouse(spec: ScenarioSpec):
    size = spec.size or (20.0, 30.0, 4.0)
    racks = _warehouse_racks(size)

    def sample(rng):
        return (
            rng.uniform(0, size[0]),
            rng.uniform(0, size[1]),
            rng.uniform(0, size[2]),
        )

    pts = _rejection_fill(spec, sample, racks)
    return pts, racks, _volume_bounds(size)


def _template_greenhouse(spec: ScenarioSpec):
    size = spec.size or (20.0, 30.0, 4.0)

    def sample(rng):
        return (
            rng.uniform(0, size[0]),
            rng.uniform(0, size[1]),
            rng.uniform(0, size[2]),
        )

    pts = _rejection_fill(spec, sample, [])
    return pts, [], _volume_bounds(size)


def _template_cylindrical(spec: ScenarioSpec):
    # Nodes on the lateral surface of a cylinder with a box obstacle inside.
    if spec.size:
        radius, height = spec.size[0] / 2 - 1.0, spec.size[2]
    else:
        # lateral area sized for the requested count at ~0.5 nodes / m^2
        height = 10.0
        radius = max(2.0, spec.num_nodes / (math.pi * height))
    margin = 1.0
    side = 2 * (radius + margin)
    cx = cy = side / 2
    n_obs = 1 if spec.num_obstacles is None else spec.num_obstacles
    obstacles = []
    if n_obs:
        obstacles.append(
            Obstacle(
                (cx - radius / 3, cy - radius / 3, 0.0),
                (cx + radius / 3, cy + radius / 3, height * 0.6),
                absorption_coefficient=2.0,
                mmwave_opaque=True,
            )
        )

    def sample(rng):
        th = rng.uniform(0, 2 * math.pi)
        z = rng.uniform(0, height)
        return (cx + radius * math.cos(th), cy + radius * math.sin(th), z)

    pts = _rejection_fill(spec, sample, obstacles)
    return pts, obstacles, ((0.0, 0.0, 0.0), (side, side, height))


def _template_spherical(spec: ScenarioSpec):
    if spec.size:
        radius = spec.size[0] / 2 - 1.0
    else:
        radius = max(2.0, math.sqrt(spec.num_nodes / (2 * math.pi)))
    margin = 1.0
    side = 2 * (radius + margin)
    c = side / 2

    def sample(rng):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        return (c + radius * v[0], c + radius * v[1], c + radius * v[2])

    pts = _rejection_fill(spec, sample, [])
    return pts, [], ((0.0, 0.0, 0.0), (side, side, side))


TEMPLATES = {
    "grid": _template_grid,
    "sparse_grid": _template_sparse_grid,
    "random": _template_random,
    "circular": _template_circular,
    "concave_void": _template_concave_void,
    "warehouse": _template_warehouse,
    "greenhouse": _template_greenhouse,
    "cylindrical": _template_cylindrical,
    "spherical": _template_spherical,
}


# --------------------------------------------------------------------------
# scenario files


def scenario_to_json(scenario: NetworkScenario) -> str:
    """Serialize to the versioned scenario document (schema_version 1)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "rng_seed": scenario.rng_seed,
        "bounds": {"min": list(scenario.bounds[0]), "max": list(scenario.bounds[1])},
        "environment": {
            "model_kind": scenario.environment.model_kind,
            "path_loss_exponent": scenario.environment.path_loss_exponent,
            "shadow_sigma": scenario.environment.shadow_sigma,
            "receive_sensitivity": scenario.environment.receive_sensitivity,
            "comm_radius": scenario.environment.comm_radius,
            "frequency": scenario.environment.frequency,
        },
        "obstacles": [
            {
                "min_corner": list(ob.min_corner),
                "max_corner": list(ob.max_corner),
                "absorption_coefficient": ob.absorption_coefficient,
                "mmwave_opaque": ob.mmwave_opaque,
            }
            for ob in scenario.obstacles
        ],
        "nodes": [
            {
                "id": n.id,
                "position": [n.position.x, n.position.y, n.position.z],
                "transmit_power": n.transmit_power,
                "is_anchor": n.is_anchor,
                "field_reading": n.field_reading,
                "sector_config": None
                if n.sector_config is None
                else {
                    "num_sectors": n.sector_config.num_sectors,
                    "vertical_beamwidth": n.sector_config.vertical_beamwidth,
                    "sector_azimuths": list(n.sector_config.sector_azimuths),
                    "sector_elevations": list(n.sector_config.sector_elevations),
                },
            }
            for n in scenario.nodes
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def scenario_from_json(text: str) -> NetworkScenario:
    doc = json.loads(text)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario schema_version {version!r}")
    env = EnvironmentProfile(
        model_kind=doc["environment"]["model_kind"],
        path_loss_exponent=doc["environment"]["path_loss_exponent"],
        shadow_sigma=doc["environment"]["shadow_sigma"],
        receive_sensitivity=doc["environment"]["receive_sensitivity"],
        comm_radius=doc["environment"]["comm_radius"],
        frequency=doc["environment"].get("frequency"),
    )
    obstacles = tuple(
        Obstacle(
            tuple(ob["min_corner"]),
            tuple(ob["max_corner"]),
            ob["absorption_coefficient"],
            ob["mmwave_opaque"],
        )
        for ob in doc["obstacles"]
    )
    nodes = []
    for n in doc["nodes"]:
        cfg = None
        if n.get("sector_config"):
            sc = n["sector_config"]
            ns = sc["num_sectors"]
            cfg = SectorConfig(
                num_sectors=ns,
                horizontal_beamwidth=2 * math.pi / ns,
                vertical_beamwidth=sc["vertical_beamwidth"],
                sector_azimuths=tuple(sc["sector_azimuths"]),
                sector_elevations=tuple(sc["sector_elevations"]),
            )
        nodes.append(
            SensorNode(
                id=n["id"],
                position=PhysicalPoint(*n["position"]),
                transmit_power=n["transmit_power"],
                sector_config=cfg,
                is_anchor=n.get("is_anchor", False),
                field_reading=n.get("field_reading"),
            )
        )
    return NetworkScenario(
        nodes=tuple(nodes),
        obstacles=obstacles,
        environment=env,
        bounds=(tuple(doc["bounds"]["min"]), tuple(doc["bounds"]["max"])),
        rng_seed=doc["rng_seed"],
    )
