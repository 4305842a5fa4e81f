"""Domain types shared by every algorithm: nodes, obstacles, environments,
sector antennas, and the two coordinate frames.

Physical coordinates (meters, the simulated ground truth) and topology
coordinates (the estimator's output frame) are deliberately distinct types.
Nothing in this package accepts one where the other is expected; crossing
frames requires an explicit alignment transform (see ``topomap.metrics``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "PhysicalPoint",
    "TopologyCoordinate",
    "SectorConfig",
    "SensorNode",
    "Obstacle",
    "EnvironmentProfile",
    "NetworkScenario",
    "ENVIRONMENT_PRESETS",
]

TWO_PI = 2.0 * math.pi


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class PhysicalPoint:
    """A point in the simulated world, meters. z = 0 for planar scenarios."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        _check_finite("PhysicalPoint", self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "PhysicalPoint") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class TopologyCoordinate:
    """A point in the estimated coordinate frame (dimensionless units).

    Kept distinct from :class:`PhysicalPoint` so the two frames can never be
    mixed silently.
    """

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        _check_finite("TopologyCoordinate", self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "TopologyCoordinate") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class SectorConfig:
    """Fixed multi-sector antenna layout.

    ``num_sectors`` beams split the azimuth plane evenly, so the horizontal
    beamwidth is ``2*pi / num_sectors``. Each sector has its own boresight
    azimuth and elevation.
    """

    num_sectors: int
    horizontal_beamwidth: float
    vertical_beamwidth: float
    sector_azimuths: tuple[float, ...]
    sector_elevations: tuple[float, ...]

    def __post_init__(self):
        if self.num_sectors < 1:
            raise ValueError("num_sectors must be >= 1")
        if abs(self.horizontal_beamwidth * self.num_sectors - TWO_PI) > 1e-9:
            raise ValueError("horizontal_beamwidth * num_sectors must equal 2*pi")
        if len(self.sector_azimuths) != self.num_sectors:
            raise ValueError("need one azimuth per sector")
        if len(self.sector_elevations) != self.num_sectors:
            raise ValueError("need one elevation per sector")
        for a in self.sector_azimuths:
            if not (0.0 <= a < TWO_PI):
                raise ValueError("sector azimuths must lie in [0, 2*pi)")

    @classmethod
    def uniform(
        cls,
        num_sectors: int,
        vertical_beamwidth: float,
        azimuth_offset: float = 0.0,
        elevations: "tuple[float, ...] | float" = 0.0,
    ) -> "SectorConfig":
        """Evenly spaced sector boresights starting at ``azimuth_offset``.

        ``elevations`` is either one angle shared by all sectors or a cycle
        applied sector by sector.
        """
        hbw = TWO_PI / num_sectors
        az = tuple((azimuth_offset + k * hbw) % TWO_PI for k in range(num_sectors))
        if isinstance(elevations, (int, float)):
            el = (float(elevations),) * num_sectors
        else:
            el = tuple(elevations[k % len(elevations)] for k in range(num_sectors))
        return cls(num_sectors, hbw, vertical_beamwidth, az, el)


@dataclass(frozen=True)
class SensorNode:
    """A deployed sensor. ``sector_config`` is None for omnidirectional RF
    nodes; ``field_reading`` is only populated in extremum-seeking scenarios.
    """

    id: int
    position: PhysicalPoint
    transmit_power: float  # dBm
    sector_config: SectorConfig | None = None
    is_anchor: bool = False
    field_reading: float | None = None

    def __post_init__(self):
        _check_finite("transmit_power", self.transmit_power)


@dataclass(frozen=True)
class Obstacle:
    """An axis-aligned box obstacle.

    RF links attenuate through it according to the absorption coefficient
    (dB-equivalent per meter of traversed thickness); millimeter-wave links
    crossing an opaque obstacle are blocked entirely.
    """

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]
    absorption_coefficient: float = 1.0  # per meter
    mmwave_opaque: bool = True

    def __post_init__(self):
        for lo, hi in zip(self.min_corner, self.max_corner):
            if not lo < hi:
                raise ValueError("obstacle min corner must be strictly below max corner per axis")
        if self.absorption_coefficient < 0:
            raise ValueError("absorption coefficient must be >= 0")

    def contains(self, p: PhysicalPoint, margin: float = 0.0) -> bool:
        q = (p.x, p.y, p.z)
        return all(
            lo - margin < v < hi + margin
            for v, lo, hi in zip(q, self.min_corner, self.max_corner)
        )


@dataclass(frozen=True)
class EnvironmentProfile:
    """Channel parameters for one deployment environment.

    ``model_kind`` selects the link model: "rf_log_shadow" (log-distance path
    loss with log-normal shadowing and obstacle absorption) or "mmwave_ci"
    (close-in free-space reference model at ``frequency``, obstacles block).
    """

    model_kind: str
    path_loss_exponent: float
    shadow_sigma: float  # dB
    receive_sensitivity: float  # dBm
    comm_radius: float  # meters
    frequency: float | None = None  # Hz, CI model only

    def __post_init__(self):
        if self.model_kind not in ("rf_log_shadow", "mmwave_ci"):
            raise ValueError(f"unknown model_kind {self.model_kind!r}")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.shadow_sigma < 0:
            raise ValueError("shadow_sigma must be >= 0")
        if self.comm_radius <= 0:
            raise ValueError("comm_radius must be > 0")
        if self.model_kind == "mmwave_ci" and not self.frequency:
            raise ValueError("mmwave_ci environments need a frequency")


# Measured profiles for the environments the simulations reproduce.
ENVIRONMENT_PRESETS: dict[str, EnvironmentProfile] = {
    "suburban": EnvironmentProfile("rf_log_shadow", 2.7, 9.6, -90.0, 10.0),
    "heavy_tree": EnvironmentProfile("rf_log_shadow", 4.6, 10.6, -90.0, 10.0),
    "light_tree": EnvironmentProfile("rf_log_shadow", 3.6, 8.2, -90.0, 10.0),
    "warehouse": EnvironmentProfile("mmwave_ci", 1.7, 3.2, -60.0, 7.0, 73e9),
    "greenhouse": EnvironmentProfile("mmwave_ci", 2.4, 6.2, -60.0, 7.0, 73e9),
}

# Default transmit powers matching the preset environments (dBm).
RF_TX_POWER_DBM = -50.0
MMWAVE_TX_POWER_DBM = 20.0


@dataclass(frozen=True)
class NetworkScenario:
    """Immutable description of one deployment: the unit of reproducibility.

    Everything a simulation consumes: nodes, obstacles, environment, the
    bounding box of the deployment region, and the seed from which every
    random stream in a run is derived.
    """

    nodes: tuple[SensorNode, ...]
    obstacles: tuple[Obstacle, ...]
    environment: EnvironmentProfile
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]]
    rng_seed: int

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise ValueError("node ids must be unique within a scenario")
        lo, hi = self.bounds
        if not all(a <= b for a, b in zip(lo, hi)):
            raise ValueError("bounds min corner must not exceed max corner")

    @property
    def is_planar(self) -> bool:
        return all(abs(n.position.z) < 1e-12 for n in self.nodes)

    def node_by_id(self, node_id: int) -> SensorNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"no node with id {node_id}")

    def positions(self) -> np.ndarray:
        """(N, 3) array of node positions in node order."""
        return np.array([n.position.as_array() for n in self.nodes])

    def with_field_readings(self, readings: dict[int, float]) -> "NetworkScenario":
        nodes = tuple(
            replace(n, field_reading=readings.get(n.id, n.field_reading))
            for n in self.nodes
        )
        return replace(self, nodes=nodes)
