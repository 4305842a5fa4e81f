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
    TopologyCoordinate,
)
from .rng import seeded_rng, worker_count
from .geometry import (
    azimuth_elevation,
    obstacle_traversals,
    segment_box_overlap,
    segment_crosses_box,
    wrap_angle,
)
from .scenarios import (
    TEMPLATES,
    ScenarioSpec,
    ValidationReport,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    validate_scenario,
)

__all__ = [
    "ENVIRONMENT_PRESETS",
    "MMWAVE_TX_POWER_DBM",
    "RF_TX_POWER_DBM",
    "EnvironmentProfile",
    "NetworkScenario",
    "Obstacle",
    "PhysicalPoint",
    "SectorConfig",
    "SensorNode",
    "TopologyCoordinate",
    "seeded_rng",
    "worker_count",
    "azimuth_elevation",
    "obstacle_traversals",
    "segment_box_overlap",
    "segment_crosses_box",
    "wrap_angle",
    "TEMPLATES",
    "ScenarioSpec",
    "ValidationReport",
    "generate_scenario",
    "scenario_from_json",
    "scenario_to_json",
    "validate_scenario",
]
