"""Likelihood-based topology mapping for wireless sensor networks.

A deterministic simulator plus the algorithms that run on it: reception
likelihood grid estimation for RF and millimeter-wave surveys (centralized
and distributed), map-quality metrics, classical baselines, and two
applications that navigate on the estimated coordinates (target pursuit and
field level-set seeking).
"""

from . import (
    baselines,
    core,
    detarsk,
    dmmtm,
    errors,
    extremum,
    likelihood,
    metrics,
    mltm,
    mmtm,
    propagation,
    trajectory,
)
from .core import (
    ENVIRONMENT_PRESETS,
    EnvironmentProfile,
    NetworkScenario,
    Obstacle,
    PhysicalPoint,
    ScenarioSpec,
    SectorConfig,
    SensorNode,
    TopologyCoordinate,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    seeded_rng,
    validate_scenario,
)
from .likelihood import GridSpec, LikelihoodField, ReceptionProbabilityFn, ml_search
from .mltm import PacketReceptionMatrix, TopologyMap, estimate_map, gather_evidence

__all__ = [
    "baselines",
    "core",
    "detarsk",
    "dmmtm",
    "errors",
    "extremum",
    "likelihood",
    "metrics",
    "mltm",
    "mmtm",
    "propagation",
    "trajectory",
    "ENVIRONMENT_PRESETS",
    "EnvironmentProfile",
    "NetworkScenario",
    "Obstacle",
    "PhysicalPoint",
    "ScenarioSpec",
    "SectorConfig",
    "SensorNode",
    "TopologyCoordinate",
    "generate_scenario",
    "scenario_from_json",
    "scenario_to_json",
    "seeded_rng",
    "validate_scenario",
    "GridSpec",
    "LikelihoodField",
    "ReceptionProbabilityFn",
    "ml_search",
    "PacketReceptionMatrix",
    "TopologyMap",
    "estimate_map",
    "gather_evidence",
]
