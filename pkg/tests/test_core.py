import math

import numpy as np
import pytest

from topomap.core import (
    ENVIRONMENT_PRESETS,
    EnvironmentProfile,
    NetworkScenario,
    Obstacle,
    PhysicalPoint,
    ScenarioSpec,
    SectorConfig,
    SensorNode,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    seeded_rng,
    segment_box_overlap,
    validate_scenario,
    wrap_angle,
)
from topomap.errors import CapacityError


def test_grid_template_degenerate_four_corners():
    s = generate_scenario(ScenarioSpec("grid", 4, seed=7, size=(10, 10)))
    got = {(n.position.x, n.position.y) for n in s.nodes}
    assert got == {(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)}


def test_circular_template_count_and_obstacle_clearance():
    s = generate_scenario(ScenarioSpec("circular", 496, seed=3))
    assert len(s.nodes) == 496
    assert len(s.obstacles) == 3
    for n in s.nodes:
        for ob in s.obstacles:
            assert not ob.contains(n.position)


def test_generation_is_deterministic():
    spec = ScenarioSpec("random", 40, seed=11)
    a = scenario_to_json(generate_scenario(spec))
    b = scenario_to_json(generate_scenario(spec))
    assert a == b


def test_min_spacing_is_respected():
    s = generate_scenario(ScenarioSpec("random", 60, seed=5, size=(15, 15)))
    pos = s.positions()
    d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 1.0


def test_capacity_error_when_region_too_small():
    with pytest.raises(CapacityError):
        generate_scenario(ScenarioSpec("random", 100, seed=1, size=(3, 3)))


def test_unknown_template_rejected():
    with pytest.raises(ValueError):
        generate_scenario(ScenarioSpec("moebius", 4, seed=1))


def test_validate_clean_scenario():
    s = generate_scenario(ScenarioSpec("random", 30, seed=2, size=(12, 12)))
    assert validate_scenario(s).ok


def test_validate_flags_node_in_obstacle():
    env = ENVIRONMENT_PRESETS["suburban"]
    ob = Obstacle((4, 4, -1), (6, 6, 1))
    nodes = (
        SensorNode(0, PhysicalPoint(5, 5), -50.0),
        SensorNode(1, PhysicalPoint(1, 1), -50.0),
    )
    s = NetworkScenario(nodes, (ob,), env, ((0, 0, 0), (10, 10, 0)), rng_seed=0)
    report = validate_scenario(s)
    assert any("node 0" in v and "obstacle" in v for v in report.violations)


def test_validate_flags_disconnected_graph():
    env = EnvironmentProfile("rf_log_shadow", 2.7, 9.6, -90.0, comm_radius=2.0)
    nodes = (
        SensorNode(0, PhysicalPoint(0, 0), -50.0),
        SensorNode(1, PhysicalPoint(1, 0), -50.0),
        SensorNode(2, PhysicalPoint(9, 0), -50.0),
    )
    s = NetworkScenario(nodes, (), env, ((0, 0, 0), (10, 10, 0)), rng_seed=0)
    report = validate_scenario(s)
    assert any("disconnected" in v for v in report.violations)


def test_scenario_json_roundtrip():
    s = generate_scenario(ScenarioSpec("warehouse", 25, seed=9))
    text = scenario_to_json(s)
    back = scenario_from_json(text)
    assert scenario_to_json(back) == text
    assert back.nodes[0].sector_config is not None


class TestSeededRng:
    def test_same_key_same_stream(self):
        a = seeded_rng(42, "x").normal(size=10)
        b = seeded_rng(42, "x").normal(size=10)
        assert np.array_equal(a, b)

    def test_different_labels_differ(self):
        a = seeded_rng(42, "x").normal(size=10)
        b = seeded_rng(42, "y").normal(size=10)
        assert not np.array_equal(a, b)

    def test_normal_draws_are_centered(self):
        n = 100_000
        sigma = 2.5
        draws = seeded_rng(7, "clt").normal(0.0, sigma, size=n)
        assert abs(draws.mean()) < 4 * sigma / math.sqrt(n)


class TestGeometry:
    def test_wrap_angle_range(self):
        for a in np.linspace(-10, 10, 101):
            w = wrap_angle(a)
            assert -math.pi < w <= math.pi

    def test_segment_box_overlap_exact(self):
        ob = Obstacle((1, -1, -1), (3, 1, 1))
        assert segment_box_overlap(np.array([0, 0, 0]), np.array([5, 0, 0]), ob) == pytest.approx(2.0)

    def test_segment_missing_box(self):
        ob = Obstacle((1, 2, -1), (3, 4, 1))
        assert segment_box_overlap(np.array([0, 0, 0]), np.array([5, 0, 0]), ob) == 0.0


def test_sector_config_uniform_invariants():
    cfg = SectorConfig.uniform(8, math.pi / 4)
    assert cfg.horizontal_beamwidth == pytest.approx(2 * math.pi / 8, abs=1e-12)
    assert len(cfg.sector_azimuths) == 8
    with pytest.raises(ValueError):
        SectorConfig(3, 1.0, 0.5, (0.0, 1.0, 2.0), (0.0, 0.0, 0.0))


def test_cylindrical_nodes_on_surface():
    s = generate_scenario(ScenarioSpec("cylindrical", 120, seed=4))
    lo, hi = s.bounds
    cx = (lo[0] + hi[0]) / 2
    cy = (lo[1] + hi[1]) / 2
    radii = [math.hypot(n.position.x - cx, n.position.y - cy) for n in s.nodes]
    assert np.ptp(radii) < 1e-6
