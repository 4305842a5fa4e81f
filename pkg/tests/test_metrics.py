import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topomap.errors import DegenerateGeometryError, MissingCountError
from topomap.metrics import (
    AlignmentTransform,
    EnergyCounts,
    apply_alignment,
    distance_error_stats,
    energy_estimate,
    one_hop_connectivity_error,
    procrustes_fit,
    sector_displacement,
)


def grid_map(nx=8, ny=8, spacing=2.0):
    pts = {}
    i = 0
    for gy in range(ny):
        for gx in range(nx):
            pts[i] = np.array([gx * spacing, gy * spacing, 0.0])
            i += 1
    return pts


def rotate_scale_shift(pts, angle=0.0, scale=1.0, shift=(0.0, 0.0)):
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return {
        k: scale * (R @ v) + np.array([shift[0], shift[1], 0.0]) for k, v in pts.items()
    }


class TestConnectivityError:
    def test_identity_map_has_zero_error(self):
        phys = grid_map()
        res = one_hop_connectivity_error(phys, dict(phys), comm_radius=3.0)
        assert res.total_percent == 0.0
        assert all(r == 0.0 for r in res.per_node_ratio.values())

    def test_single_displaced_node_counts_per_neighbor(self):
        phys = grid_map(6, 6, spacing=2.0)
        est = dict(phys)
        victim = 14  # interior node
        # push the estimate radially outward from the centroid so its own
        # ellipse inflates and only the neighbors' tests fail
        centroid = np.mean(list(phys.values()), axis=0)
        direction = phys[victim] - centroid
        direction = direction / np.linalg.norm(direction)
        est[victim] = phys[victim] + 14.0 * direction
        res = one_hop_connectivity_error(phys, est, comm_radius=2.5)
        phys_arr = np.array([phys[k] for k in sorted(phys)])
        d = np.linalg.norm(phys_arr - phys[victim], axis=1)
        degree = int(((d <= 2.5) & (d > 0)).sum())
        relations = res.relations
        assert res.violations >= degree
        assert res.total_percent == pytest.approx(100 * res.violations / relations)

    def test_invariant_under_similarity_transform(self):
        phys = grid_map(7, 5, spacing=2.0)
        rng = np.random.default_rng(3)
        est = {k: v + rng.normal(0, 0.4, size=3) * [1, 1, 0] for k, v in phys.items()}
        base = one_hop_connectivity_error(phys, est, comm_radius=3.0)
        moved = rotate_scale_shift(est, angle=0.7, scale=2.3, shift=(11.0, -4.0))
        res = one_hop_connectivity_error(phys, moved, comm_radius=3.0)
        assert res.total_percent == pytest.approx(base.total_percent, abs=1e-9)

    def test_range_is_percentage(self):
        phys = grid_map(5, 5)
        rng = np.random.default_rng(8)
        est = {k: rng.uniform(0, 10, size=3) * [1, 1, 0] for k in phys}
        res = one_hop_connectivity_error(phys, est, comm_radius=3.0)
        assert 0.0 <= res.total_percent <= 100.0


class TestDistanceError:
    def test_identical_maps(self):
        phys = grid_map()
        mean, var, cdf = distance_error_stats(phys, dict(phys))
        assert mean == 0.0 and var == 0.0

    def test_uniform_shift_without_alignment(self):
        phys = grid_map()
        est = {k: v + np.array([1.0, 0.0, 0.0]) for k, v in phys.items()}
        mean, _, _ = distance_error_stats(phys, est)
        assert mean == pytest.approx(1.0)

    def test_uniform_shift_absorbed_by_alignment(self):
        phys = grid_map()
        est = {k: v + np.array([1.0, 0.0, 0.0]) for k, v in phys.items()}
        mean, _, _ = distance_error_stats(phys, est, align=True)
        assert mean == pytest.approx(0.0, abs=1e-9)

    def test_cdf_sorted_in_unit_range(self):
        phys = grid_map()
        rng = np.random.default_rng(1)
        est = {k: v + rng.normal(0, 1, 3) * [1, 1, 0] for k, v in phys.items()}
        _, _, cdf = distance_error_stats(phys, est)
        assert np.all(np.diff(cdf) >= 0)

    def test_estimated_only_ids_rejected(self):
        phys = grid_map(2, 2)
        est = dict(phys)
        est[99] = np.zeros(3)
        with pytest.raises(ValueError, match="99"):
            distance_error_stats(phys, est)


class TestSectorDisplacement:
    def test_identity_all_zero(self):
        phys = grid_map(5, 5)
        hist = sector_displacement(phys, dict(phys), num_sectors=8, comm_radius=3.0)
        assert sum(hist.values()) > 0
        assert sum(v for k, v in hist.items() if k > 0) == 0

    def test_one_sector_rotation(self):
        # pre-rotate the layout by half a sector so bearings sit mid-sector,
        # off the knife-edge boundaries of the index function
        phys = rotate_scale_shift(grid_map(5, 5), angle=math.pi / 8)
        est = rotate_scale_shift(phys, angle=2 * math.pi / 8)
        hist = sector_displacement(phys, est, num_sectors=8, comm_radius=3.0)
        assert hist[1] == sum(hist.values())

    def test_odd_sector_count_rejected(self):
        with pytest.raises(ValueError):
            sector_displacement(grid_map(2, 2), grid_map(2, 2), 7, 3.0)

    @given(angle=st.floats(0, 2 * math.pi), ns=st.sampled_from([4, 8, 16]))
    @settings(max_examples=60, deadline=None)
    def test_displacement_range(self, angle, ns):
        phys = grid_map(4, 4)
        est = rotate_scale_shift(phys, angle=angle)
        hist = sector_displacement(phys, est, num_sectors=ns, comm_radius=3.0)
        assert set(hist) == set(range(ns // 2 + 1))
        assert all(v >= 0 for v in hist.values())


class TestProcrustes:
    def test_identity(self):
        X = np.random.default_rng(0).uniform(0, 5, size=(10, 2))
        t = procrustes_fit(X, X)
        assert t.scale == pytest.approx(1.0)
        assert t.rotation == pytest.approx(np.eye(2))
        assert t.shift == pytest.approx(np.zeros(2), abs=1e-12)

    def test_recovers_forward_transform(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(-3, 3, size=(12, 2))
        ang = math.radians(30)
        R = np.array([[math.cos(ang), math.sin(ang)], [-math.sin(ang), math.cos(ang)]])
        Y = 2.0 * X @ R + np.array([1.0, 1.0])
        t = procrustes_fit(X, Y)
        assert t.scale == pytest.approx(2.0, abs=1e-9)
        assert apply_alignment(t, X) == pytest.approx(Y, abs=1e-9)

    def test_beats_random_transforms(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 4, size=(15, 2))
        Y = X + rng.normal(0, 0.3, size=X.shape)
        t = procrustes_fit(X, Y)
        best = float(np.sum((Y - apply_alignment(t, X)) ** 2))
        for _ in range(1000):
            ang = rng.uniform(0, 2 * math.pi)
            R = np.array(
                [[math.cos(ang), math.sin(ang)], [-math.sin(ang), math.cos(ang)]]
            )
            b = rng.uniform(0.2, 3.0)
            c = rng.uniform(-2, 2, size=2)
            resid = float(np.sum((Y - (b * X @ R + c)) ** 2))
            assert best <= resid + 1e-9

    def test_residual_invariant_to_source_preconditioning(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 4, size=(15, 2))
        Y = X + rng.normal(0, 0.2, size=X.shape)
        t = procrustes_fit(X, Y)
        r0 = float(np.sum((Y - apply_alignment(t, X)) ** 2))
        ang = 1.1
        R = np.array([[math.cos(ang), math.sin(ang)], [-math.sin(ang), math.cos(ang)]])
        X2 = 1.7 * X @ R + np.array([3.0, -2.0])
        t2 = procrustes_fit(X2, Y)
        r2 = float(np.sum((Y - apply_alignment(t2, X2)) ** 2))
        assert r2 == pytest.approx(r0, rel=1e-9)

    def test_coincident_points_rejected(self):
        X = np.ones((5, 2))
        with pytest.raises(DegenerateGeometryError):
            procrustes_fit(X, X)


class TestEnergy:
    def test_survey_formula(self):
        c = EnergyCounts("mltm", e_tx=1.0, num_nodes=100, num_samples=50)
        assert energy_estimate(c) == 5000.0

    def test_sweep_formula(self):
        c = EnergyCounts(
            "mmtm", e_tx=2.0, e_rx=1.0, num_nodes=10, avg_samples=5, sectors=8
        )
        assert energy_estimate(c) == 850.0

    def test_zero_packets(self):
        c = EnergyCounts("mltm", e_tx=1.0, num_nodes=0, num_samples=0)
        assert energy_estimate(c) == 0.0

    def test_missing_count_raises(self):
        c = EnergyCounts("mmtm", e_tx=1.0, num_nodes=10)
        with pytest.raises(MissingCountError):
            energy_estimate(c)

    def test_hybrid_extends_static(self):
        ss = EnergyCounts(
            "dmmtm_ss", e_tx=2.0, e_rx=1.0, num_nodes=50, num_anchors=8,
            sectors=8, neighbor_anchors=3,
        )
        hs = EnergyCounts(
            "dmmtm_hs", e_tx=2.0, e_rx=1.0, num_nodes=50, num_anchors=8,
            sectors=8, neighbor_anchors=3, avg_samples=4,
        )
        assert energy_estimate(hs) > energy_estimate(ss)
