import math

import numpy as np
import pytest

from topomap.baselines import (
    multilaterate,
    rssi_weighted_centroid,
    trilaterate,
    triangulate,
)
from topomap.errors import DegenerateGeometryError


def forward_distances(anchors, point):
    return np.linalg.norm(np.asarray(anchors, float) - np.asarray(point, float), axis=1)


class TestTrilateration:
    def test_hand_example(self):
        anchors = [(0, 0), (4, 0), (0, 4)]
        d = [math.sqrt(2), math.sqrt(10), math.sqrt(10)]
        p = trilaterate(anchors, d)
        assert (p.x, p.y) == pytest.approx((1.0, 1.0), abs=1e-9)

    def test_collinear_anchors_rejected(self):
        anchors = [(0, 0), (1, 0), (2, 0)]
        with pytest.raises(DegenerateGeometryError):
            trilaterate(anchors, [1.0, 1.0, 1.0])

    def test_exact_inputs_consistent(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            anchors = rng.uniform(0, 10, size=(3, 2))
            if abs(np.linalg.det(2 * (anchors[:-1] - anchors[-1]))) < 1e-3:
                continue
            target = rng.uniform(0, 10, size=2)
            p = trilaterate(anchors, forward_distances(anchors, target))
            assert math.hypot(p.x - target[0], p.y - target[1]) < 1e-9

    def test_three_dimensional(self):
        anchors = [(0, 0, 0), (5, 0, 0), (0, 5, 0), (0, 0, 5)]
        target = np.array([1.0, 2.0, 1.5])
        p = trilaterate(anchors, forward_distances(anchors, target))
        assert (p.x, p.y, p.z) == pytest.approx(tuple(target), abs=1e-9)


class TestMultilateration:
    def test_exact_five_anchor_recovery(self):
        rng = np.random.default_rng(7)
        anchors = rng.uniform(0, 10, size=(5, 2))
        target = np.array([4.4, 6.1])
        p = multilaterate(anchors, forward_distances(anchors, target))
        assert math.hypot(p.x - target[0], p.y - target[1]) < 1e-9

    def test_reduces_to_trilateration(self):
        anchors = [(0, 0), (4, 0), (0, 4)]
        d = [math.sqrt(2), math.sqrt(10), math.sqrt(10)]
        a = trilaterate(anchors, d)
        b = multilaterate(anchors, d)
        assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-12)

    def test_noisy_beats_worst_subset(self):
        rng = np.random.default_rng(11)
        wins = 0
        trials = 100
        for _ in range(trials):
            anchors = rng.uniform(0, 10, size=(6, 2))
            target = rng.uniform(2, 8, size=2)
            d = forward_distances(anchors, target) + rng.normal(0, 0.3, size=6)
            try:
                p = multilaterate(anchors, d)
            except DegenerateGeometryError:
                continue
            err_all = math.hypot(p.x - target[0], p.y - target[1])
            worst = 0.0
            from itertools import combinations

            for idx in combinations(range(6), 3):
                sub = anchors[list(idx)]
                if abs(np.linalg.det(2 * (sub[:-1] - sub[-1]))) < 1e-6:
                    continue
                q = trilaterate(sub, d[list(idx)])
                worst = max(worst, math.hypot(q.x - target[0], q.y - target[1]))
            if err_all <= worst:
                wins += 1
        assert wins > trials * 0.9

    def test_rank_deficiency_rejected(self):
        anchors = [(0, 0), (1, 0), (2, 0), (3, 0)]
        with pytest.raises(DegenerateGeometryError):
            multilaterate(anchors, [1, 1, 1, 1])


def subtended_angles(anchors, point):
    """Angles at the unknown point subtending each anchor pair (BC, AC, AB)."""
    A, B, C = [np.asarray(a, float) for a in anchors]
    p = np.asarray(point, float)

    def ang(u, v):
        cu = u - p
        cv = v - p
        cosv = np.dot(cu, cv) / (np.linalg.norm(cu) * np.linalg.norm(cv))
        return math.acos(np.clip(cosv, -1, 1))

    return [ang(B, C), ang(A, C), ang(A, B)]


class TestTriangulation:
    def test_equilateral_centroid(self):
        anchors = np.array([(0, 0), (4, 0), (2, 2 * math.sqrt(3))], float)
        centroid = anchors.mean(axis=0)
        angles = subtended_angles(anchors, centroid)
        assert angles == pytest.approx([2 * math.pi / 3] * 3)
        p = triangulate(anchors, angles)
        assert (p.x, p.y) == pytest.approx(tuple(centroid), abs=1e-6)

    def test_forward_model_recovery(self):
        # interior targets: resection from three subtended angles is unique
        # inside the anchor triangle (exterior points can have a mirror twin)
        rng = np.random.default_rng(13)
        hits = 0
        for _ in range(30):
            anchors = rng.uniform(0, 10, size=(3, 2))
            w = rng.dirichlet([2.0, 2.0, 2.0])
            target = w @ anchors
            if min(np.linalg.norm(anchors - target, axis=1)) < 0.5:
                continue
            angles = subtended_angles(anchors, target)
            if max(angles) > math.pi - 0.05 or min(angles) < 0.05:
                continue
            p = triangulate(anchors, angles)
            assert math.hypot(p.x - target[0], p.y - target[1]) < 1e-6
            hits += 1
        assert hits >= 10

    def test_straight_angle_rejected(self):
        anchors = [(0, 0), (4, 0), (0, 4)]
        with pytest.raises(DegenerateGeometryError):
            triangulate(anchors, [math.pi, 1.0, 1.0])


class TestRssiCentroid:
    def test_equal_powers_give_centroid(self):
        anchors = [(0, 0), (6, 0), (3, 6)]
        p = rssi_weighted_centroid(anchors, [-40.0, -40.0, -40.0])
        assert (p.x, p.y) == pytest.approx((3.0, 2.0))

    def test_dominant_power_pulls_estimate(self):
        anchors = [(0, 0), (6, 0), (3, 6)]
        p = rssi_weighted_centroid(anchors, [-20.0, -60.0, -60.0])
        assert math.hypot(p.x - 0, p.y - 0) < math.hypot(p.x - 6, p.y - 0)

    def test_too_few_anchors(self):
        with pytest.raises(DegenerateGeometryError):
            rssi_weighted_centroid([(0, 0), (1, 1)], [-30, -30])

    def test_error_shrinks_with_density(self):
        # with exact power law and no noise, nearer/more anchors tighten the
        # centroid toward the target on average
        rng = np.random.default_rng(17)
        errs = {}
        for n in (6, 30):
            total = 0.0
            for _ in range(40):
                anchors = rng.uniform(0, 20, size=(n, 2))
                target = rng.uniform(5, 15, size=2)
                d = np.linalg.norm(anchors - target, axis=1)
                powers = -40 - 10 * 2.7 * np.log10(np.maximum(d, 0.1))
                p = rssi_weighted_centroid(anchors, powers)
                total += math.hypot(p.x - target[0], p.y - target[1])
            errs[n] = total / 40
        assert errs[30] < errs[6]
