import numpy as np
import pytest

from uwauth.detect import (H0, H1, DecisionRecord, Measurement, Thresholds,
                           algorithm1, bh_outlier, fuse_step2, fuse_steps,
                           identify, nn_aoa, nn_distance, nn_position)
from uwauth.detect import test1_distance_bounding as distance_bound

D = np.array([100.0, 200.0, 300.0])
THETA = np.array([30.0, 60.0, 90.0])
P = D * np.exp(1j * np.deg2rad(THETA))
THR = Thresholds(d0=500.0, eps_p=1.0, eps_d=1.0, eps_theta=1.0)


class TestStep1:
    def test_decisions(self):
        assert distance_bound(600.0, 500.0) == H1
        assert distance_bound(400.0, 500.0) == H0
        # boundary convention: z == d0 authenticates
        assert distance_bound(500.0, 500.0) == H0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            distance_bound(-1.0, 500.0)


class TestNearestNeighbour:
    def test_position_exact_hit(self):
        j, i = nn_position(P[2], P)
        assert (j, i) == (0.0, 2)

    def test_position_two_points(self):
        pts = np.array([0 + 100j, 100 + 0j])
        j, i = nn_position(99 + 0j, pts)
        assert i == 1
        assert j == pytest.approx(1.0)

    def test_position_brute_force(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal(8) * 100 + 1j * rng.standard_normal(8) * 100
        for _ in range(50):
            q = complex(rng.standard_normal() * 100,
                        rng.standard_normal() * 100)
            j, i = nn_position(q, pts)
            res = [abs(q - p) for p in pts]
            assert i == int(np.argmin(res))
            assert j == pytest.approx(min(res))

    def test_distance(self):
        assert nn_distance(210.0, D) == (10.0, 1)
        assert nn_distance(200.0, D) == (0.0, 1)
        # equidistant tie goes to the smallest index
        assert nn_distance(150.0, np.array([100.0, 200.0]))[1] == 0

    def test_aoa(self):
        l, i = nn_aoa(58.0, THETA)
        assert i == 1
        assert l == pytest.approx(2.0)
        assert nn_aoa(60.0, THETA) == (0.0, 1)
        assert nn_aoa(45.0, np.array([30.0, 60.0]))[1] == 0


class TestBhOutlier:
    def test_decisions(self):
        assert bh_outlier(0.5, 1.0) == H0
        assert bh_outlier(3.1, 3.0) == H1
        assert bh_outlier(1.0, 1.0) == H0      # boundary authenticates

    def test_validation(self):
        with pytest.raises(ValueError):
            bh_outlier(-0.1, 1.0)
        with pytest.raises(ValueError):
            bh_outlier(0.5, 0.0)


class TestFusion:
    def test_rules(self):
        assert fuse_step2((H1, H0, H0), "AND") == H1
        assert fuse_step2((H1, H0, H0), "OR") == H0
        assert fuse_step2((H1, H0, H0), "MV") == H0
        assert fuse_step2((H1, H1, H0), "AND") == H1
        assert fuse_step2((H1, H1, H0), "OR") == H0
        assert fuse_step2((H1, H1, H0), "MV") == H1
        for rule in ("AND", "OR", "MV"):
            assert fuse_step2((H0, H0, H0), rule) == H0

    def test_inclusion_property(self):
        # H0(AND) subset H0(MV) subset H0(OR) over all 8 decision triples
        for bits in range(8):
            dec = tuple((bits >> k) & 1 for k in range(3))
            if fuse_step2(dec, "AND") == H0:
                assert fuse_step2(dec, "MV") == H0
            if fuse_step2(dec, "MV") == H0:
                assert fuse_step2(dec, "OR") == H0

    def test_validation(self):
        with pytest.raises(ValueError):
            fuse_step2((H0, H0), "AND")
        with pytest.raises(ValueError):
            fuse_step2((H0, H0, H0), "XOR")

    def test_steps_fusion(self):
        assert fuse_steps(H0, H0) == H0
        assert fuse_steps(H1, H0) == H1
        assert fuse_steps(H0, H1) == H1

    def test_identify(self):
        assert identify(2, 2, 5) == 2
        assert identify(1, 1, 1) == 1
        assert identify(5, 2, 2) == 2
        assert identify(1, 2, 3) == 1   # three-way tie -> position index


class TestMeasurement:
    def test_derives_position(self):
        m = Measurement(z=100.0, y=90.0)
        assert m.p_hat.real == pytest.approx(0.0, abs=1e-9)
        assert m.p_hat.imag == pytest.approx(100.0)

    def test_rejects_inconsistent_position(self):
        with pytest.raises(ValueError):
            Measurement(z=100.0, y=0.0, p_hat=100.0 + 5j)

    def test_distance_only(self):
        m = Measurement(z=100.0)
        assert m.y is None and m.p_hat is None
        with pytest.raises(ValueError):
            Measurement(z=100.0, p_hat=100 + 0j)


class TestAlgorithm1:
    def test_clean_alice(self):
        m = Measurement(z=300.0, y=90.0)
        rec = algorithm1(m, D, THETA, P, THR, truth=2)
        assert rec.final == H0
        assert rec.identified == 2
        assert rec.step1 == H0
        assert rec.test_decisions == (H0, H0, H0)

    def test_eve_outside(self):
        m = Measurement(z=800.0, y=30.0)
        rec = algorithm1(m, D, THETA, P, THR, truth=-1)
        assert rec.step1 == H1
        assert rec.final == H1
        assert rec.identified is None

    def test_eve_inside_off_every_pr(self):
        m = Measurement(z=150.0, y=45.0)  # 50 m / 15 deg from everything
        rec = algorithm1(m, D, THETA, P, THR, truth=-1)
        assert rec.step1 == H0
        assert rec.test_decisions == (H1, H1, H1)
        assert rec.final == H1

    def test_distance_only_mode(self):
        rec = algorithm1(Measurement(z=200.3), D, THETA, P, THR, truth=1,
                         mode="distance_only")
        assert rec.final == H0
        assert rec.identified == 1
        assert rec.test_stats[0] is None and rec.test_stats[2] is None
        assert rec.ml_indices == (None, 1, None)

    def test_full_mode_needs_aoa(self):
        with pytest.raises(ValueError):
            algorithm1(Measurement(z=200.0), D, THETA, P, THR, truth=1)

    def test_threshold_monotonicity(self):
        # enlarging any eps never flips an H0 decision to H1
        rng = np.random.default_rng(1)
        base = THR
        larger = Thresholds(d0=500.0, eps_p=5.0, eps_d=5.0, eps_theta=5.0)
        for _ in range(300):
            m = Measurement(z=float(rng.uniform(0, 700)),
                            y=float(rng.uniform(0, 180)))
            r1 = algorithm1(m, D, THETA, P, base, truth=0)
            r2 = algorithm1(m, D, THETA, P, larger, truth=0)
            for a, b in zip(r1.test_decisions, r2.test_decisions):
                if a == H0:
                    assert b == H0

    def test_position_threshold_limits(self):
        # eps_p -> infinity always authenticates; a vanishing eps_p
        # authenticates only an exact match
        rng = np.random.default_rng(2)
        huge = Thresholds(d0=500.0, eps_p=1e12, eps_d=1.0, eps_theta=1.0)
        tiny = Thresholds(d0=500.0, eps_p=1e-15, eps_d=1.0, eps_theta=1.0)
        for _ in range(100):
            m = Measurement(z=float(rng.uniform(1, 500)),
                            y=float(rng.uniform(0, 180)))
            rec = algorithm1(m, D, THETA, P, huge, truth=0)
            assert rec.test_decisions[0] == H0
        exact = Measurement(z=200.0, y=60.0)
        rec = algorithm1(exact, D, THETA, P, tiny, truth=1)
        assert rec.test_decisions[0] == H0
        off = Measurement(z=200.0, y=60.1)
        rec = algorithm1(off, D, THETA, P, tiny, truth=1)
        assert rec.test_decisions[0] == H1

    def test_determinism(self):
        m = Measurement(z=233.7, y=71.2)
        r1 = algorithm1(m, D, THETA, P, THR, truth=0)
        r2 = algorithm1(m, D, THETA, P, THR, truth=0)
        assert r1 == r2

    def test_record_identification_invariant(self):
        with pytest.raises(ValueError):
            DecisionRecord(step1=H0, test_stats=(0, 0, 0),
                           ml_indices=(0, 0, 0), test_decisions=(H0, H0, H0),
                           fused_step2={"AND": H0, "OR": H0, "MV": H0},
                           final=H0, identified=None, truth=0)
