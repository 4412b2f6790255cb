import numpy as np
import pytest

from uwauth.detect import H0, H1
from uwauth.geometry import InsideUniform, OutsideRing, make_deployment
from uwauth.detect import Thresholds
from uwauth.sim import (EVE, AwgnChannel, Engine, ErrorRateCurve,
                        RatePoint, TrialPlan, compare_mc_analytic,
                        estimate_rates, run_sweep, run_trial,
                        wald_halfwidth, _point_counts)

GRID = (-10.0, 0.0, 10.0)


def make_engine(n_trials=500, law="equal", seed=42,
                scenario=OutsideRing(k=2.0, epsilon=1.0), grid=GRID):
    dep = make_deployment(10, 500.0, 10.0, scenario, seed)
    plan = TrialPlan(snr_grid_db=grid, n_trials=n_trials, seed=seed,
                     occupant_law=law)
    thr = Thresholds(d0=500.0, eps_p=1.0, eps_d=1.0, eps_theta=1.0)
    return Engine(scenario_id="t", deployment=dep, thresholds=thr,
                  eve_scenario=scenario, plan=plan, channel=AwgnChannel())


class TestTrialPlan:
    def test_mode_pairing_enforced(self):
        with pytest.raises(ValueError):
            TrialPlan(snr_grid_db=GRID, n_trials=10, seed=1,
                      channel_mode="awgn_features",
                      detection_mode="distance_only")
        with pytest.raises(ValueError):
            TrialPlan(snr_grid_db=GRID, n_trials=10, seed=1,
                      channel_mode="colored_waveform",
                      detection_mode="full")

    def test_validation(self):
        with pytest.raises(ValueError):
            TrialPlan(snr_grid_db=(), n_trials=10, seed=1)
        with pytest.raises(ValueError):
            TrialPlan(snr_grid_db=GRID, n_trials=0, seed=1)
        with pytest.raises(ValueError):
            TrialPlan(snr_grid_db=GRID, n_trials=5, seed=1,
                      occupant_law="nobody")

    def test_sigma(self):
        plan = TrialPlan(snr_grid_db=(0.0, 20.0), n_trials=1, seed=1)
        assert plan.sigma(0) == pytest.approx(1.0)
        assert plan.sigma(1) == pytest.approx(0.1)


class TestRunTrial:
    def test_deterministic(self):
        e1 = make_engine()
        e2 = make_engine()
        for point in range(len(GRID)):
            for j in (0, 17, 499):
                assert run_trial(e1, point, j) == run_trial(e2, point, j)

    def test_zero_noise_alice_identified(self):
        e = make_engine(law="alice_only", grid=(200.0,))
        for j in range(50):
            rec = run_trial(e, 0, j)
            assert rec.final == H0
            assert rec.identified == rec.truth

    def test_zero_noise_eve_outside_flagged(self):
        e = make_engine(law="eve_only", grid=(200.0,))
        for j in range(50):
            rec = run_trial(e, 0, j)
            assert rec.step1 == H1
            assert rec.final == H1

    def test_matches_vectorized_counts(self):
        e = make_engine(n_trials=400)
        counts = _point_counts(e, 1)
        records = [run_trial(e, 1, j) for j in range(400)]
        alice = [r for r in records if r.truth != EVE]
        eve = [r for r in records if r.truth == EVE]
        assert counts.n_alice == len(alice)
        assert counts.n_eve == len(eve)
        assert counts.fa["step1"] == sum(r.step1 == H1 for r in alice)
        assert counts.md["step1"] == sum(r.step1 == H0 for r in eve)
        assert counts.fa["test2b"] == sum(
            r.test_decisions[1] == H1 for r in alice)
        assert counts.fa["step2_AND"] == sum(
            r.fused_step2["AND"] == H1 for r in alice)
        assert counts.md["step2_MV"] == sum(
            r.fused_step2["MV"] == H0 for r in eve)
        assert counts.fa["final"] == sum(r.final == H1 for r in alice)
        auth = [r for r in alice if r.final == H0]
        assert counts.n_auth_alice == len(auth)
        assert counts.mc_gated == sum(r.identified != r.truth for r in auth)
        assert counts.mc_raw["test2b"] == sum(
            r.ml_indices[1] != r.truth for r in alice)

    def test_out_of_range_trial(self):
        e = make_engine(n_trials=5)
        with pytest.raises(ValueError):
            run_trial(e, 0, 5)


class TestEstimateRates:
    def test_counting_example(self):
        e = make_engine(n_trials=4000, grid=(0.0,))
        records = [run_trial(e, 0, j) for j in range(800)]
        pt = estimate_rates(records)
        alice = [r for r in records if r.truth != EVE]
        eve = [r for r in records if r.truth == EVE]
        assert pt.n_fa_trials == len(alice)
        assert pt.n_md_trials == len(eve)
        assert pt.p_fa == sum(r.final == H1 for r in alice) / len(alice)
        assert pt.p_md == sum(r.final == H0 for r in eve) / len(eve)

    def test_absent_rates(self):
        e = make_engine(n_trials=200, law="alice_only", grid=(10.0,))
        records = [run_trial(e, 0, j) for j in range(200)]
        pt = estimate_rates(records)
        assert pt.p_md is None and pt.n_md_trials == 0
        assert pt.p_fa is not None

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            estimate_rates([])


class TestWald:
    def test_formula(self):
        assert wald_halfwidth(0.5, 100) == pytest.approx(
            1.96 * np.sqrt(0.25 / 100))
        # doubling n shrinks the half-width by sqrt(2), by the formula
        assert wald_halfwidth(0.3, 1000) / wald_halfwidth(0.3, 2000) == \
            pytest.approx(np.sqrt(2.0))


class TestRunSweep:
    def test_deterministic_across_workers(self):
        results = []
        for workers in (1, 4, 8):
            curves, counts = run_sweep(make_engine(n_trials=300),
                                       workers=workers)
            results.append((curves, counts))
        base_curves, base_counts = results[0]
        for curves, counts in results[1:]:
            assert curves == base_curves
            for a, b in zip(counts, base_counts):
                assert a == b

    def test_curve_families_full_mode(self):
        curves, _ = run_sweep(make_engine(n_trials=100))
        keys = set(curves)
        assert ("step1", "") in keys
        assert ("test2a", "") in keys and ("test2c", "") in keys
        assert ("step2", "AND") in keys and ("step2", "MV") in keys
        assert ("final", "AND") in keys
        assert ("identification", "MV") in keys

    def test_inclusion_violations_zero(self):
        _, counts = run_sweep(make_engine(n_trials=2000))
        assert sum(c.inclusion_violations for c in counts) == 0

    def test_rate_ordering_across_fusions(self):
        # P_md(AND) <= P_md(MV) <= P_md(OR); P_fa(OR) <= P_fa(MV) <= P_fa(AND)
        e = make_engine(n_trials=20000, scenario=InsideUniform(),
                        grid=(-5.0,))
        curves, _ = run_sweep(e)
        md = {r: curves[("step2", r)].points[0].p_md for r in
              ("AND", "OR", "MV")}
        fa = {r: curves[("step2", r)].points[0].p_fa for r in
              ("AND", "OR", "MV")}
        assert md["AND"] <= md["MV"] <= md["OR"]
        assert fa["OR"] <= fa["MV"] <= fa["AND"]


class TestCompare:
    def mk_curve(self, vals, n=1000, source="montecarlo"):
        pts = tuple(RatePoint(snr_db=s, p_md=v, n_md_trials=n)
                    for s, v in zip(GRID, vals))
        return ErrorRateCurve(test="step1", fusion="", scenario_id="t",
                              source=source, points=pts)

    def test_identical_curves_pass(self):
        mc = self.mk_curve([0.4, 0.2, 0.05])
        an = self.mk_curve([0.4, 0.2, 0.05], source="analytic")
        rep = compare_mc_analytic(mc, an, "p_md")
        assert rep.passed and rep.n_flags == 0

    def test_single_shifted_point_flagged(self):
        mc = self.mk_curve([0.4, 0.2, 0.05])
        se = np.sqrt(0.2 * 0.8 / 1000)
        an = self.mk_curve([0.4, 0.2 + 10 * se, 0.05], source="analytic")
        rep = compare_mc_analytic(mc, an, "p_md")
        assert rep.n_flags == 1
        assert [r.flagged for r in rep.rows] == [False, True, False]

    def test_grid_mismatch(self):
        mc = self.mk_curve([0.4, 0.2, 0.05])
        pts = tuple(RatePoint(snr_db=s + 1, p_md=v, n_md_trials=10)
                    for s, v in zip(GRID, [0.4, 0.2, 0.05]))
        an = ErrorRateCurve(test="step1", fusion="", scenario_id="t",
                            source="analytic", points=pts)
        with pytest.raises(ValueError):
            compare_mc_analytic(mc, an, "p_md")

    def test_near_zero_rates_use_analytic_se(self):
        # an empirical 0 against a tiny analytic value must not flag
        mc = self.mk_curve([0.0, 0.0, 0.0], n=100000)
        an = self.mk_curve([1e-12, 1e-9, 1e-7], source="analytic")
        rep = compare_mc_analytic(mc, an, "p_md")
        assert rep.passed


class TestColoredEngine:
    def make_colored(self, n_trials=200, grid=(0.0, 10.0)):
        import json

        from uwauth.cli import _presets
        from uwauth.config import parse_config, build_engine

        doc = _presets()["colored_q256"]
        doc["plan"] = dict(doc["plan"], n_trials=n_trials,
                           snr_grid_db=list(grid))
        return build_engine(parse_config(json.dumps(doc)))

    def test_trial_table_deterministic(self):
        e1 = self.make_colored()
        e2 = self.make_colored()
        r1 = run_trial(e1, 0, 3)
        r2 = run_trial(e2, 0, 3)
        assert r1 == r2

    def test_distance_only_records(self):
        e = self.make_colored()
        rec = run_trial(e, 1, 0)
        assert rec.ml_indices[0] is None
        assert rec.test_stats[2] is None

    def test_snapped_truth_on_grid(self):
        e = self.make_colored()
        grid = e.channel.timing.grid_meters()
        for node in e.deployment.alice:
            assert node.distance / grid == pytest.approx(
                round(node.distance / grid), abs=1e-9)

    def test_high_snr_perfect_detection(self):
        e = self.make_colored(n_trials=300, grid=(40.0,))
        counts = _point_counts(e, 0)
        # exact ranging at 40 dB: every legitimate sender authenticated
        assert counts.fa["final"] == 0
