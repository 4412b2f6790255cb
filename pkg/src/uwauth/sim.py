"""Monte Carlo engine: per-slot trials, SNR sweeps and rate estimation.

Randomness protocol: each (master seed, SNR point) pair derives one numpy
SeedSequence stream, from which every trial variable is drawn vectorized in
a fixed order. A trial's randomness is therefore a pure function of
(seed, snr index, trial index), independent of scheduling and worker count,
and sweeps are bit-identical for any parallelism degree.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import detect
from .acoustics import AcousticParams, NoiseCovariance, pathloss_linear
from .detect import DecisionRecord, Measurement, Thresholds, H0, H1
from .geometry import (Deployment, EveScenario, InsideUniform,
                       OutsideRing, PolarPosition, UniformDistance,
                       ground_truth)
from .ranging import (SlotTiming, TemplateBank, WhitenedBank, estimate_pr,
                      ml_toa_batch, rtt_to_distance)

EVE = -1  # occupant label for the adversary

OCCUPANT_LAWS = ("equal", "alice_only", "eve_only")
CHANNEL_MODES = ("awgn_features", "colored_waveform")
DETECTION_MODES = ("full", "distance_only")


@dataclass(frozen=True)
class TrialPlan:
    """Sweep plan; SNR is 1/sigma^2 and sets the measurement quality."""

    snr_grid_db: tuple
    n_trials: int
    seed: int
    occupant_law: str = "equal"
    channel_mode: str = "awgn_features"
    detection_mode: str = "full"
    step2_rule: str = "AND"

    def __post_init__(self):
        if len(self.snr_grid_db) == 0:
            raise ValueError("SNR grid must not be empty")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.occupant_law not in OCCUPANT_LAWS:
            raise ValueError(f"unknown occupant law {self.occupant_law!r}")
        if self.channel_mode not in CHANNEL_MODES:
            raise ValueError(f"unknown channel mode {self.channel_mode!r}")
        if self.detection_mode not in DETECTION_MODES:
            raise ValueError(f"unknown detection mode {self.detection_mode!r}")
        # the waveform chain estimates distance only; the feature chain
        # carries all three fingerprints
        if self.channel_mode == "awgn_features" and \
                self.detection_mode != "full":
            raise ValueError("awgn_features pairs with detection_mode=full")
        if self.channel_mode == "colored_waveform" and \
                self.detection_mode != "distance_only":
            raise ValueError(
                "colored_waveform pairs with detection_mode=distance_only")

    def sigma(self, point: int) -> float:
        snr = 10.0 ** (self.snr_grid_db[point] / 10.0)
        return float(1.0 / np.sqrt(snr))


@dataclass(frozen=True)
class AwgnChannel:
    """Feature-level common measurement noise; nothing to precompute."""


@dataclass(frozen=True)
class ColoredChannel:
    """Waveform-level channel: pathloss plus colored slot noise."""

    params: AcousticParams
    bank: TemplateBank
    cov_norm: NoiseCovariance       # sigma2 = 1; per-point scale is 1/SNR
    whitened: WhitenedBank
    timing: SlotTiming
    pt_linear: float


@dataclass
class Engine:
    """Immutable trial context plus a per-point table cache."""

    scenario_id: str
    deployment: Deployment
    thresholds: Thresholds
    eve_scenario: EveScenario
    plan: TrialPlan
    channel: Union[AwgnChannel, ColoredChannel] = field(
        default_factory=AwgnChannel)

    def __post_init__(self):
        self._tables = {}
        d, theta, p = ground_truth(self.deployment)
        self.d, self.theta, self.p = d, theta, p

    def table(self, point: int) -> dict:
        if point not in self._tables:
            self._tables[point] = _build_table(self, point)
        return self._tables[point]


def snap_deployment_to_grid(dep: Deployment, timing: SlotTiming) -> Deployment:
    """Snap node distances to the round-trip sample grid.

    The integer-sample ToA search can only report on-grid distances; leaving
    ground truth off-grid would bias every residual by up to half a cell.
    """
    grid = timing.grid_meters()
    snapped = tuple(
        PolarPosition(max(round(n.distance / grid), 1) * grid, n.aoa)
        for n in dep.alice)
    eve = PolarPosition(max(round(dep.eve.distance / grid), 1) * grid,
                        dep.eve.aoa)
    return Deployment(d0=dep.d0, alice=snapped, eve=eve, d_min=dep.d_min)


def _eve_positions(engine: Engine, u_d: np.ndarray, u_a: np.ndarray):
    """Per-trial Eve (distance, aoa) arrays from raw uniforms."""
    dep, sc = engine.deployment, engine.eve_scenario
    n = u_d.size
    if isinstance(sc, OutsideRing):
        lo, hi = dep.d0 + sc.epsilon, sc.k * dep.d0
        if hi <= lo:
            raise ValueError("empty ring: k*d0 <= d0 + epsilon")
        return lo + u_d * (hi - lo), 180.0 * u_a
    if isinstance(sc, InsideUniform):
        d = np.sqrt(dep.d_min ** 2 + u_d * (dep.d0 ** 2 - dep.d_min ** 2))
        return d, 180.0 * u_a
    if isinstance(sc, UniformDistance):
        return sc.lo + u_d * (sc.hi - sc.lo), 180.0 * u_a
    # deterministic placements: the pre-placed Eve of the deployment
    return (np.full(n, dep.eve.distance), np.full(n, dep.eve.aoa))


def _build_table(engine: Engine, point: int) -> dict:
    """All random inputs of one SNR point, drawn in a fixed order."""
    plan = engine.plan
    n = plan.n_trials
    rng = np.random.default_rng(
        np.random.SeedSequence([int(plan.seed) & 0xFFFFFFFFFFFFFFFF, point]))
    u_occ = rng.random(n)
    u_eve_d = rng.random(n)
    u_eve_a = rng.random(n)
    m = engine.deployment.m
    if plan.occupant_law == "equal":
        occ = np.minimum((u_occ * (m + 1)).astype(int), m)
        occ = np.where(occ == m, EVE, occ)
    elif plan.occupant_law == "alice_only":
        occ = np.minimum((u_occ * m).astype(int), m - 1)
    else:
        occ = np.full(n, EVE, dtype=int)

    eve_d, eve_a = _eve_positions(engine, u_eve_d, u_eve_a)
    is_eve = occ == EVE
    d_true = np.where(is_eve, eve_d, engine.d[np.where(is_eve, 0, occ)])
    a_true = np.where(is_eve, eve_a, engine.theta[np.where(is_eve, 0, occ)])

    table = {"occ": occ, "d_true": d_true, "a_true": a_true}
    sigma = plan.sigma(point)

    if plan.channel_mode == "awgn_features":
        n_z = rng.standard_normal(n)
        n_y = rng.standard_normal(n)
        z_raw = d_true + sigma * n_z
        clamped = z_raw < 0.0
        table["z"] = np.where(clamped, 0.0, z_raw)
        table["y"] = a_true + sigma * n_y
        table["clamped"] = clamped
        return table

    ch: ColoredChannel = engine.channel
    timing = ch.timing
    grid = timing.grid_meters()
    q = ch.bank.q
    idx = np.clip(np.round(d_true / grid).astype(int), 1, q - 1)
    d_eff = idx * grid
    pr = ch.pt_linear / pathloss_linear(d_eff, ch.params.carrier_khz,
                                        ch.params.nu)
    g = rng.standard_normal((n, q))
    noise = sigma * (g @ ch.cov_norm.factor.T)
    ys = np.sqrt(pr)[:, None] * ch.bank.s_unit[idx] + noise
    toa = ml_toa_batch(ys, ch.whitened)
    z = np.empty(n)
    clamped = np.zeros(n, dtype=bool)
    for i, t in enumerate(toa):
        z[i], clamped[i] = rtt_to_distance(timing.toa_seconds(int(t)),
                                           timing.t0, timing.switching_delay)
    table.update({"z": z, "y": None, "toa": toa, "true_index": idx,
                  "d_eff": d_eff, "clamped": clamped, "ys": ys})
    return table


def run_trial(engine: Engine, point: int, trial: int) -> DecisionRecord:
    """One slot's decision record; reads the deterministic trial table."""
    t = engine.table(point)
    if not (0 <= trial < engine.plan.n_trials):
        raise ValueError(f"trial index {trial} outside plan")
    z = float(t["z"][trial])
    truth = int(t["occ"][trial])
    flags = int(t["clamped"][trial])
    if engine.plan.detection_mode == "full":
        meas = Measurement(z=z, y=float(t["y"][trial]))
    else:
        meas = Measurement(z=z)
    return detect.algorithm1(meas, engine.d, engine.theta, engine.p,
                             engine.thresholds, truth,
                             mode=engine.plan.detection_mode,
                             step2_rule=engine.plan.step2_rule, flags=flags)


# ---------------------------------------------------------------------------
# Vectorized per-point aggregation

_FULL_TESTS = ("test2a", "test2b", "test2c")


@dataclass
class PointCounts:
    """Integer counters of one SNR point; aggregation is order-free."""

    n_trials: int = 0
    n_alice: int = 0
    n_eve: int = 0
    flags: int = 0
    inclusion_violations: int = 0
    fa: dict = field(default_factory=dict)     # key -> H1 count among Alice
    md: dict = field(default_factory=dict)     # key -> H0 count among Eve
    mc_raw: dict = field(default_factory=dict)  # per-test misident among Alice
    n_auth_alice: int = 0
    mc_gated: int = 0


def _point_counts(engine: Engine, point: int) -> PointCounts:
    t = engine.table(point)
    thr = engine.thresholds
    occ = t["occ"]
    z = t["z"]
    alice = occ >= 0
    eve = ~alice

    c = PointCounts(n_trials=occ.size, n_alice=int(alice.sum()),
                    n_eve=int(eve.sum()), flags=int(t["clamped"].sum()))

    step1_h1 = z > thr.d0
    k_res = np.abs(z[:, None] - engine.d[None, :])
    i_d = np.argmin(k_res, axis=1)
    k_star = k_res[np.arange(occ.size), i_d]
    dec_d_h1 = k_star > thr.eps_d

    def count(key, h1_vec):
        c.fa[key] = int(np.sum(h1_vec & alice))
        c.md[key] = int(np.sum(~h1_vec & eve))

    count("step1", step1_h1)
    count("test2b", dec_d_h1)
    c.mc_raw["test2b"] = int(np.sum(alice & (i_d != occ)))

    if engine.plan.detection_mode == "distance_only":
        final_h1 = step1_h1 | dec_d_h1
        count("final", final_h1)
        for rule in detect.FUSION_RULES:
            count(f"step2_{rule}", dec_d_h1)
        auth_alice = alice & ~final_h1
        c.n_auth_alice = int(auth_alice.sum())
        c.mc_gated = int(np.sum(auth_alice & (i_d != occ)))
        return c

    y = t["y"]
    p_hat = z * np.exp(1j * np.deg2rad(y))
    j_res = np.abs(p_hat[:, None] - engine.p[None, :])
    i_p = np.argmin(j_res, axis=1)
    j_star = j_res[np.arange(occ.size), i_p]
    l_res = np.abs(y[:, None] - engine.theta[None, :])
    i_t = np.argmin(l_res, axis=1)
    l_star = l_res[np.arange(occ.size), i_t]
    dec_p_h1 = j_star > thr.eps_p
    dec_t_h1 = l_star > thr.eps_theta

    count("test2a", dec_p_h1)
    count("test2c", dec_t_h1)
    c.mc_raw["test2a"] = int(np.sum(alice & (i_p != occ)))
    c.mc_raw["test2c"] = int(np.sum(alice & (i_t != occ)))

    n_h1 = dec_p_h1.astype(int) + dec_d_h1.astype(int) + dec_t_h1.astype(int)
    fused_h1 = {"AND": n_h1 > 0, "OR": n_h1 == 3, "MV": n_h1 >= 2}
    for rule, vec in fused_h1.items():
        count(f"step2_{rule}", vec)

    # authenticated-set inclusions: H0(AND) <= H0(MV) <= H0(OR)
    and_h0, mv_h0, or_h0 = (~fused_h1["AND"], ~fused_h1["MV"],
                            ~fused_h1["OR"])
    c.inclusion_violations = int(np.sum((and_h0 & ~mv_h0) | (mv_h0 & ~or_h0)))

    final_h1 = step1_h1 | fused_h1[engine.plan.step2_rule]
    count("final", final_h1)

    ident = np.where(
        (i_p == i_d) | (i_p == i_t), i_p, np.where(i_d == i_t, i_d, i_p))
    auth_alice = alice & ~final_h1
    c.n_auth_alice = int(auth_alice.sum())
    c.mc_gated = int(np.sum(auth_alice & (ident != occ)))
    return c


# ---------------------------------------------------------------------------
# Rates and curves

def wald_halfwidth(p: float, n: int) -> float:
    """95% Wald confidence half-width, 1.96 * sqrt(p(1-p)/n)."""
    return 1.96 * np.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class RatePoint:
    """Error rates of one (curve, SNR) cell; absent rates stay None."""

    snr_db: float
    p_fa: float | None = None
    p_fa_ci: float | None = None
    n_fa_trials: int = 0
    p_md: float | None = None
    p_md_ci: float | None = None
    n_md_trials: int = 0
    p_mc: float | None = None
    p_mc_ci: float | None = None
    n_mc_trials: int = 0
    flags: int = 0


@dataclass(frozen=True)
class ErrorRateCurve:
    """One test/fusion family across the SNR grid."""

    test: str
    fusion: str
    scenario_id: str
    source: str                    # "montecarlo" | "analytic"
    points: tuple


def _rate(count: int, n: int):
    if n == 0:
        return None, None
    p = count / n
    return p, wald_halfwidth(p, n)


def estimate_rates(records) -> RatePoint:
    """Conditional rates of a record batch (final decision + identification).

    P_fa and P_md condition on the occupant class; P_mc conditions on
    authenticated legitimate slots. Empty denominators yield absent rates.
    """
    records = list(records)
    if not records:
        raise ValueError("empty record batch")
    alice = [r for r in records if r.truth != EVE]
    eve = [r for r in records if r.truth == EVE]
    auth_alice = [r for r in alice if r.final == H0]
    p_fa, fa_ci = _rate(sum(r.final == H1 for r in alice), len(alice))
    p_md, md_ci = _rate(sum(r.final == H0 for r in eve), len(eve))
    p_mc, mc_ci = _rate(sum(r.identified != r.truth for r in auth_alice),
                        len(auth_alice))
    return RatePoint(snr_db=float("nan"), p_fa=p_fa, p_fa_ci=fa_ci,
                     n_fa_trials=len(alice), p_md=p_md, p_md_ci=md_ci,
                     n_md_trials=len(eve), p_mc=p_mc, p_mc_ci=mc_ci,
                     n_mc_trials=len(auth_alice),
                     flags=sum(r.flags for r in records))


def _curve_keys(plan: TrialPlan):
    keys = [("step1", "")]
    if plan.detection_mode == "full":
        keys += [(t, "") for t in _FULL_TESTS]
    else:
        keys += [("test2b", "")]
    keys += [("step2", rule) for rule in detect.FUSION_RULES]
    keys += [("final", plan.step2_rule), ("identification", "MV")]
    return keys


def _point_to_rates(counts: PointCounts, snr_db: float, plan: TrialPlan):
    """RatePoints of every curve key from one point's counters."""
    out = {}
    for key in _curve_keys(plan):
        test, fusion = key
        if test == "identification":
            p_mc, ci = _rate(counts.mc_gated, counts.n_auth_alice)
            out[key] = RatePoint(snr_db=snr_db, p_mc=p_mc, p_mc_ci=ci,
                                 n_mc_trials=counts.n_auth_alice,
                                 flags=counts.flags)
            continue
        ckey = test if (fusion == "" or test == "final") else \
            f"{test}_{fusion}"
        p_fa, fa_ci = _rate(counts.fa[ckey], counts.n_alice)
        p_md, md_ci = _rate(counts.md[ckey], counts.n_eve)
        p_mc = mc_ci = None
        n_mc = 0
        if test in counts.mc_raw:
            p_mc, mc_ci = _rate(counts.mc_raw[test], counts.n_alice)
            n_mc = counts.n_alice
        out[key] = RatePoint(snr_db=snr_db, p_fa=p_fa, p_fa_ci=fa_ci,
                             n_fa_trials=counts.n_alice, p_md=p_md,
                             p_md_ci=md_ci, n_md_trials=counts.n_eve,
                             p_mc=p_mc, p_mc_ci=mc_ci, n_mc_trials=n_mc,
                             flags=counts.flags)
    return out


def _one_point(args):
    engine, point = args
    counts = _point_counts(engine, point)
    engine._tables.clear()  # tables are large; workers rebuild on demand
    return counts


def run_sweep(engine: Engine, workers: int = 1, progress: bool = False,
              check_inclusions: bool = True):
    """Run the full SNR sweep; returns (curves, counts_per_point).

    Deterministic for any worker count: points are independent work items
    whose randomness derives from (seed, point) only, and results are
    reassembled in grid order.
    """
    plan = engine.plan
    n_points = len(plan.snr_grid_db)
    jobs = [(engine, p) for p in range(n_points)]
    if workers > 1 and n_points > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(min(workers, n_points)) as pool:
            counts = pool.map(_one_point, jobs, chunksize=1)
    else:
        counts = []
        for job in jobs:
            counts.append(_one_point(job))
            if progress:
                print(f"[{engine.scenario_id}] point {job[1] + 1}/{n_points} "
                      f"(snr {plan.snr_grid_db[job[1]]} dB) done",
                      file=sys.stderr)
    if check_inclusions:
        bad = sum(c.inclusion_violations for c in counts)
        if bad:
            raise AssertionError(
                f"fusion inclusion violated on {bad} trials")
    curves = {}
    for key in _curve_keys(plan):
        pts = tuple(_point_to_rates(c, plan.snr_grid_db[i], plan)[key]
                    for i, c in enumerate(counts))
        curves[key] = ErrorRateCurve(test=key[0], fusion=key[1],
                                     scenario_id=engine.scenario_id,
                                     source="montecarlo", points=pts)
    return curves, counts


# ---------------------------------------------------------------------------
# Monte Carlo vs analytic comparison

@dataclass(frozen=True)
class ComparisonRow:
    snr_db: float
    mc: float
    analytic: float
    se: float
    flagged: bool


@dataclass(frozen=True)
class ComparisonReport:
    label: str
    rows: tuple

    @property
    def n_flags(self) -> int:
        return sum(r.flagged for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.n_flags == 0


def compare_mc_analytic(curve_mc: ErrorRateCurve, curve_an: ErrorRateCurve,
                        which: str = "p_md",
                        n_sigma: float = 3.0) -> ComparisonReport:
    """Flag grid points where MC and analytic rates disagree beyond noise.

    The comparison scale is the binomial standard error, taking the larger
    of the MC-estimate-based and analytic-value-based versions so that
    near-zero empirical rates do not collapse the tolerance.
    """
    snr_mc = [p.snr_db for p in curve_mc.points]
    snr_an = [p.snr_db for p in curve_an.points]
    if snr_mc != snr_an:
        raise ValueError("SNR grids differ between curves")
    n_attr = {"p_fa": "n_fa_trials", "p_md": "n_md_trials",
              "p_mc": "n_mc_trials"}[which]
    rows = []
    for mc_pt, an_pt in zip(curve_mc.points, curve_an.points):
        p_mc = getattr(mc_pt, which)
        p_an = getattr(an_pt, which)
        n = getattr(mc_pt, n_attr)
        if p_mc is None or p_an is None or n == 0:
            raise ValueError(f"missing {which} at snr {mc_pt.snr_db}")
        se_mc = np.sqrt(p_mc * (1.0 - p_mc) / n)
        se_an = np.sqrt(max(p_an, 0.0) * max(1.0 - p_an, 0.0) / n)
        se = max(se_mc, se_an)
        flagged = abs(p_mc - p_an) > n_sigma * se
        rows.append(ComparisonRow(snr_db=mc_pt.snr_db, mc=p_mc, analytic=p_an,
                                  se=se, flagged=bool(flagged)))
    label = f"{curve_mc.test}/{which}"
    return ComparisonReport(label=label, rows=tuple(rows))


# ---------------------------------------------------------------------------
# Estimator-level Monte Carlo (waveform channel validation)

def toa_trials(wb: WhitenedBank, t1: int, pr: float, snr: float, n: int,
               seed: int, use_true_pr: bool = False) -> np.ndarray:
    """ToA estimates over n noisy slots with the true delay pinned at t1."""
    sigma = 1.0 / np.sqrt(snr)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x70A]))
    g = rng.standard_normal((n, wb.bank.q))
    noise = sigma * (g @ wb.cov.factor.T)
    ys = np.sqrt(pr) * wb.bank.s_unit[t1][None, :] + noise
    pr_hat = np.full(n, pr) if use_true_pr else estimate_pr(ys)
    return ml_toa_batch(ys, wb, pr_hat)


def moment_zscores(x: np.ndarray):
    """(skewness z, excess-kurtosis z) against normal-sample SEs."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    m2 = np.mean(xc ** 2)
    skew = np.mean(xc ** 3) / m2 ** 1.5
    kurt = np.mean(xc ** 4) / m2 ** 2 - 3.0
    return skew / np.sqrt(6.0 / n), kurt / np.sqrt(24.0 / n)
