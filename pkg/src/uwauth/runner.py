"""Experiment orchestration: simulated curves, analytic curves, validation.

Rate-convention note: the closed forms in `rates` weigh errors by the
1/(M+1) occupant prior, while Monte Carlo rates condition on the occupant
class. Curves emitted here (both sources) use the conditional convention,
applying the documented (M+1)/M and (M+1) conversions to the analytic
values, so the two sources are directly comparable point by point.
"""

from __future__ import annotations

import numpy as np

from . import rates
from .config import ExperimentConfig, build_engine
from .geometry import OutsideRing, UniformDistance, ground_truth
from .ranging import per_node_sigma
from .sim import (ColoredChannel, Engine, ErrorRateCurve, RatePoint,
                  compare_mc_analytic, run_sweep)


def simulate_config(cfg: ExperimentConfig, workers: int = 1,
                    progress: bool = False):
    """Monte Carlo sweep for a config; returns (engine, curves, counts)."""
    engine = build_engine(cfg)
    curves, counts = run_sweep(engine, workers=workers, progress=progress)
    return engine, curves, counts


def _scenario_k_epsilon(cfg: ExperimentConfig):
    eve = cfg.eve
    if isinstance(eve, OutsideRing):
        return eve.k, eve.epsilon
    if isinstance(eve, UniformDistance):
        return eve.hi / cfg.geometry.d0, 1.0
    return 2.0, 1.0


def analytic_context(cfg: ExperimentConfig, engine: Engine, snr_db: float,
                     sigma_scale: float = 1.0) -> rates.AnalyticContext:
    """Closed-form context at one SNR point.

    The feature-noise channel uses the common sigma = 1/sqrt(SNR); the
    waveform channel derives per-node sigmas from the ranging variance
    expression with each node's own pathloss. sigma_scale is a validation
    test hook that deliberately mis-scales the analytic sigmas.
    """
    snr = 10.0 ** (snr_db / 10.0)
    k, epsilon = _scenario_k_epsilon(cfg)
    d, theta, _ = ground_truth(engine.deployment)
    if cfg.channel_mode == "awgn_features":
        sigma = sigma_scale / np.sqrt(snr)
        return rates.AnalyticContext.common_sigma(
            d, theta, cfg.geometry.d0, cfg.geometry.d_min, k, epsilon, sigma)
    ch: ColoredChannel = engine.channel
    ref_delay = int(np.argmax(np.sum(ch.bank.s_unit ** 2, axis=1)))
    s_dot = ch.bank.d_unit[ref_delay]
    sigma_alice, sigma_of_d = per_node_sigma(
        engine.deployment, ch.params, snr, ch.pt_linear, s_dot, ch.cov_norm,
        ch.timing.t_s_sample,
        textbook=(cfg.colored.crb_form == "textbook"))
    if sigma_scale != 1.0:
        base_fn = sigma_of_d
        sigma_alice = sigma_alice * sigma_scale

        def sigma_of_d(x, _fn=base_fn):
            return _fn(x) * sigma_scale

    return rates.AnalyticContext(
        d=d, theta=theta, d0=cfg.geometry.d0, d_min=cfg.geometry.d_min,
        k=k, epsilon=epsilon, sigma_alice=np.asarray(sigma_alice),
        sigma_eve=sigma_of_d)


def analytic_curves(cfg: ExperimentConfig, engine: Engine | None = None,
                    sigma_scale: float = 1.0) -> dict:
    """Closed-form curves over the plan's SNR grid, conditional convention.

    Emits step1 and test2b false-alarm/missed-detection curves plus
    identification misclassification (conditional and verbatim priors; the
    AoA analog only when the channel carries an AoA measurement).
    """
    if engine is None:
        engine = build_engine(cfg)
    m = cfg.geometry.m
    fa_scale = (m + 1) / m          # joint -> conditional on a legitimate sender
    md_scale = m + 1                # joint -> conditional on the adversary

    grids = {}
    for snr_db in cfg.plan.snr_grid_db:
        ctx = analytic_context(cfg, engine, snr_db, sigma_scale)
        vals = {
            ("step1", "p_fa"): rates.pfa_test1(ctx) * fa_scale,
            ("step1", "p_md"): rates.pmd_bar_test1(ctx) * md_scale,
            ("test2b", "p_fa"):
                rates.pfa_test2b(ctx, cfg.thresholds.eps_d) * fa_scale,
            ("test2b", "p_md"):
                rates.pmd_bar_test2b(ctx, cfg.thresholds.eps_d) * md_scale,
            ("ident_d", "cond"):
                rates.pe_misclassification(ctx, "distance",
                                           conditional=True)[0],
            ("ident_d", "verbatim"):
                rates.pe_misclassification(ctx, "distance",
                                           conditional=False)[0],
        }
        if cfg.plan.detection_mode == "full":
            vals[("ident_a", "cond")] = rates.pe_misclassification(
                ctx, "aoa", conditional=True)[0]
            vals[("ident_a", "verbatim")] = rates.pe_misclassification(
                ctx, "aoa", conditional=False)[0]
        grids[snr_db] = vals

    def curve(test, fusion, fields):
        pts = []
        for snr_db in cfg.plan.snr_grid_db:
            pts.append(RatePoint(snr_db=snr_db, **fields(grids[snr_db])))
        return ErrorRateCurve(test=test, fusion=fusion,
                              scenario_id=cfg.scenario_id, source="analytic",
                              points=tuple(pts))

    out = {
        ("step1", ""): curve("step1", "", lambda v: {
            "p_fa": v[("step1", "p_fa")], "p_md": v[("step1", "p_md")]}),
        ("test2b", ""): curve("test2b", "", lambda v: {
            "p_fa": v[("test2b", "p_fa")], "p_md": v[("test2b", "p_md")],
            "p_mc": v[("ident_d", "cond")]}),
        ("identification", "MV"): curve("identification", "MV", lambda v: {
            "p_mc": v[("ident_d", "cond")]}),
        ("test2b-verbatim", ""): curve("test2b-verbatim", "", lambda v: {
            "p_mc": v[("ident_d", "verbatim")]}),
    }
    if cfg.plan.detection_mode == "full":
        out[("test2c", "")] = curve("test2c", "", lambda v: {
            "p_mc": v[("ident_a", "cond")]})
        out[("test2c-verbatim", "")] = curve(
            "test2c-verbatim", "", lambda v: {
                "p_mc": v[("ident_a", "verbatim")]})
    return out


def validate_config(cfg: ExperimentConfig, workers: int = 1,
                    progress: bool = False, sigma_scale: float = 1.0):
    """Run both paths and compare what the Eve law makes comparable.

    P_fa comparisons are always valid (they do not involve Eve's prior).
    The step-1 missed-detection formula assumes Eve ~ U(d0+eps, k*d0)
    (the outside-ring law); the test-2b one assumes Eve ~ U(d_min, k*d0)
    (the uniform-distance law). Identification compares the ungated
    distance-test misclassification rate against the conditional-prior
    closed form.
    """
    engine, mc, _ = simulate_config(cfg, workers=workers, progress=progress)
    an = analytic_curves(cfg, engine, sigma_scale=sigma_scale)
    reports = [
        compare_mc_analytic(mc[("step1", "")], an[("step1", "")], "p_fa"),
        compare_mc_analytic(mc[("test2b", "")], an[("test2b", "")], "p_fa"),
        compare_mc_analytic(mc[("test2b", "")], an[("test2b", "")], "p_mc"),
    ]
    if isinstance(cfg.eve, OutsideRing):
        reports.append(compare_mc_analytic(mc[("step1", "")],
                                           an[("step1", "")], "p_md"))
    if isinstance(cfg.eve, UniformDistance):
        reports.append(compare_mc_analytic(mc[("test2b", "")],
                                           an[("test2b", "")], "p_md"))
    return engine, mc, an, reports
