"""Experiment configuration: JSON parsing, validation, defaults, resolution.

Every key is validated (unknown keys are listed, violated constraints name
the offending field), defaults are filled in at parse time, and dB -> linear
conversions happen exactly once here so the resolved values can be embedded
in every result file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .acoustics import AcousticParams, build_covariance, identity_covariance, \
    noise_autocorrelation
from .detect import Thresholds
from .geometry import (Deployment, EveScenario, FixedPosition, InsideUniform,
                       OutsideRing, PolarPosition, UniformDistance,
                       WorstCaseAoA, WorstCaseDistance, make_deployment)
from .ranging import (ChipPulse, SlotTiming, TemplateBank, WhitenedBank,
                      gen_pn, SOUND_SPEED)
from .sim import (AwgnChannel, ColoredChannel, Engine, TrialPlan,
                  snap_deployment_to_grid)


class ConfigError(ValueError):
    """Configuration document rejected; message names fields/keys."""


DEFAULT_SNR_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)

_EVE_VARIANTS = ("outside_ring", "inside_uniform", "uniform_distance",
                 "worst_case_aoa", "worst_case_distance", "fixed")


def _check_keys(section: dict, allowed, where: str):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _get(section: dict, key: str, default, where: str, typ=None):
    val = section.get(key, default)
    if typ is not None and val is not None and not isinstance(val, typ):
        try:
            val = typ(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}.{key} has invalid type") from None
    return val


@dataclass(frozen=True)
class GeometryConfig:
    d0: float = 500.0
    m: int = 10
    d_min: float = 10.0
    seed: int = 1
    nodes: tuple | None = None      # explicit (distance, aoa) pairs

    def __post_init__(self):
        if not (0 <= self.d_min < self.d0):
            raise ConfigError("geometry.d_min must satisfy 0 <= d_min < d0")
        if self.m < 1:
            raise ConfigError("geometry.m must be >= 1")
        if self.nodes is not None and len(self.nodes) != self.m:
            raise ConfigError("geometry.nodes length must equal geometry.m")


@dataclass(frozen=True)
class ColoredConfig:
    n1_db: float = 50.0
    zeta: float = 1.8
    band_lo_khz: float = 8.0
    band_hi_khz: float = 12.0
    carrier_khz: float = 10.0
    nu: float = 1.5
    pt_db: float = 60.0             # dB re uPa; linear = 10^(pt_db/10)
    q: int = 256
    t_b: float = 1.04e-2
    t_s_sample: float = 5.2e-3
    t0: float = 0.0
    switching_delay: float = 0.1
    pn_length: int = 15
    pn_seed: int = 1
    pulse_shape: str = "gauss"
    pulse_width_chips: float = 0.5
    force_white: bool = False       # Cnorm = I special case
    crb_form: str = "factor4"       # sigma_d^2 form for analytic curves

    def __post_init__(self):
        if self.crb_form not in ("factor4", "textbook"):
            raise ConfigError(
                "channel.crb_form must be 'factor4' or 'textbook'")
        if self.q < 2:
            raise ConfigError("channel.q must be >= 2")
        if self.t_s_sample <= 0 or self.t_b <= 0:
            raise ConfigError("channel timing values must be positive")
        if self.t_s_sample > self.t_b / 2:
            raise ConfigError("channel.t_s_sample must be <= t_b/2")

    @property
    def pt_linear(self) -> float:
        return 10.0 ** (self.pt_db / 10.0)


@dataclass(frozen=True)
class PlanConfig:
    snr_grid_db: tuple = DEFAULT_SNR_GRID
    n_trials: int = 10000
    occupant_law: str = "equal"
    detection_mode: str = "full"
    step2_rule: str = "AND"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv",)

    def __post_init__(self):
        for fmt in self.formats:
            if fmt not in ("csv", "json"):
                raise ConfigError(f"outputs.formats entry {fmt!r} not in "
                                  "csv|json")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_id: str
    geometry: GeometryConfig
    eve: EveScenario
    channel_mode: str
    colored: ColoredConfig | None
    thresholds: Thresholds
    plan: TrialPlan
    outputs: OutputConfig


def _parse_eve(section: dict, geometry: GeometryConfig) -> EveScenario:
    variant = section.get("variant")
    if variant not in _EVE_VARIANTS:
        raise ConfigError(f"eve.variant must be one of {_EVE_VARIANTS}, "
                          f"got {variant!r}")
    try:
        if variant == "outside_ring":
            _check_keys(section, ("variant", "k", "epsilon"), "eve")
            return OutsideRing(k=_get(section, "k", 2.0, "eve", float),
                               epsilon=_get(section, "epsilon", 1.0, "eve",
                                            float))
        if variant == "inside_uniform":
            _check_keys(section, ("variant",), "eve")
            return InsideUniform()
        if variant == "uniform_distance":
            _check_keys(section, ("variant", "lo", "hi"), "eve")
            return UniformDistance(
                lo=_get(section, "lo", geometry.d_min, "eve", float),
                hi=_get(section, "hi", 2.0 * geometry.d0, "eve", float))
        if variant == "worst_case_aoa":
            _check_keys(section, ("variant", "target", "radial_offset"), "eve")
            return WorstCaseAoA(
                target=_get(section, "target", 0, "eve", int),
                radial_offset=_get(section, "radial_offset", 50.0, "eve",
                                   float))
        if variant == "worst_case_distance":
            _check_keys(section, ("variant", "target", "angular_offset"),
                        "eve")
            return WorstCaseDistance(
                target=_get(section, "target", 0, "eve", int),
                angular_offset=_get(section, "angular_offset", 10.0, "eve",
                                    float))
        _check_keys(section, ("variant", "distance", "aoa"), "eve")
        return FixedPosition(PolarPosition(
            _get(section, "distance", 300.0, "eve", float),
            _get(section, "aoa", 90.0, "eve", float)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"eve: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment document, filling defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    # "resolved" is the informational section result files embed; accepting
    # it lets an embedded config re-parse and re-run as-is
    _check_keys(doc, ("scenario_id", "geometry", "eve", "channel",
                      "thresholds", "plan", "outputs", "resolved"), "config")

    geo_sec = doc.get("geometry", {})
    _check_keys(geo_sec, ("d0", "m", "d_min", "seed", "nodes"), "geometry")
    nodes = geo_sec.get("nodes")
    if nodes is not None:
        try:
            nodes = tuple((float(n["distance"]), float(n["aoa"]))
                          for n in nodes)
        except (KeyError, TypeError) as exc:
            raise ConfigError(
                "geometry.nodes entries need distance and aoa") from exc
    try:
        geometry = GeometryConfig(
            d0=_get(geo_sec, "d0", 500.0, "geometry", float),
            m=_get(geo_sec, "m", 10, "geometry", int),
            d_min=_get(geo_sec, "d_min", 10.0, "geometry", float),
            seed=_get(geo_sec, "seed", 1, "geometry", int),
            nodes=nodes)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc

    eve = _parse_eve(doc.get("eve", {"variant": "outside_ring"}), geometry)

    ch_sec = dict(doc.get("channel", {}))
    mode = ch_sec.pop("mode", "awgn_features")
    if mode not in ("awgn_features", "colored_waveform"):
        raise ConfigError(f"channel.mode {mode!r} not in "
                          "awgn_features|colored_waveform")
    colored = None
    if mode == "awgn_features":
        _check_keys(ch_sec, (), "channel")
    else:
        _check_keys(ch_sec, ("n1_db", "zeta", "band_lo_khz", "band_hi_khz",
                             "carrier_khz", "nu", "pt_db", "q", "t_b",
                             "t_s_sample", "t0", "switching_delay",
                             "pn_length", "pn_seed", "pulse_shape",
                             "pulse_width_chips", "force_white", "crb_form"),
                    "channel")
        defaults = ColoredConfig()
        kwargs = {}
        for name in ("n1_db", "zeta", "band_lo_khz", "band_hi_khz",
                     "carrier_khz", "nu", "pt_db", "t_b", "t_s_sample", "t0",
                     "switching_delay", "pulse_width_chips"):
            kwargs[name] = _get(ch_sec, name, getattr(defaults, name),
                                "channel", float)
        for name in ("q", "pn_length", "pn_seed"):
            kwargs[name] = _get(ch_sec, name, getattr(defaults, name),
                                "channel", int)
        kwargs["pulse_shape"] = _get(ch_sec, "pulse_shape",
                                     defaults.pulse_shape, "channel", str)
        kwargs["force_white"] = bool(ch_sec.get("force_white",
                                                defaults.force_white))
        kwargs["crb_form"] = _get(ch_sec, "crb_form", defaults.crb_form,
                                  "channel", str)
        colored = ColoredConfig(**kwargs)
        try:
            AcousticParams(nu=colored.nu, n1_db=colored.n1_db,
                           zeta=colored.zeta,
                           band_lo_khz=colored.band_lo_khz,
                           band_hi_khz=colored.band_hi_khz,
                           carrier_khz=colored.carrier_khz)
        except ValueError as exc:
            raise ConfigError(f"channel: {exc}") from exc

    thr_sec = doc.get("thresholds", {})
    _check_keys(thr_sec, ("eps_p", "eps_d", "eps_theta"), "thresholds")
    try:
        thresholds = Thresholds(
            d0=geometry.d0,
            eps_p=_get(thr_sec, "eps_p", 1.0, "thresholds", float),
            eps_d=_get(thr_sec, "eps_d", 1.0, "thresholds", float),
            eps_theta=_get(thr_sec, "eps_theta", 1.0, "thresholds", float))
    except ValueError as exc:
        raise ConfigError(f"thresholds: {exc}") from exc

    plan_sec = doc.get("plan", {})
    _check_keys(plan_sec, ("snr_grid_db", "n_trials", "occupant_law",
                           "detection_mode", "step2_rule"), "plan")
    grid = plan_sec.get("snr_grid_db", list(DEFAULT_SNR_GRID))
    if not isinstance(grid, (list, tuple)) or len(grid) == 0:
        raise ConfigError("plan.snr_grid_db must be a non-empty list")
    default_mode = "distance_only" if mode == "colored_waveform" else "full"
    try:
        plan = TrialPlan(
            snr_grid_db=tuple(float(s) for s in grid),
            n_trials=_get(plan_sec, "n_trials", 10000, "plan", int),
            seed=geometry.seed,
            occupant_law=_get(plan_sec, "occupant_law", "equal", "plan", str),
            channel_mode=mode,
            detection_mode=_get(plan_sec, "detection_mode", default_mode,
                                "plan", str),
            step2_rule=_get(plan_sec, "step2_rule", "AND", "plan", str))
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from exc

    out_sec = doc.get("outputs", {})
    _check_keys(out_sec, ("directory", "formats"), "outputs")
    outputs = OutputConfig(
        directory=_get(out_sec, "directory", "out", "outputs", str),
        formats=tuple(out_sec.get("formats", ["csv"])))

    cfg = ExperimentConfig(
        scenario_id=str(doc.get("scenario_id", "default")),
        geometry=geometry, eve=eve, channel_mode=mode, colored=colored,
        thresholds=thresholds, plan=plan, outputs=outputs)
    _validate_cross_fields(cfg)
    return cfg


def _max_eve_distance(cfg: ExperimentConfig) -> float:
    eve = cfg.eve
    if isinstance(eve, OutsideRing):
        return eve.k * cfg.geometry.d0
    if isinstance(eve, UniformDistance):
        return eve.hi
    if isinstance(eve, FixedPosition):
        return eve.position.distance
    return cfg.geometry.d0


def _validate_cross_fields(cfg: ExperimentConfig):
    if isinstance(cfg.eve, (WorstCaseAoA, WorstCaseDistance)):
        if cfg.eve.target >= cfg.geometry.m:
            raise ConfigError("eve.target must index a deployed node")
    if cfg.channel_mode == "colored_waveform":
        col = cfg.colored
        span = _max_eve_distance(cfg)
        reach = (col.q - 1) * SOUND_SPEED * col.t_s_sample / 2.0
        if reach < span:
            raise ConfigError(
                f"channel slot covers {reach:.1f} m of round-trip range but "
                f"the scenario reaches {span:.1f} m; increase channel.q or "
                "t_s_sample")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_dict(cfg: ExperimentConfig,
                   deployment: Deployment | None = None) -> dict:
    """Fully resolved, JSON-serializable form (defaults and conversions in).

    Pass the engine's deployment when one is already built; otherwise the
    realized (and, for the waveform channel, grid-snapped) geometry is
    reconstructed here.
    """
    eve = cfg.eve
    if isinstance(eve, OutsideRing):
        eve_d = {"variant": "outside_ring", "k": eve.k, "epsilon": eve.epsilon}
    elif isinstance(eve, InsideUniform):
        eve_d = {"variant": "inside_uniform"}
    elif isinstance(eve, UniformDistance):
        eve_d = {"variant": "uniform_distance", "lo": eve.lo, "hi": eve.hi}
    elif isinstance(eve, WorstCaseAoA):
        eve_d = {"variant": "worst_case_aoa", "target": eve.target,
                 "radial_offset": eve.radial_offset}
    elif isinstance(eve, WorstCaseDistance):
        eve_d = {"variant": "worst_case_distance", "target": eve.target,
                 "angular_offset": eve.angular_offset}
    else:
        eve_d = {"variant": "fixed", "distance": eve.position.distance,
                 "aoa": eve.position.aoa}
    out = {
        "scenario_id": cfg.scenario_id,
        "geometry": {
            "d0": cfg.geometry.d0, "m": cfg.geometry.m,
            "d_min": cfg.geometry.d_min, "seed": cfg.geometry.seed,
            "nodes": None if cfg.geometry.nodes is None else
            [{"distance": d, "aoa": a} for d, a in cfg.geometry.nodes],
        },
        "eve": eve_d,
        "channel": {"mode": cfg.channel_mode},
        "thresholds": {"eps_p": cfg.thresholds.eps_p,
                       "eps_d": cfg.thresholds.eps_d,
                       "eps_theta": cfg.thresholds.eps_theta},
        "plan": {"snr_grid_db": list(cfg.plan.snr_grid_db),
                 "n_trials": cfg.plan.n_trials,
                 "occupant_law": cfg.plan.occupant_law,
                 "detection_mode": cfg.plan.detection_mode,
                 "step2_rule": cfg.plan.step2_rule},
        "outputs": {"directory": cfg.outputs.directory,
                    "formats": list(cfg.outputs.formats)},
        "resolved": {
            "sigma_grid": [1.0 / np.sqrt(10.0 ** (s / 10.0))
                           for s in cfg.plan.snr_grid_db],
        },
    }
    # realized geometry, so the experiment is repeatable even without the
    # seed's generator (colored mode records the grid-snapped values)
    if deployment is None:
        deployment = build_deployment(cfg)
        if cfg.colored is not None:
            timing = SlotTiming(t0=cfg.colored.t0,
                                switching_delay=cfg.colored.switching_delay,
                                t_s_sample=cfg.colored.t_s_sample)
            deployment = snap_deployment_to_grid(deployment, timing)
    out["resolved"]["nodes"] = [
        {"distance": n.distance, "aoa": n.aoa} for n in deployment.alice]
    out["resolved"]["eve_position"] = {
        "distance": deployment.eve.distance, "aoa": deployment.eve.aoa}
    if cfg.colored is not None:
        col = cfg.colored
        out["channel"].update({
            "n1_db": col.n1_db, "zeta": col.zeta,
            "band_lo_khz": col.band_lo_khz, "band_hi_khz": col.band_hi_khz,
            "carrier_khz": col.carrier_khz, "nu": col.nu, "pt_db": col.pt_db,
            "q": col.q, "t_b": col.t_b, "t_s_sample": col.t_s_sample,
            "t0": col.t0, "switching_delay": col.switching_delay,
            "pn_length": col.pn_length, "pn_seed": col.pn_seed,
            "pulse_shape": col.pulse_shape,
            "pulse_width_chips": col.pulse_width_chips,
            "force_white": col.force_white, "crb_form": col.crb_form,
        })
        out["resolved"]["pt_linear"] = col.pt_linear
        out["resolved"]["grid_meters"] = SOUND_SPEED * col.t_s_sample / 2.0
    return out


def build_deployment(cfg: ExperimentConfig) -> Deployment:
    geo = cfg.geometry
    if geo.nodes is not None:
        alice = tuple(PolarPosition(d, a) for d, a in geo.nodes)
        rng = np.random.default_rng(
            np.random.SeedSequence([geo.seed, 0xA11CE]))
        from .geometry import place_eve

        eve = place_eve(cfg.eve, geo.d0, geo.d_min, alice, rng)
        dep = Deployment(d0=geo.d0, alice=alice, eve=eve, d_min=geo.d_min)
    else:
        dep = make_deployment(geo.m, geo.d0, geo.d_min, cfg.eve, geo.seed)
    return dep


def build_engine(cfg: ExperimentConfig) -> Engine:
    """Deployment + channel precomputation for the Monte Carlo engine."""
    dep = build_deployment(cfg)
    if cfg.channel_mode == "awgn_features":
        return Engine(scenario_id=cfg.scenario_id, deployment=dep,
                      thresholds=cfg.thresholds, eve_scenario=cfg.eve,
                      plan=cfg.plan, channel=AwgnChannel())
    col = cfg.colored
    params = AcousticParams(nu=col.nu, n1_db=col.n1_db, zeta=col.zeta,
                            band_lo_khz=col.band_lo_khz,
                            band_hi_khz=col.band_hi_khz,
                            carrier_khz=col.carrier_khz)
    chips = gen_pn(col.pn_length, col.pn_seed)
    pulse = ChipPulse(shape=col.pulse_shape,
                      width_chips=col.pulse_width_chips)
    bank = TemplateBank.build(chips, col.t_b, col.t_s_sample, col.q, pulse)
    if col.force_white:
        cov = identity_covariance(col.q, 1.0)
    else:
        autocorr = noise_autocorrelation(params, col.t_s_sample, col.q)
        cov = build_covariance(autocorr, col.q, 1.0)
    timing = SlotTiming(t0=col.t0, switching_delay=col.switching_delay,
                        t_s_sample=col.t_s_sample)
    channel = ColoredChannel(params=params, bank=bank, cov_norm=cov,
                             whitened=WhitenedBank.build(bank, cov),
                             timing=timing, pt_linear=col.pt_linear)
    return Engine(scenario_id=cfg.scenario_id,
                  deployment=snap_deployment_to_grid(dep, timing),
                  thresholds=cfg.thresholds, eve_scenario=cfg.eve,
                  plan=cfg.plan, channel=channel)
