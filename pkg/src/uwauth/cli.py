"""Command-line entry points: simulate, analytic, validate, emit-scenarios.

Exit codes: 0 success, 1 configuration validation failure, 2 runtime error,
3 validation-report flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from .config import ConfigError, load_config, config_to_dict
from .results import write_curves, write_manifest
from .runner import analytic_curves, simulate_config, validate_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_FLAGS = 3


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        geometry = dataclasses.replace(cfg.geometry, seed=args.seed)
        plan = dataclasses.replace(cfg.plan, seed=args.seed)
        cfg = dataclasses.replace(cfg, geometry=geometry, plan=plan)
    if getattr(args, "out", None):
        outputs = dataclasses.replace(cfg.outputs, directory=args.out)
        cfg = dataclasses.replace(cfg, outputs=outputs)
    if getattr(args, "format", None):
        outputs = dataclasses.replace(cfg.outputs, formats=(args.format,))
        cfg = dataclasses.replace(cfg, outputs=outputs)
    return cfg


def _prepare_outdir(cfg):
    outdir = cfg.outputs.directory
    os.makedirs(outdir, exist_ok=True)
    probe = os.path.join(outdir, ".write_probe")
    with open(probe, "w") as fh:
        fh.write("")
    os.remove(probe)
    return outdir


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    outdir = _prepare_outdir(cfg)
    t0 = time.monotonic()
    engine, curves, _ = simulate_config(cfg, workers=args.workers,
                                        progress=args.progress)
    resolved = config_to_dict(cfg, engine.deployment)
    files = write_curves(outdir, curves, resolved, cfg.plan.n_trials,
                         cfg.outputs.formats)
    write_manifest(outdir, resolved, cfg.plan.seed,
                   time.monotonic() - t0, files, args.workers)
    print(f"wrote {len(files)} curve files to {outdir}")
    return EXIT_OK


def cmd_analytic(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    outdir = _prepare_outdir(cfg)
    t0 = time.monotonic()
    from .config import build_engine

    engine = build_engine(cfg)
    curves = analytic_curves(cfg, engine)
    resolved = config_to_dict(cfg, engine.deployment)
    files = write_curves(outdir, curves, resolved, None, cfg.outputs.formats)
    write_manifest(outdir, resolved, cfg.plan.seed,
                   time.monotonic() - t0, files, 1)
    print(f"wrote {len(files)} analytic curve files to {outdir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    _, _, _, reports = validate_config(cfg, workers=args.workers,
                                       progress=args.progress,
                                       sigma_scale=args.sigma_scale)
    total_flags = 0
    print(f"{'comparison':<24}{'snr_db':>8}{'montecarlo':>14}"
          f"{'analytic':>14}{'3*se':>12}  verdict")
    for rep in reports:
        for row in rep.rows:
            verdict = "FLAG" if row.flagged else "ok"
            print(f"{rep.label:<24}{row.snr_db:>8.1f}{row.mc:>14.6g}"
                  f"{row.analytic:>14.6g}{3 * row.se:>12.3g}  {verdict}")
        total_flags += rep.n_flags
    print(f"total flags: {total_flags}")
    return EXIT_OK if total_flags == 0 else EXIT_FLAGS


# Preset scenario families mirroring the evaluation setups: the adversary
# outside the zone at three ring ratios, inside the zone (uniform and two
# pinned spots), the two strategic worst cases, and a colored/white
# waveform-channel pair.
def _presets():
    base_geo = {"d0": 500.0, "m": 10, "d_min": 10.0, "seed": 20260811}
    thr = {"eps_p": 1.0, "eps_d": 1.0, "eps_theta": 1.0}
    plan = {"n_trials": 10000}
    presets = {}
    for k in (1.2, 1.5, 2.0):
        presets[f"outside_ring_k{str(k).replace('.', '')}"] = {
            "scenario_id": f"outside_ring_k{k}",
            "geometry": base_geo,
            "eve": {"variant": "outside_ring", "k": k, "epsilon": 1.0},
            "thresholds": thr, "plan": plan,
        }
    presets["inside_uniform"] = {
        "scenario_id": "inside_uniform", "geometry": base_geo,
        "eve": {"variant": "inside_uniform"}, "thresholds": thr, "plan": plan,
    }
    presets["inside_near_boundary"] = {
        "scenario_id": "inside_near_boundary", "geometry": base_geo,
        "eve": {"variant": "fixed", "distance": 480.0, "aoa": 60.0},
        "thresholds": thr, "plan": plan,
    }
    presets["inside_deep"] = {
        "scenario_id": "inside_deep", "geometry": base_geo,
        "eve": {"variant": "fixed", "distance": 150.0, "aoa": 120.0},
        "thresholds": thr, "plan": plan,
    }
    presets["worst_case_aoa"] = {
        "scenario_id": "worst_case_aoa", "geometry": base_geo,
        "eve": {"variant": "worst_case_aoa", "target": 0,
                "radial_offset": 50.0},
        "thresholds": thr, "plan": dict(plan, occupant_law="eve_only"),
    }
    presets["worst_case_distance"] = {
        "scenario_id": "worst_case_distance", "geometry": base_geo,
        "eve": {"variant": "worst_case_distance", "target": 0,
                "angular_offset": 10.0},
        "thresholds": thr, "plan": dict(plan, occupant_law="eve_only"),
    }
    colored_channel = {
        "mode": "colored_waveform", "q": 256, "t_b": 2.1e-2,
        "t_s_sample": 5.25e-3, "pn_length": 15, "pt_db": 29.0,
        "band_lo_khz": 1.0, "band_hi_khz": 100.0, "carrier_khz": 10.0,
        "crb_form": "textbook",
    }
    presets["colored_q256"] = {
        "scenario_id": "colored_q256", "geometry": base_geo,
        "eve": {"variant": "uniform_distance", "lo": 10.0, "hi": 1000.0},
        "channel": colored_channel,
        "thresholds": dict(thr, eps_d=4.0),
        "plan": dict(plan, n_trials=2000, detection_mode="distance_only"),
    }
    presets["white_q256"] = {
        "scenario_id": "white_q256", "geometry": base_geo,
        "eve": {"variant": "uniform_distance", "lo": 10.0, "hi": 1000.0},
        "channel": dict(colored_channel, force_white=True),
        "thresholds": dict(thr, eps_d=4.0),
        "plan": dict(plan, n_trials=2000, detection_mode="distance_only"),
    }
    return presets


def cmd_emit_scenarios(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    from .config import parse_config  # round-trip check before writing

    for name, doc in _presets().items():
        parse_config(json.dumps(doc))
        path = os.path.join(args.out, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    print(f"wrote {len(_presets())} scenario presets to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwauth",
        description="Impersonation-detection simulator for underwater "
                    "acoustic sensor networks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--progress", action="store_true",
                       help="progress lines on stderr")

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo sweep")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analytic", help="evaluate the closed forms")
    common(p_an)
    p_an.set_defaults(func=cmd_analytic)

    p_val = sub.add_parser("validate",
                           help="compare Monte Carlo against closed forms")
    common(p_val)
    p_val.add_argument("--sigma-scale", type=float, default=1.0,
                       help="test hook: mis-scale analytic sigmas")
    p_val.set_defaults(func=cmd_validate)

    p_emit = sub.add_parser("emit-scenarios",
                            help="write the preset scenario configs")
    p_emit.add_argument("--out", required=True)
    p_emit.set_defaults(func=cmd_emit_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
