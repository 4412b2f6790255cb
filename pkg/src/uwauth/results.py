"""Result emission: the stable CSV schema, JSON mirrors, manifests, records.

Every CSV starts with one `# config: <compact json>` comment line embedding
the fully resolved configuration, so re-parsing that line reproduces the
run. CSV bodies contain nothing non-deterministic; wall time and the
version string live in the manifest only.
"""

from __future__ import annotations

import json
import os
import subprocess

from .detect import DecisionRecord
from .sim import ErrorRateCurve

CSV_COLUMNS = ("scenario_id", "source", "test", "fusion", "snr_db",
               "p_fa", "p_fa_ci", "p_md", "p_md_ci", "p_mc", "p_mc_ci",
               "n_trials", "flags")

RECORD_COLUMNS = ("trial", "truth", "step1", "j_star", "k_star", "l_star",
                  "i_p", "i_d", "i_theta", "dec_p", "dec_d", "dec_theta",
                  "fused_and", "fused_or", "fused_mv", "final", "identified",
                  "flags")

#: curve key -> output file stem
CURVE_FILES = {
    ("step1", ""): "step1",
    ("test2a", ""): "test2a",
    ("test2b", ""): "test2b",
    ("test2c", ""): "test2c",
    ("step2", "AND"): "fusion_and",
    ("step2", "OR"): "fusion_or",
    ("step2", "MV"): "fusion_mv",
    ("identification", "MV"): "identification",
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def curve_rows(curve: ErrorRateCurve, n_trials_plan: int | None = None):
    """Schema rows of one curve; absent rates serialize as empty fields."""
    rows = []
    for pt in curve.points:
        rows.append({
            "scenario_id": curve.scenario_id,
            "source": curve.source,
            "test": curve.test,
            "fusion": curve.fusion,
            "snr_db": _fmt(pt.snr_db),
            "p_fa": _fmt(pt.p_fa), "p_fa_ci": _fmt(pt.p_fa_ci),
            "p_md": _fmt(pt.p_md), "p_md_ci": _fmt(pt.p_md_ci),
            "p_mc": _fmt(pt.p_mc), "p_mc_ci": _fmt(pt.p_mc_ci),
            "n_trials": _fmt(n_trials_plan) if n_trials_plan else "",
            "flags": _fmt(pt.flags),
        })
    return rows


def _file_stem(key) -> str:
    if key in CURVE_FILES:
        return CURVE_FILES[key]
    if key[0] == "final":
        return "final"
    return f"{key[0]}_{key[1]}".strip("_").lower()


def write_curves(outdir, curves: dict, resolved_cfg: dict,
                 n_trials_plan: int | None = None,
                 formats=("csv",)) -> dict:
    """One file per curve family; returns {filename: row_count}."""
    os.makedirs(outdir, exist_ok=True)
    # run placement is not experiment identity: the embedded config drops
    # the outputs section so identical experiments give identical bytes
    embedded = {k: v for k, v in resolved_cfg.items() if k != "outputs"}
    cfg_line = "# config: " + json.dumps(embedded, sort_keys=True,
                                         separators=(",", ":"))
    written = {}
    for key, curve in curves.items():
        rows = curve_rows(curve, n_trials_plan)
        stem = _file_stem(key)
        if "csv" in formats:
            path = os.path.join(outdir, f"{stem}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(cfg_line + "\n")
                fh.write(",".join(CSV_COLUMNS) + "\n")
                for row in rows:
                    fh.write(",".join(row[c] for c in CSV_COLUMNS) + "\n")
            written[f"{stem}.csv"] = len(rows)
        if "json" in formats:
            path = os.path.join(outdir, f"{stem}.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump({"config": resolved_cfg, "rows": rows}, fh,
                          indent=1, sort_keys=True)
            written[f"{stem}.json"] = len(rows)
    return written


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=os.path.dirname(__file__))
        if out.returncode == 0 and out.stdout.strip():
            return f"uwauth-0.1.0+{out.stdout.strip()}"
    except OSError:
        pass
    return "uwauth-0.1.0"


def write_manifest(outdir, resolved_cfg: dict, seed: int, wall_time_s: float,
                   files: dict, workers: int = 1) -> str:
    path = os.path.join(outdir, "manifest.json")
    payload = {
        "config": resolved_cfg,
        "seed": seed,
        "version": version_string(),
        "wall_time_s": wall_time_s,
        "workers": workers,
        "files": files,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    return path


def record_to_row(index: int, r: DecisionRecord) -> dict:
    j, k, l = r.test_stats
    i_p, i_d, i_t = r.ml_indices
    d_p, d_d, d_t = r.test_decisions
    return {
        "trial": str(index), "truth": str(r.truth), "step1": str(r.step1),
        "j_star": _fmt(j), "k_star": _fmt(k), "l_star": _fmt(l),
        "i_p": _fmt(i_p), "i_d": _fmt(i_d), "i_theta": _fmt(i_t),
        "dec_p": _fmt(d_p), "dec_d": _fmt(d_d), "dec_theta": _fmt(d_t),
        "fused_and": str(r.fused_step2["AND"]),
        "fused_or": str(r.fused_step2["OR"]),
        "fused_mv": str(r.fused_step2["MV"]),
        "final": str(r.final), "identified": _fmt(r.identified),
        "flags": str(r.flags),
    }


def write_records(path, records) -> int:
    """DecisionRecords as CSV rows under the documented record schema."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for i, rec in enumerate(records):
            row = record_to_row(i, rec)
            fh.write(",".join(row[c] for c in RECORD_COLUMNS) + "\n")
            n += 1
    return n
