import json
import os

import pytest

from uwauth.cli import main
from uwauth.config import (ConfigError, build_engine, config_to_dict,
                           parse_config)
from uwauth.detect import H0
from uwauth.results import (CSV_COLUMNS, RECORD_COLUMNS, curve_rows,
                            record_to_row, write_curves, write_records)
from uwauth.runner import simulate_config
from uwauth.sim import run_trial

MINIMAL = {"geometry": {"d0": 500.0, "m": 10}}


def cfg_doc(**overrides):
    doc = {
        "scenario_id": "test",
        "geometry": {"d0": 500.0, "m": 4, "d_min": 10.0, "seed": 7},
        "eve": {"variant": "outside_ring", "k": 2.0, "epsilon": 1.0},
        "thresholds": {"eps_p": 1.0, "eps_d": 1.0, "eps_theta": 1.0},
        "plan": {"snr_grid_db": [-10.0, 0.0, 10.0], "n_trials": 200},
    }
    doc.update(overrides)
    return doc


class TestParseConfig:
    def test_minimal_fills_defaults(self):
        cfg = parse_config(json.dumps(MINIMAL))
        resolved = config_to_dict(cfg)
        assert resolved["geometry"]["d_min"] == 10.0
        assert resolved["plan"]["occupant_law"] == "equal"
        assert resolved["plan"]["snr_grid_db"][0] == -10.0
        assert resolved["eve"]["variant"] == "outside_ring"
        assert resolved["thresholds"]["eps_d"] == 1.0
        assert len(resolved["resolved"]["sigma_grid"]) == 9

    def test_unknown_keys_listed(self):
        doc = cfg_doc()
        doc["geometry"]["depth"] = 3
        doc["plan"]["bogus"] = 1
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(doc))
        assert "depth" in str(err.value)

    def test_negative_threshold_names_field(self):
        doc = cfg_doc(thresholds={"eps_p": 1.0, "eps_d": -1.0,
                                  "eps_theta": 1.0})
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(doc))
        assert "eps_d" in str(err.value)

    def test_band_validity_enforced(self):
        doc = cfg_doc(channel={"mode": "colored_waveform",
                               "band_hi_khz": 200.0})
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(doc))
        assert "band" in str(err.value).lower()

    def test_zero_trials_rejected(self):
        doc = cfg_doc()
        doc["plan"]["n_trials"] = 0
        with pytest.raises(ConfigError):
            parse_config(json.dumps(doc))

    def test_empty_grid_rejected(self):
        doc = cfg_doc()
        doc["plan"]["snr_grid_db"] = []
        with pytest.raises(ConfigError):
            parse_config(json.dumps(doc))

    def test_mode_pairing_rejected(self):
        doc = cfg_doc()
        doc["plan"]["detection_mode"] = "distance_only"
        with pytest.raises(ConfigError):
            parse_config(json.dumps(doc))

    def test_colored_slot_coverage(self):
        doc = cfg_doc(channel={"mode": "colored_waveform", "q": 32,
                               "t_s_sample": 1e-4, "t_b": 4e-4},
                      eve={"variant": "outside_ring", "k": 2.0,
                           "epsilon": 1.0})
        doc["plan"]["detection_mode"] = "distance_only"
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(doc))
        assert "slot" in str(err.value)

    def test_explicit_nodes(self):
        doc = cfg_doc()
        doc["geometry"]["m"] = 2
        doc["geometry"]["nodes"] = [
            {"distance": 100.0, "aoa": 30.0},
            {"distance": 300.0, "aoa": 120.0}]
        cfg = parse_config(json.dumps(doc))
        engine = build_engine(cfg)
        assert engine.deployment.alice[0].distance == 100.0
        assert engine.deployment.alice[1].aoa == 120.0

    def test_not_json(self):
        with pytest.raises(ConfigError):
            parse_config("{nope")


class TestResults:
    def test_curve_rows_schema(self, tmp_path):
        cfg = parse_config(json.dumps(cfg_doc()))
        engine, curves, _ = simulate_config(cfg)
        rows = curve_rows(curves[("step1", "")], cfg.plan.n_trials)
        assert set(rows[0]) == set(CSV_COLUMNS)
        assert rows[0]["test"] == "step1"
        # identification rows leave fa/md empty, not zero
        id_rows = curve_rows(curves[("identification", "MV")], 200)
        assert id_rows[0]["p_fa"] == ""

    def test_write_curves_golden_header(self, tmp_path):
        cfg = parse_config(json.dumps(cfg_doc()))
        engine, curves, _ = simulate_config(cfg)
        files = write_curves(tmp_path, curves, config_to_dict(cfg), 200)
        assert files["step1.csv"] == 3
        with open(os.path.join(tmp_path, "step1.csv")) as fh:
            lines = fh.read().splitlines()
        assert lines[0].startswith("# config: {")
        assert lines[1] == ("scenario_id,source,test,fusion,snr_db,p_fa,"
                            "p_fa_ci,p_md,p_md_ci,p_mc,p_mc_ci,n_trials,"
                            "flags")
        first = lines[2].split(",")
        assert first[0] == "test" and first[1] == "montecarlo"
        assert first[4] == "-10"
        # the embedded config re-parses to the same resolved document
        # (minus run placement)
        embedded = json.loads(lines[0][len("# config: "):])
        expect = {k: v for k, v in config_to_dict(cfg).items()
                  if k != "outputs"}
        assert embedded == expect

    def test_embedded_config_reruns_byte_identical(self, tmp_path):
        cfg = parse_config(json.dumps(cfg_doc()))
        engine, curves, _ = simulate_config(cfg)
        out1 = os.path.join(tmp_path, "first")
        write_curves(out1, curves, config_to_dict(cfg, engine.deployment),
                     cfg.plan.n_trials)
        with open(os.path.join(out1, "step1.csv")) as fh:
            first = fh.read()
        embedded = json.loads(first.splitlines()[0][len("# config: "):])
        cfg2 = parse_config(json.dumps(embedded))
        engine2, curves2, _ = simulate_config(cfg2)
        out2 = os.path.join(tmp_path, "second")
        write_curves(out2, curves2, config_to_dict(cfg2, engine2.deployment),
                     cfg2.plan.n_trials)
        with open(os.path.join(out2, "step1.csv")) as fh:
            second = fh.read()
        assert first == second

    def test_records_schema(self, tmp_path):
        cfg = parse_config(json.dumps(cfg_doc()))
        engine = build_engine(cfg)
        records = [run_trial(engine, 0, j) for j in range(20)]
        path = os.path.join(tmp_path, "records.csv")
        n = write_records(path, records)
        assert n == 20
        with open(path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == ",".join(RECORD_COLUMNS)
        row = record_to_row(0, records[0])
        assert lines[1] == ",".join(row[c] for c in RECORD_COLUMNS)
        auth = [r for r in records if r.final == H0]
        assert all(r.identified is not None for r in auth)


class TestCli:
    def run_cli(self, *argv):
        return main(list(argv))

    def write_cfg(self, tmp_path, doc, name="cfg.json"):
        path = os.path.join(tmp_path, name)
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return path

    def test_simulate_writes_families(self, tmp_path):
        path = self.write_cfg(tmp_path, cfg_doc())
        out = os.path.join(tmp_path, "out")
        assert self.run_cli("simulate", "--config", path, "--out", out) == 0
        names = sorted(os.listdir(out))
        for stem in ("step1", "test2a", "test2b", "test2c", "fusion_and",
                     "fusion_or", "fusion_mv", "final", "identification"):
            assert f"{stem}.csv" in names
        assert "manifest.json" in names
        with open(os.path.join(out, "manifest.json")) as fh:
            manifest = json.load(fh)
        assert manifest["seed"] == 7
        assert manifest["files"]["step1.csv"] == 3
        assert "version" in manifest

    def test_simulate_byte_identical_reruns_and_workers(self, tmp_path):
        path = self.write_cfg(tmp_path, cfg_doc())
        bodies = []
        for i, workers in enumerate((1, 1, 4, 8)):
            out = os.path.join(tmp_path, f"out{i}")
            assert self.run_cli("simulate", "--config", path, "--out", out,
                                "--workers", str(workers)) == 0
            with open(os.path.join(out, "final.csv"), "rb") as fh:
                bodies.append(fh.read())
        assert all(b == bodies[0] for b in bodies[1:])

    def test_analytic_emits_curves(self, tmp_path):
        path = self.write_cfg(tmp_path, cfg_doc())
        out = os.path.join(tmp_path, "an")
        assert self.run_cli("analytic", "--config", path, "--out", out) == 0
        with open(os.path.join(out, "step1.csv")) as fh:
            lines = fh.read().splitlines()
        assert "analytic" in lines[2]
        names = os.listdir(out)
        assert "test2b.csv" in names and "identification.csv" in names
        assert "test2b-verbatim.csv" in names

    def test_validate_exit_codes(self, tmp_path):
        doc = cfg_doc()
        doc["plan"]["n_trials"] = 4000
        doc["geometry"]["seed"] = 195
        doc["geometry"]["m"] = 10
        path = self.write_cfg(tmp_path, doc)
        assert self.run_cli("validate", "--config", path) == 0
        # deliberately mismatched sigma convention must flag (test hook)
        assert self.run_cli("validate", "--config", path,
                            "--sigma-scale", "1.5") == 3

    def test_config_error_exit_code(self, tmp_path):
        doc = cfg_doc(thresholds={"eps_d": -1.0})
        path = self.write_cfg(tmp_path, doc)
        assert self.run_cli("simulate", "--config", path) == 1

    def test_runtime_error_exit_code(self, tmp_path):
        assert self.run_cli("simulate", "--config",
                            os.path.join(tmp_path, "missing.json")) == 2

    def test_seed_override(self, tmp_path):
        path = self.write_cfg(tmp_path, cfg_doc())
        out1 = os.path.join(tmp_path, "a")
        out2 = os.path.join(tmp_path, "b")
        self.run_cli("simulate", "--config", path, "--out", out1,
                     "--seed", "99")
        self.run_cli("simulate", "--config", path, "--out", out2)
        with open(os.path.join(out1, "final.csv")) as fh:
            b1 = fh.read()
        with open(os.path.join(out2, "final.csv")) as fh:
            b2 = fh.read()
        assert b1 != b2

    def test_emit_scenarios(self, tmp_path):
        out = os.path.join(tmp_path, "presets")
        assert self.run_cli("emit-scenarios", "--out", out) == 0
        names = sorted(os.listdir(out))
        assert "outside_ring_k12.json" in names
        assert "worst_case_aoa.json" in names
        assert "colored_q256.json" in names
        # every preset parses
        for name in names:
            with open(os.path.join(out, name)) as fh:
                parse_config(fh.read())

    def test_json_format(self, tmp_path):
        doc = cfg_doc(outputs={"formats": ["json"], "directory": "ignored"})
        path = self.write_cfg(tmp_path, doc)
        out = os.path.join(tmp_path, "j")
        assert self.run_cli("simulate", "--config", path, "--out", out) == 0
        with open(os.path.join(out, "step1.json")) as fh:
            payload = json.load(fh)
        assert payload["rows"][0]["source"] == "montecarlo"
        assert payload["config"]["scenario_id"] == "test"
