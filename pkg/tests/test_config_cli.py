"""Config canonicalization, validation messages, and the CLI surface.

CLI tests drive the click entry points through a runner against the
built-in presets, with path-count overrides to keep runs small; the
full-size runs live in the acceptance tests.
"""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from conespde import ConfigError
from conespde.cli import EXIT_QUIET_THRESHOLD, SWEEP_FACTORS, cli
from conespde.config import (
    PRESET_NAMES,
    ExperimentConfig,
    canonical_json,
    content_hash,
    preset_document,
)


def combined_output(result) -> str:
    try:
        return result.output + result.stderr
    except ValueError:
        return result.output


# ---------------------------------------------------------------- canonical form


class TestCanonicalJson:
    def test_key_order_insensitive(self):
        a = {"b": 1, "a": {"y": 2, "x": 3}}
        b = {"a": {"x": 3, "y": 2}, "b": 1}
        assert canonical_json(a) == canonical_json(b)
        assert content_hash(a) == content_hash(b)

    def test_minimal_separators(self):
        assert canonical_json({"a": [1, 2]}) == '{"a":[1,2]}'

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})

    def test_hash_shape(self):
        h = content_hash({"a": 1})
        assert len(h) == 64 and set(h) <= set("0123456789abcdef")


# ---------------------------------------------------------------- presets


class TestPresets:
    def test_names(self):
        assert PRESET_NAMES == (
            "heat-positive",
            "heat-positive-badvol",
            "heat-positive-hidden",
        )

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="available:"):
            preset_document("heat-negative")

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_presets_validate_and_round_trip(self, name):
        ec = ExperimentConfig.from_dict(preset_document(name))
        assert ec.dim == 16
        doc = ec.to_dict()
        again = ExperimentConfig.from_dict(doc)
        assert again.to_dict() == doc
        assert again.content_hash() == ec.content_hash()

    def test_badvol_adds_column(self):
        ec = ExperimentConfig.from_dict(preset_document("heat-positive-badvol"))
        assert len(ec.coeffs.vol_columns) == 9
        assert ec.noise.count == 9

    def test_hidden_starts_in_gate_band(self):
        ec = ExperimentConfig.from_dict(preset_document("heat-positive-hidden"))
        assert ec.h0.coords[2] == 6.5

    def test_preset_shortcut_key(self):
        via_key = ExperimentConfig.from_dict({"preset": "heat-positive"})
        direct = ExperimentConfig.from_dict(preset_document("heat-positive"))
        assert via_key.to_dict() == direct.to_dict()

    def test_preset_overlay_replaces_section_wholesale(self):
        ec = ExperimentConfig.from_dict(
            {"preset": "heat-positive", "sim": {"dt": 2e-3, "horizon": 1.0, "paths": 10}}
        )
        assert ec.sim.dt == 2e-3 and ec.sim.paths == 10
        # unspecified keys of the replaced section fall back to defaults
        assert ec.sim.scheme == "exponential-euler"

    def test_manifest_document_accepted(self):
        doc = preset_document("heat-positive")
        manifest = {"hash": "ignored", "config": doc, "outputs": []}
        ec = ExperimentConfig.from_dict(manifest)
        assert ec.to_dict() == ExperimentConfig.from_dict(doc).to_dict()

    def test_distinct_presets_hash_differently(self):
        hashes = {
            ExperimentConfig.from_dict(preset_document(n)).content_hash()
            for n in PRESET_NAMES
        }
        assert len(hashes) == 3


# ---------------------------------------------------------------- validation


class TestValidation:
    def base(self):
        return preset_document("heat-positive")

    def test_non_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            ExperimentConfig.from_dict([1, 2])

    def test_missing_space(self):
        doc = self.base()
        del doc["space"]
        with pytest.raises(ConfigError, match="space: missing section"):
            ExperimentConfig.from_dict(doc)

    def test_bad_dim(self):
        doc = self.base()
        doc["space"]["dim"] = 0
        with pytest.raises(ConfigError, match="space.dim: must be a positive integer"):
            ExperimentConfig.from_dict(doc)
        doc["space"]["dim"] = "16"
        with pytest.raises(ConfigError, match="space.dim"):
            ExperimentConfig.from_dict(doc)

    def test_bad_cone(self):
        doc = self.base()
        doc["space"]["cone"] = "positive"
        with pytest.raises(ConfigError, match="space.cone"):
            ExperimentConfig.from_dict(doc)

    def test_rate_count_mismatch(self):
        doc = self.base()
        doc["semigroup"] = {"rates": [1.0, 2.0]}
        with pytest.raises(ConfigError, match="semigroup:.*dim 2.*16"):
            ExperimentConfig.from_dict(doc)

    def test_noise_column_mismatch(self):
        doc = preset_document("heat-positive-badvol")
        doc["noise"]["eigenvalues"] = {"rule": "flat", "count": 8, "value": 1.0}
        with pytest.raises(ConfigError, match="noise: 8 eigenvalues for 9 volatility columns"):
            ExperimentConfig.from_dict(doc)

    def test_unknown_noise_rule(self):
        doc = self.base()
        doc["noise"]["eigenvalues"] = {"rule": "geometric", "count": 8}
        with pytest.raises(ConfigError, match="noise.eigenvalues.rule"):
            ExperimentConfig.from_dict(doc)

    def test_bad_scheme_wrapped(self):
        doc = self.base()
        doc["sim"]["scheme"] = "milstein"
        with pytest.raises(ConfigError, match="sim:"):
            ExperimentConfig.from_dict(doc)

    def test_checker_tol(self):
        doc = self.base()
        doc["checker"]["tol"] = 0.0
        with pytest.raises(ConfigError, match="checker.tol: must be > 0"):
            ExperimentConfig.from_dict(doc)

    def test_missing_initial(self):
        doc = self.base()
        del doc["initial"]
        with pytest.raises(ConfigError, match="initial: missing section"):
            ExperimentConfig.from_dict(doc)

    def test_initial_length(self):
        doc = self.base()
        doc["initial"] = [0.0] * 4
        with pytest.raises(ConfigError, match="initial: 4 coordinates for dimension 16"):
            ExperimentConfig.from_dict(doc)

    def test_out_must_be_string(self):
        doc = self.base()
        doc["out"] = 7
        with pytest.raises(ConfigError, match="out: must be a string path"):
            ExperimentConfig.from_dict(doc)


class TestConfigIO:
    def test_save_load_round_trip(self, tmp_path):
        ec = ExperimentConfig.from_dict(preset_document("heat-positive"))
        p = tmp_path / "cfg.json"
        ec.save(p)
        again = ExperimentConfig.load(p)
        assert again.to_dict() == ec.to_dict()

    def test_load_reports_json_position(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{"space": \n}')
        with pytest.raises(ConfigError, match=r"invalid JSON at line 2, column 1"):
            ExperimentConfig.load(p)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            ExperimentConfig.load(tmp_path / "nope.json")


# ---------------------------------------------------------------- CLI


def read_manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


class TestCheckCommand:
    def test_compliant_passes(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli, ["check", "--preset", "heat-positive", "--out", str(out)]
        )
        assert res.exit_code == 0
        assert "NO VIOLATION FOUND (sampled)" in res.output
        manifest = read_manifest(out)
        report = json.loads((out / "report.json").read_text())
        assert report["hash"] == manifest["hash"]
        assert report["checker"]["verdict"] == "NO VIOLATION FOUND (sampled)"
        want = ExperimentConfig.from_dict(preset_document("heat-positive")).to_dict()
        assert manifest["config"] == want

    def test_badvol_fails_with_witness(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli, ["check", "--preset", "heat-positive-badvol", "--out", str(out)]
        )
        assert res.exit_code == 2
        assert "VIOLATED (witness found)" in res.output
        assert "vol-parallel" in res.output
        assert "more witnesses" in res.output
        report = json.loads((out / "report.json").read_text())
        assert report["checker"]["witnesses"]

    def test_hidden_checker_blind(self, tmp_path):
        # the gated push lives strictly inside the cone, so sampling the
        # boundary cannot see it
        res = CliRunner().invoke(
            cli, ["check", "--preset", "heat-positive-hidden", "--out", str(tmp_path / "r")]
        )
        assert res.exit_code == 0

    def test_requires_exactly_one_source(self, tmp_path):
        both = CliRunner().invoke(
            cli,
            ["check", "--preset", "heat-positive", "--config", "x.json",
             "--out", str(tmp_path / "a")],
        )
        neither = CliRunner().invoke(cli, ["check", "--out", str(tmp_path / "b")])
        assert both.exit_code == 1 and neither.exit_code == 1
        assert "exactly one of --config or --preset" in combined_output(both)

    def test_malformed_config_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\n  broken\n}")
        res = CliRunner().invoke(
            cli, ["check", "--config", str(bad), "--out", str(tmp_path / "r")]
        )
        assert res.exit_code == 1
        assert "invalid JSON at line 2, column 3" in combined_output(res)

    def test_overrides_reach_manifest(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli,
            ["check", "--preset", "heat-positive", "--out", str(out),
             "--seed", "9", "--paths", "10", "--dt", "0.002"],
        )
        assert res.exit_code == 0
        cfg = read_manifest(out)["config"]
        assert cfg["noise"]["seed"] == 9
        assert cfg["sim"]["paths"] == 10
        assert cfg["sim"]["dt"] == 0.002


class TestSimulateCommand:
    def test_compliant_run(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli,
            ["simulate", "--preset", "heat-positive", "--out", str(out), "--paths", "30"],
        )
        assert res.exit_code == 0
        manifest = read_manifest(out)
        lines = (out / "paths.csv").read_text().splitlines()
        assert lines[0] == f"# manifest {manifest['hash']}"
        assert lines[1] == "path,seed,exited,exit_time,min_margin,diverged"
        assert len(lines) == 2 + 30
        summary = json.loads((out / "summary.json").read_text())
        assert summary["hash"] == manifest["hash"]
        assert summary["dt"] == 1e-3
        assert summary["paths_counted"] == 30
        assert summary["diverged"] == 0
        assert summary["exit_fraction"] == 0.0
        # compliant paths never exit: the time column stays empty
        for row in lines[2:]:
            cells = row.split(",")
            assert cells[2] == "0" and cells[3] == ""
            float(cells[4])  # min_margin parses
            assert cells[5] == "-1"

    def test_badvol_run_reports_exits(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli,
            ["simulate", "--preset", "heat-positive-badvol", "--out", str(out),
             "--paths", "30"],
        )
        assert res.exit_code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["exit_fraction"] > 0.0
        rows = (out / "paths.csv").read_text().splitlines()[2:]
        exited = [r.split(",") for r in rows if r.split(",")[2] == "1"]
        assert exited
        for cells in exited:
            assert float(cells[3]) >= 0.0
            assert float(cells[4]) < 0.0

    def test_manifest_reproduces_run(self, tmp_path):
        first = tmp_path / "a"
        res1 = CliRunner().invoke(
            cli,
            ["simulate", "--preset", "heat-positive-badvol", "--out", str(first),
             "--paths", "20"],
        )
        assert res1.exit_code == 0
        second = tmp_path / "b"
        res2 = CliRunner().invoke(
            cli,
            ["simulate", "--config", str(first / "manifest.json"), "--out", str(second)],
        )
        assert res2.exit_code == 0
        a = (first / "paths.csv").read_bytes()
        b = (second / "paths.csv").read_bytes()
        assert a == b


class TestVerifyCommand:
    def test_compliant_agreement(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli,
            ["verify", "--preset", "heat-positive", "--out", str(out), "--paths", "20"],
        )
        assert res.exit_code == 0
        assert "agreement: true" in res.output
        doc = json.loads((out / "verify.json").read_text())
        assert doc["agreement"] is True
        assert doc["exit_quiet_threshold"] == EXIT_QUIET_THRESHOLD
        assert [s["dt"] for s in doc["sweep"]] == [1e-3 * f for f in SWEEP_FACTORS]
        for factor in SWEEP_FACTORS:
            assert (out / f"paths_dt{factor}x.csv").exists()
        sweep_lines = (out / "sweep.csv").read_text().splitlines()
        assert sweep_lines[1] == "dt,exit_fraction,stderr,paths_counted,diverged"
        assert len(sweep_lines) == 2 + len(SWEEP_FACTORS)

    def test_hidden_disagreement_still_exit_zero(self, tmp_path):
        # checker sees nothing, simulation exits immediately: the
        # mismatch is a reported finding, not an error code
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli,
            ["verify", "--preset", "heat-positive-hidden", "--out", str(out),
             "--paths", "20"],
        )
        assert res.exit_code == 0
        assert "agreement: false" in res.output
        doc = json.loads((out / "verify.json").read_text())
        assert doc["checker"]["verdict"] == "NO VIOLATION FOUND (sampled)"
        assert all(s["exit_fraction"] > EXIT_QUIET_THRESHOLD for s in doc["sweep"])
        assert doc["agreement"] is False

    def test_badvol_agreement_via_exits(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(
            cli,
            ["verify", "--preset", "heat-positive-badvol", "--out", str(out),
             "--paths", "20"],
        )
        assert res.exit_code == 0
        doc = json.loads((out / "verify.json").read_text())
        assert doc["checker"]["verdict"] == "VIOLATED (witness found)"
        assert doc["checker"]["vol_ok"] is False
        assert any(s["exited"] > 0 for s in doc["sweep"])
        assert doc["agreement"] is True


class TestAppendixCommand:
    def test_phi_suite(self, tmp_path):
        out = tmp_path / "run"
        res = CliRunner().invoke(cli, ["appendix", "phi", "--out", str(out)])
        assert res.exit_code == 0
        assert "PASS phi/" in res.output
        doc = json.loads((out / "appendix.json").read_text())
        assert doc["passed"] is True
        assert doc["selector"] == "phi"
        assert all(r["suite"] == "phi" for r in doc["results"])

    def test_retraction_suite(self, tmp_path):
        res = CliRunner().invoke(
            cli, ["appendix", "retraction", "--out", str(tmp_path / "r")]
        )
        assert res.exit_code == 0

    def test_unknown_selector(self, tmp_path):
        res = CliRunner().invoke(cli, ["appendix", "fractal", "--out", str(tmp_path / "r")])
        assert res.exit_code == 1
