"""End-to-end tests of the rnls-lab command line through run(argv)."""

import json

import numpy as np
import pandas as pd
import pytest

from rnls_lab.main import build_parser, run
from rnls_lab.store import read_field


def _json(path):
    return json.loads(path.read_text())


class TestExitCodes:

    def test_version(self, capsys):
        assert run(["--version"]) == 0
        assert "RNLS1" in capsys.readouterr().out

    def test_unknown_flag(self, tmp_path):
        assert run(["classify", "--bogus", "1", "--out", str(tmp_path)]) == 2

    def test_inconsistent_dimensions(self, tmp_path):
        assert run(["classify", "--d", "1", "--k", "2", "--out", str(tmp_path)]) == 2

    def test_missing_input_snapshot(self, tmp_path):
        assert run(["evolve", "--input", str(tmp_path / "missing.rnls"), "--out", str(tmp_path)]) == 2

    def test_usage_error_leaves_manifest(self, tmp_path):
        assert run(["evolve", "--input", str(tmp_path / "missing.rnls"), "--out", str(tmp_path)]) == 2
        manifest = _json(tmp_path / "manifest.json")
        assert manifest["status"] == "usage_error"
        assert "missing.rnls" in manifest["error"]
        assert manifest["subcommand"] == "evolve"

    def test_unresolved_settings_leave_manifest(self, tmp_path):
        assert run(["classify", "--d", "1", "--k", "2", "--out", str(tmp_path)]) == 2
        manifest = _json(tmp_path / "manifest.json")
        assert manifest["status"] == "usage_error"
        assert manifest["parameters"]["k"] == 2
        assert manifest["outputs"] == []

    def test_flow_in_supercritical_regime(self, tmp_path):
        argv = ["groundstate", "--method", "flow", "--p", "6", "--m", "1", "--n", "256", "--out", str(tmp_path)]
        assert run(argv) == 2

    def test_flow_without_mass(self, tmp_path):
        assert run(["groundstate", "--method", "flow", "--out", str(tmp_path)]) == 2

    def test_bad_omega_range(self, tmp_path):
        argv = ["masscurve", "--omega-min", "2", "--omega-max", "1", "--out", str(tmp_path)]
        assert run(argv) == 2


class TestSettings:

    def test_flags_override_config_file(self, tmp_path):
        config = tmp_path / "run.env"
        config.write_text("d=1\nk=0\np=6\nomega=0.5\n")
        assert run(["classify", "--config", str(config), "--p", "2", "--out", str(tmp_path)]) == 0
        report = _json(tmp_path / "classify.json")
        assert report["p"] == 2.0
        assert report["classification"] == "subcritical_all_stable"

    def test_config_file_values_apply(self, tmp_path):
        config = tmp_path / "run.env"
        config.write_text("p=6\n")
        assert run(["classify", "--config", str(config), "--out", str(tmp_path)]) == 0
        assert _json(tmp_path / "classify.json")["classification"] == "supercritical_k0"

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "run.env"
        config.write_text("gamma=3\n")
        assert run(["classify", "--config", str(config), "--out", str(tmp_path)]) == 2

    def test_every_subcommand_parses(self):
        parser = build_parser()
        for name in ("groundstate", "masscurve", "classify", "me-explicit", "spectrum", "evolve", "stability", "sweep"):
            assert parser.parse_args([name]).subcommand == name


class TestSubcommands:

    def test_classify_supercritical(self, tmp_path):
        assert run(["classify", "--d", "1", "--k", "0", "--p", "6", "--out", str(tmp_path)]) == 0
        report = _json(tmp_path / "classify.json")
        assert report["classification"] == "supercritical_k0"
        assert "-inf" in report["im_verdict"]
        manifest = _json(tmp_path / "manifest.json")
        assert manifest["outputs"] == ["classify.json"]
        assert manifest["subcommand"] == "classify"
        assert manifest["format_version"] == "RNLS1"
        assert manifest["finished_at"]
        assert manifest["status"] == "ok"
        assert manifest["error"] is None

    def test_masscurve_slope_changes_sign_near_omega1(self, tmp_path):
        argv = ["masscurve", "--d", "1", "--k", "1", "--p", "6", "--beta", "1",
                "--omega-min", "0.1", "--omega-max", "0.4", "--num", "31", "--out", str(tmp_path)]
        assert run(argv) == 0
        frame = pd.read_csv(tmp_path / "masscurve.csv")
        assert list(frame.columns) == ["omega", "m", "m_prime_closed", "m_prime_fd", "E"]
        signs = np.sign(frame["m_prime_closed"].to_numpy())
        (flips,) = np.nonzero(np.diff(signs))
        assert len(flips) == 1
        assert frame["omega"][flips[0]] < 0.2135 < frame["omega"][flips[0] + 1]

    def test_me_explicit(self, tmp_path):
        argv = ["me-explicit", "--p", "6", "--beta", "1", "--omega-min", "0.1", "--omega-max", "1",
                "--num", "10", "--out", str(tmp_path)]
        assert run(argv) == 0
        assert len(pd.read_csv(tmp_path / "me_explicit.csv")) == 10
        thresholds = _json(tmp_path / "me_explicit.json")
        assert thresholds["omega1"] == pytest.approx(0.2135, abs=1e-4)
        assert thresholds["omega2"] == pytest.approx(0.5)

    def test_groundstate_shoot(self, tmp_path):
        argv = ["groundstate", "--d", "1", "--k", "0", "--p", "2", "--n", "256", "--L", "40", "--out", str(tmp_path)]
        assert run(argv) == 0
        phi = read_field(tmp_path / "groundstate.rnls")
        assert phi.grid.dims == (256,)
        report = _json(tmp_path / "groundstate.json")["report"]
        assert report["mass"] == pytest.approx(2.0, rel=1e-8)
        assert _json(tmp_path / "manifest.json")["grid"]["dims"] == [256]

    def test_spectrum_has_one_negative_direction(self, tmp_path):
        argv = ["spectrum", "--p", "2", "--n", "256", "--L", "40", "--neigs", "2", "--out", str(tmp_path)]
        assert run(argv) == 0
        assert (tmp_path / "spectrum.csv").read_text().splitlines()[0] == "index,lambda,residual"
        frame = pd.read_csv(tmp_path / "spectrum.csv")
        assert len(frame) == 2
        assert frame["lambda"][0] == pytest.approx(-3.0, rel=1e-4)
        assert _json(tmp_path / "spectrum.json")["negative_count"] == 1

    def test_evolve_writes_log_and_snapshots(self, tmp_path):
        argv = ["evolve", "--p", "2", "--n", "256", "--L", "40", "--dt", "0.01", "--T", "0.1",
                "--snapshot-stride", "5", "--out", str(tmp_path)]
        assert run(argv) == 0
        names = set(_json(tmp_path / "manifest.json")["outputs"])
        assert {"conservation.csv", "snap_000000.rnls", "snap_000001.rnls", "snap_000002.rnls",
                "final.rnls"} <= names
        log = pd.read_csv(tmp_path / "conservation.csv")
        assert log["t"].iloc[-1] == pytest.approx(0.1)

    def test_evolve_from_snapshot(self, tmp_path):
        first = tmp_path / "first"
        argv = ["groundstate", "--p", "2", "--n", "256", "--L", "40", "--out", str(first)]
        assert run(argv) == 0
        argv = ["evolve", "--input", str(first / "groundstate.rnls"), "--p", "2", "--dt", "0.01", "--T", "0.05",
                "--out", str(tmp_path / "second")]
        assert run(argv) == 0
        assert read_field(tmp_path / "second" / "final.rnls").grid.dims == (256,)

    def test_sweep(self, tmp_path):
        argv = ["sweep", "--ds", "1", "--ks", "0,1", "--ps", "2,6", "--omegas", "0.3,1", "--out", str(tmp_path)]
        assert run(argv) == 0
        frame = pd.read_csv(tmp_path / "sweep.csv")
        assert len(frame) == 8
        assert frame["error"].isna().all()
