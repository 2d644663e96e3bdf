import json
import subprocess
import sys

import numpy as np
import pytest

from dpnls.cli import main


def run_cli(args):
    return main(list(args))


class TestDefaults:
    def test_defaults_prints_valid_json(self, capsys):
        assert run_cli(["defaults"]) == 0
        cfg = json.loads(capsys.readouterr().out)
        assert cfg["format_version"] == "1"
        assert cfg["model"]["p"] == 3.0

    def test_preset_overlay(self, capsys):
        assert run_cli(["defaults", "--preset", "strong-instability"]) == 0
        cfg = json.loads(capsys.readouterr().out)
        assert cfg["model"]["q"] == 5.0
        assert cfg["evolution"]["lam"] == 1.1

    def test_unknown_preset_exit_3(self, capsys):
        assert run_cli(["defaults", "--preset", "nope"]) == 3
        err = json.loads(capsys.readouterr().err)
        assert "error" in err


class TestGroundstateCommand:
    def test_outputs_and_checks(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli(["groundstate", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["amplitude"] == pytest.approx(1.2247449, abs=1e-6)
        assert all(report["checks"].values())
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["outputs"]) == {
            "profile.csv", "profile.meta.json", "report.json"}

    def test_invalid_params_exit_3(self, tmp_path, capsys):
        cfgfile = tmp_path / "bad.json"
        cfgfile.write_text(json.dumps({"model": {"p": 3.0, "q": 2.0}}))
        code = run_cli(["groundstate", "--out", str(tmp_path / "x"),
                        "--config", str(cfgfile)])
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert "q must exceed p" in err["error"]["message"]

    def test_determinism_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(["groundstate", "--out", str(out1)]) == 0
        assert run_cli(["groundstate", "--out", str(out2)]) == 0
        assert (out1 / "profile.csv").read_bytes() == (out2 / "profile.csv").read_bytes()
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["config_hash"] == m2["config_hash"]

    def test_lock_file_blocks_concurrent_use(self, tmp_path):
        out = tmp_path / "run"
        out.mkdir()
        (out / ".dpnls.lock").touch()
        assert run_cli(["groundstate", "--out", str(out)]) == 3


class TestFunctionalsCommand:
    def test_round_trip_profile_input(self, tmp_path):
        first = tmp_path / "gs"
        assert run_cli(["groundstate", "--out", str(first)]) == 0
        second = tmp_path / "fn"
        assert run_cli([
            "functionals", "--out", str(second),
            "--profile-csv", str(first / "profile.csv"),
            "--profile-meta", str(first / "profile.meta.json"),
        ]) == 0
        rep = json.loads((second / "report.json").read_text())
        assert rep["checks"]["pohozaev_K"]


class TestStabilityMapCommand:
    def test_small_map(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({
            "stability_map": {"p_values": [2.0], "q_values": [3.0, 4.8]},
        }))
        out = tmp_path / "map"
        assert run_cli(["stability-map", "--out", str(out),
                        "--config", str(cfgfile), "--plot-data"]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0].startswith("p,q,gamma")
        assert len(lines) == 3
        regions = json.loads((out / "regions.json").read_text())
        assert regions["p_threshold"] == pytest.approx(4 * 2**0.5 - 3)
        assert (out / "boundary.csv").exists()

    def test_empty_grid_exit_3(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({
            "stability_map": {"p_values": [4.0], "q_values": [3.0]},
        }))
        assert run_cli(["stability-map", "--out", str(tmp_path / "m"),
                        "--config", str(cfgfile)]) == 3


class TestZeroMassCommand:
    def test_single_omega_row(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"zero_mass": {"omega_sequence": [0.5]}}))
        out = tmp_path / "zm"
        assert run_cli(["zero-mass", "--out", str(out),
                        "--config", str(cfgfile)]) == 0
        lines = (out / "limit.csv").read_text().splitlines()
        assert len(lines) == 2  # header + one row
        assert lines[0].split(",")[0] == "omega"


class TestDecayFitCommand:
    def test_fit_csv(self, tmp_path):
        out = tmp_path / "fit"
        assert run_cli(["decay-fit", "--out", str(out)]) == 0
        lines = (out / "decayfit.csv").read_text().splitlines()
        assert len(lines) == 2
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))
        assert float(row["fitted_exponent"]) == pytest.approx(1.0, abs=0.02)


class TestEvolveCommand:
    def test_stationary_preset_summary(self, tmp_path):
        out = tmp_path / "ev"
        cfgfile = tmp_path / "cfg.json"
        # shorten the run for test speed; keep the preset's fidelity settings
        cfgfile.write_text(json.dumps({
            "evolution": {"t_end": 0.5, "snapshot_times": [0.25]},
        }))
        assert run_cli(["evolve", "--out", str(out),
                        "--preset", "stationary-orbit",
                        "--config", str(cfgfile)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert "orbit preserved" in summary["summary"]
        assert summary["max_distance"] <= 1e-6
        diag_lines = (out / "diag.csv").read_text().splitlines()
        assert diag_lines[0].startswith("t,energy,mass")
        snaps = sorted((out / "snapshots").glob("*.csv"))
        assert len(snaps) == 3  # t=0, t=0.25, t=0.5

    def test_outputs_parse_round_trip(self, tmp_path):
        out = tmp_path / "ev"
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"evolution": {"t_end": 0.2}}))
        assert run_cli(["evolve", "--out", str(out),
                        "--preset", "stationary-orbit",
                        "--config", str(cfgfile)]) == 0
        data = np.loadtxt(out / "diag.csv", delimiter=",", skiprows=1)
        assert data.shape[1] == 9
        assert np.all(np.isfinite(data[:, :6]))


class TestEntryPoint:
    def test_installed_script(self):
        proc = subprocess.run([sys.executable, "-m", "dpnls.cli", "defaults"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        json.loads(proc.stdout)
