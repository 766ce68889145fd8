"""Integration tests for the ringqed command line."""

import json
import os
from unittest.mock import patch

import pytest

from ringqed.errors import FitError
from ringqed.io import read_json, read_xy
from ringqed.main import EXIT_ACCEPTANCE, EXIT_FAILURE, EXIT_INVALID, EXIT_OK, main
from ringqed.report import Report, Tolerance, Target
from ringqed.spin import PulseSequence

PROVENANCE = {"config_hash": "0" * 64, "seed": 1, "version": "0.1.0"}


def _write_report(path, value):
    report = Report(provenance=PROVENANCE, targets={"tau_off": Target("published", Tolerance("abs", 0.3), 15.85)})
    report.add("tau_off", value, 0.05)
    report.write(str(path))


class TestAnalyzePurcell:

    def test_lifetime_ratio(self, capsys):
        code = main(["analyze", "purcell", "--tau-off", "15.85", "--tau-on", "13.64", "--xi", "0.031"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "F = 5.23 (lifetime_ratio)" in out

    def test_reference_lifetime(self, capsys):
        code = main(["analyze", "purcell", "--tau-off", "15.85", "--tau-on", "13.64",
                     "--tau0", "14.94", "--dwf", "0.031"])
        assert code == EXIT_OK
        assert "F = 4.93 (reference_lifetime)" in capsys.readouterr().out

    def test_negative_purcell_warns(self, capsys):
        code = main(["analyze", "purcell", "--tau-off", "13.0", "--tau-on", "14.0", "--xi", "0.031"])
        assert code == EXIT_OK
        assert "Warning: negative purcell factor" in capsys.readouterr().out

    def test_missing_branching_ratio(self, capsys):
        code = main(["analyze", "purcell", "--tau-off", "15.85", "--tau-on", "13.64"])
        assert code == EXIT_INVALID
        assert "--xi" in capsys.readouterr().err

    def test_half_reference_inputs(self, capsys):
        code = main(["analyze", "purcell", "--tau-off", "15.85", "--tau-on", "13.64", "--tau0", "14.94"])
        assert code == EXIT_INVALID
        assert "--dwf" in capsys.readouterr().err

    def test_non_positive_lifetime(self):
        assert main(["analyze", "purcell", "--tau-off", "0", "--tau-on", "13.64", "--xi", "0.031"]) == EXIT_INVALID


class TestUsage:

    def test_no_command(self):
        assert main([]) == EXIT_INVALID

    def test_unknown_command(self):
        assert main(["plot"]) == EXIT_INVALID

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert "ringqed" in capsys.readouterr().out

    def test_missing_config(self, tmp_path):
        assert main(["tune-map", "--config", str(tmp_path / "nope.json")]) == EXIT_INVALID

    def test_bad_workers(self, tmp_config_file):
        assert main(["run", tmp_config_file, "--workers", "0"]) == EXIT_INVALID


class TestGenerators:

    def test_unknown_ring_is_simulation_failure(self, tmp_config_file, tmp_path, capsys):
        code = main(["simulate-spectrum", "--config", tmp_config_file, "--diameter", "9.5",
                     "--out-dir", str(tmp_path)])
        assert code == EXIT_FAILURE
        assert "9.5" in capsys.readouterr().err

    def test_mode_window(self, tmp_config_file, tmp_path, capsys):
        code = main(["simulate-spectrum", "--config", tmp_config_file, "--window", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        assert "m=55" in capsys.readouterr().out
        names, x, _ = read_xy(str(tmp_path / "mode_window_d8.1um.csv"))
        assert names == ("wavelength_nm", "intensity")
        assert x.size == 201

    def test_tune_map_json(self, tmp_config_file, tmp_path, capsys):
        code = main(["tune-map", "--config", tmp_config_file, "--format", "json", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        assert "ZPL on/off (D/A)" in capsys.readouterr().out
        with open(tmp_path / "tuning_map_grating.json") as f:
            data = json.load(f)
        assert data["step"] == list(range(16))
        assert len(data["intensity"]) == 16

    def test_decay_at_unknown_point(self, tmp_config_file, tmp_path):
        code = main(["decay", "--config", tmp_config_file, "--point", "Z", "--out-dir", str(tmp_path)])
        assert code == EXIT_INVALID

    def test_seed_override(self, tmp_config_file, tmp_path):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        for out, seed in ((a, "1"), (b, "1"), (c, "2")):
            assert main(["odmr", "--config", tmp_config_file, "--seed", seed, "--out-dir", str(out)]) == EXIT_OK
        assert (a / "odmr_grating_on.csv").read_bytes() == (b / "odmr_grating_on.csv").read_bytes()
        assert (a / "odmr_grating_on.csv").read_bytes() != (c / "odmr_grating_on.csv").read_bytes()

    def test_rabi_writes_sequence(self, tmp_config_file, tmp_path):
        code = main(["rabi", "--config", tmp_config_file, "--path", "grating_on", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "rabi_grating_on.csv").exists()
        seq = PulseSequence.from_list(read_json(str(tmp_path / "rabi_sequence.json")))
        assert [s.kind.value for s in seq.segments] == ["laser", "wait", "microwave", "readout"]
        assert seq.microwave.mw_frequency_mhz == pytest.approx(1315.1)


class TestFit:

    def test_decay_round_trip(self, tmp_config_file, tmp_path, capsys):
        assert main(["decay", "--config", tmp_config_file, "--out-dir", str(tmp_path)]) == EXIT_OK
        capsys.readouterr()

        code = main(["fit", "exp_decay", str(tmp_path / "decay.csv"), "--out-dir", str(tmp_path)])
        out = json.loads(capsys.readouterr().out)

        assert code == EXIT_OK
        assert out["kind"] == "exp_decay"
        assert out["params"]["tau"] == pytest.approx(15.85, abs=1.0)
        assert os.path.exists(tmp_path / "fit_exp_decay.json")

    def test_lorentzian_reports_q(self, tmp_config_file, tmp_path, capsys):
        main(["simulate-spectrum", "--config", tmp_config_file, "--window", "--out-dir", str(tmp_path)])
        capsys.readouterr()

        code = main(["fit", "lorentzian", str(tmp_path / "mode_window_d8.1um.csv")])
        out = json.loads(capsys.readouterr().out)

        assert code == EXIT_OK
        q, sigma = out["q"][0]
        assert q == pytest.approx(1261, abs=4 * sigma)

    def test_fit_failure(self, tmp_path):
        path = tmp_path / "flat.csv"
        path.write_text("x,y\n0,1\n1,1\n2,1\n3,1\n")
        with patch("ringqed.main.fit", side_effect=FitError("degenerate fit")):
            assert main(["fit", "lorentzian", str(path)]) == EXIT_FAILURE

    def test_bad_peak_count(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x,y\n0,1\n1,2\n")
        assert main(["fit", "multi_lorentzian", str(path), "--peaks", "0"]) == EXIT_INVALID

    def test_unreadable_csv(self, tmp_path):
        path = tmp_path / "broken.csv"
        path.write_text("x,y\n0,one\n")
        assert main(["fit", "lorentzian", str(path)]) == EXIT_INVALID


class TestReport:

    def test_passing_report(self, tmp_path, capsys):
        _write_report(tmp_path / "report.json", 15.9)
        assert main(["report", "--compare", str(tmp_path / "report.json")]) == EXIT_OK
        assert "1/1 records pass" in capsys.readouterr().out

    def test_failing_report(self, tmp_path):
        _write_report(tmp_path / "report.json", 17.0)
        assert main(["report", "--compare", str(tmp_path / "report.json")]) == EXIT_ACCEPTANCE

    def test_reports_disagree(self, tmp_path, capsys):
        _write_report(tmp_path / "a.json", 15.9)
        _write_report(tmp_path / "b.json", 15.8)
        code = main(["report", "--compare", str(tmp_path / "a.json"), "--against", str(tmp_path / "b.json")])
        assert code == EXIT_ACCEPTANCE
        assert "1 record(s) differ: tau_off" in capsys.readouterr().out

    def test_not_a_report(self, tmp_path):
        path = tmp_path / "fits.json"
        path.write_text('{"decay_off": {}}')
        assert main(["report", "--compare", str(path)]) == EXIT_INVALID


class TestRun:

    def test_run_then_compare(self, tmp_config_file, tmp_path, capsys):
        first, second = tmp_path / "first", tmp_path / "second"
        code = main(["run", tmp_config_file, "--out-dir", str(first)])
        out = capsys.readouterr().out
        assert code in (EXIT_OK, EXIT_ACCEPTANCE)
        assert "records pass" in out
        assert (first / "report.json").exists()

        assert main(["run", tmp_config_file, "--out-dir", str(second), "--workers", "2"]) == code
        capsys.readouterr()

        compare = main(["report", "--compare", str(first / "report.json"),
                        "--against", str(second / "report.json")])
        assert compare == code
        assert "Reports agree on every record" in capsys.readouterr().out
