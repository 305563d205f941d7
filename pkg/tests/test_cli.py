import json

import numpy as np
import pytest

from mcstep.cli import main
from mcstep.critical_values import CriticalValues
from mcstep.gaussian import std_normal_quantile


def run(args):
    return main(args)


class TestCritvals:
    def test_step_down_closed_form(self, tmp_path, capsys):
        out = tmp_path / "cv.txt"
        code = run(["critvals", "--k", "3", "--rho", "0", "--alpha", "0.05",
                    "--procedure", "step-down", "--seed", "42", "--out", str(out)])
        assert code == 0
        cv = CriticalValues.load(out)
        expected = [std_normal_quantile(0.95 ** (1 / j)) for j in (1, 2, 3)]
        assert np.allclose(cv.values, expected, atol=0.01)
        assert np.allclose(cv.values, (1.6449, 1.9545, 2.1212), atol=0.01)

    def test_k1_all_procedures_agree(self, tmp_path):
        values = []
        for proc in ("single-step", "step-down", "step-up", "per-comparison"):
            out = tmp_path / f"{proc}.txt"
            assert run(["critvals", "--k", "1", "--alpha", "0.05",
                        "--procedure", proc, "--out", str(out)]) == 0
            values.append(CriticalValues.load(out).values[0])
        target = std_normal_quantile(0.95)
        assert np.allclose(values, target, atol=1e-9)

    def test_bad_alpha_is_usage_error(self, tmp_path):
        code = run(["critvals", "--k", "2", "--alpha", "1.5",
                    "--procedure", "step-down", "--out", str(tmp_path / "x.txt")])
        assert code == 2

    def test_unknown_flag_is_usage_error(self, tmp_path):
        assert run(["critvals", "--nope", "1"]) == 2

    def test_manifest_written(self, tmp_path):
        out = tmp_path / "cv.txt"
        manifest = tmp_path / "cv.manifest.json"
        run(["critvals", "--k", "2", "--rho", "0", "--procedure", "per-comparison",
             "--out", str(out), "--manifest", str(manifest)])
        payload = json.loads(manifest.read_text())
        assert payload["command"] == "critvals"
        assert str(out) in payload["outputs"]


class TestDecide:
    @pytest.fixture()
    def constants_file(self, tmp_path):
        path = tmp_path / "cv.txt"
        run(["critvals", "--k", "2", "--rho", "0", "--alpha", "0.05",
             "--procedure", "step-down", "--out", str(path)])
        return path

    def test_rows_are_decided(self, tmp_path, constants_file):
        infile = tmp_path / "z.csv"
        infile.write_text("z1,z2\n1.5,2.5\n1.7,1.8\n")
        out = tmp_path / "a.csv"
        assert run(["decide", "--constants", str(constants_file),
                    "--in", str(infile), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "z1,z2,a1,a2"
        assert lines[1] == "1.5,2.5,0,1"
        assert lines[2] == "1.7,1.8,0,0"

    def test_empty_input_gives_header_only(self, tmp_path, constants_file):
        infile = tmp_path / "z.csv"
        infile.write_text("z1,z2\n")
        out = tmp_path / "a.csv"
        assert run(["decide", "--constants", str(constants_file),
                    "--in", str(infile), "--out", str(out)]) == 0
        assert out.read_text() == "z1,z2,a1,a2\n"

    def test_non_numeric_token_names_line(self, tmp_path, constants_file, capsys):
        infile = tmp_path / "z.csv"
        infile.write_text("z1,z2\n1.0,2.0\n1.5,oops\n")
        out = tmp_path / "a.csv"
        assert run(["decide", "--constants", str(constants_file),
                    "--in", str(infile), "--out", str(out)]) == 3
        assert "line 3" in capsys.readouterr().err

    def test_wrong_width_is_data_error(self, tmp_path, constants_file, capsys):
        infile = tmp_path / "z.csv"
        infile.write_text("z1,z2\n1.0,2.0,3.0\n")
        assert run(["decide", "--constants", str(constants_file),
                    "--in", str(infile), "--out", str(tmp_path / "a.csv")]) == 3
        assert "line 2" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path, constants_file):
        assert run(["decide", "--constants", str(constants_file),
                    "--in", str(tmp_path / "nope.csv"),
                    "--out", str(tmp_path / "a.csv")]) == 3

    def test_header_dimension_mismatch_is_data_error(self, tmp_path, constants_file, capsys):
        infile = tmp_path / "z.csv"
        infile.write_text("z1,z2,z3\n1.0,2.0,3.0\n")
        assert run(["decide", "--constants", str(constants_file),
                    "--in", str(infile), "--out", str(tmp_path / "a.csv")]) == 3
        assert "header" in capsys.readouterr().err

    def test_corrupt_constants_file_is_data_error(self, tmp_path):
        bad = tmp_path / "cv.txt"
        bad.write_text("these are not constants\n")
        infile = tmp_path / "z.csv"
        infile.write_text("z1,z2\n")
        assert run(["decide", "--constants", str(bad),
                    "--in", str(infile), "--out", str(tmp_path / "a.csv")]) == 3


class TestRiskCurve:
    def test_origin_row_matches_closed_form(self, tmp_path):
        out = tmp_path / "risk.csv"
        assert run(["risk-curve", "--k", "2", "--rho", "0", "--alpha", "0.05",
                    "--procedure", "per-comparison", "--mu-grid", "0:4:1,0",
                    "--mc-reps", "200000", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("mu1,mu2,risk,se")
        first = [float(x) for x in lines[1].split(",")]
        assert first[0] == 0.0 and first[1] == 0.0
        # scalar risk at the origin is 2 * alpha
        assert abs(first[2] - 0.10) <= 3.0 * first[3]
        assert len(lines) == 6

    def test_accept_all_risk_is_kb_on_alternative(self, tmp_path):
        out = tmp_path / "risk.csv"
        assert run(["risk-curve", "--k", "2", "--rho", "0", "--b", "2.5",
                    "--procedure", "accept-all", "--mu-grid", "1,1",
                    "--mc-reps", "1000", "--out", str(out)]) == 0
        row = [float(x) for x in out.read_text().splitlines()[1].split(",")]
        assert row[2] == pytest.approx(5.0, abs=1e-12)

    def test_step_down_beats_single_step_at_large_means(self, tmp_path):
        rows = {}
        for proc in ("single-step", "step-down"):
            out = tmp_path / f"{proc}.csv"
            assert run(["risk-curve", "--k", "2", "--rho", "0", "--alpha", "0.05",
                        "--procedure", proc, "--mu-grid", "3,3",
                        "--mc-reps", "400000", "--seed", "3", "--out", str(out)]) == 0
            vals = [float(x) for x in out.read_text().splitlines()[1].split(",")]
            rows[proc] = vals
        risk_gap = rows["step-down"][2] - rows["single-step"][2]
        se = (rows["step-down"][3] ** 2 + rows["single-step"][3] ** 2) ** 0.5
        assert risk_gap <= 3.0 * se

    def test_empty_grid_is_usage_error(self, tmp_path):
        assert run(["risk-curve", "--k", "2", "--procedure", "accept-all",
                    "--mu-grid", "1,2,3", "--out", str(tmp_path / "r.csv")]) == 2

    def test_negative_mu_under_point_variant_is_error(self, tmp_path):
        code = run(["risk-curve", "--k", "2", "--procedure", "accept-all",
                    "--mu-grid", "-1,0", "--mc-reps", "100",
                    "--out", str(tmp_path / "r.csv")])
        assert code == 2


class TestVerify:
    def test_unknown_suite_is_usage_error(self):
        assert run(["verify", "nope"]) == 2

    def test_passing_suite_exits_zero(self, tmp_path, capsys):
        out = tmp_path / "report.txt"
        code = run(["verify", "delta-psi", "--mc-reps", "20000", "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert "result=pass" in text
        assert "suite=delta-psi" in text

    def test_manifest_replay_is_byte_identical(self, tmp_path):
        first = tmp_path / "r1.txt"
        code = run(["verify", "aggregate", "--k", "3", "--mc-reps", "20000",
                    "--seed", "9", "--out", str(first)])
        assert code == 0
        manifest = tmp_path / "r1.txt.manifest.json"
        assert manifest.exists()
        second = tmp_path / "r2.txt"
        assert run(["verify", "--from-manifest", str(manifest),
                    "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_monotonicity_single_step_negative_rho_passes(self, tmp_path, capsys):
        code = run(["verify", "monotonicity", "--procedure", "single-step",
                    "--rho", "-0.2", "--mc-reps", "150000"])
        assert code == 0

    def test_counterexample_suite(self, tmp_path):
        out = tmp_path / "ce.txt"
        code = run(["verify", "counterexample", "--k", "2", "--rho", "-0.4",
                    "--mc-reps", "150000", "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert "step_down_construction" in text
        assert "step_up_scan" in text

    def test_failing_suite_exits_one(self, capsys):
        # step-down is not section monotone at negative correlation, so the
        # zero-violations suite must fail there
        code = run(["verify", "monotonicity", "--procedure", "step-down",
                    "--rho", "-0.3", "--mc-reps", "150000", "--seed", "21"])
        assert code == 1

    def test_a1_passes_for_general_b(self, capsys):
        assert run(["verify", "a1", "--k", "3", "--b", "2", "--seed", "7",
                    "--mc-reps", "50000"]) == 0

    def test_counterexample_report_lists_points(self, tmp_path):
        out = tmp_path / "ce.txt"
        run(["verify", "counterexample", "--k", "2", "--rho", "-0.4",
             "--mc-reps", "100000", "--out", str(out)])
        text = out.read_text()
        assert "info.k2.rho-0.4.z_star=" in text
        assert "info.k2.rho-0.4.y_difference=" in text


class TestConfigFile:
    def test_config_supplies_flags(self, tmp_path):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({
            "k": 2, "rho": 0.0, "alpha": 0.05, "procedure": "per-comparison",
            "out": str(tmp_path / "cv.txt"),
        }))
        assert run(["critvals", "--config", str(config)]) == 0
        cv = CriticalValues.load(tmp_path / "cv.txt")
        assert cv.k == 2

    def test_flags_win_over_config(self, tmp_path):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"alpha": 0.05}))
        out = tmp_path / "cv.txt"
        assert run(["critvals", "--k", "1", "--alpha", "0.10",
                    "--procedure", "per-comparison", "--out", str(out),
                    "--config", str(config)]) == 0
        cv = CriticalValues.load(out)
        assert cv.values[0] == pytest.approx(std_normal_quantile(0.90), abs=1e-9)

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"bogus": 1}))
        assert run(["critvals", "--k", "1", "--procedure", "per-comparison",
                    "--out", str(tmp_path / "cv.txt"),
                    "--config", str(config)]) == 2

    def test_missing_required_after_merge_is_usage_error(self, tmp_path):
        assert run(["critvals", "--k", "2",
                    "--out", str(tmp_path / "cv.txt")]) == 2
