import numpy as np
import pytest

from twowayfb.cli import main


@pytest.fixture
def panel_csv(tmp_path):
    rng = np.random.default_rng(31)
    rows = ["firm,year,roa,hhi"]
    for i in range(6):
        for t in range(8):
            x = rng.standard_normal()
            y = 1.0 + 0.5 * x + rng.standard_normal()
            rows.append(f"f{i},{2000 + t},{y:.6f},{x:.6f}")
    path = tmp_path / "panel.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


SCHEMA_FLAGS = ["--unit", "firm", "--time", "year", "--y", "roa", "--x", "hhi"]


class TestInfer:
    def test_minimal_run(self, panel_csv, tmp_path, capsys):
        out = tmp_path / "report.csv"
        code = main(["infer", str(panel_csv), *SCHEMA_FLAGS,
                     "--estimators", "chs", "--bandwidth", "1",
                     "--format", "csv", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        # header + one row per coefficient (const, hhi)
        assert len(lines) == 3

    def test_missing_column_exits_2(self, panel_csv, capsys):
        code = main(["infer", str(panel_csv), "--unit", "firm", "--time", "quarter",
                     "--y", "roa", "--x", "hhi"])
        assert code == 2
        assert "quarter" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        code = main(["infer", str(tmp_path / "nope.csv"), *SCHEMA_FLAGS])
        assert code == 2

    def test_oversized_bandwidth_clamped_with_warning(self, panel_csv, capsys):
        code = main(["infer", str(panel_csv), *SCHEMA_FLAGS, "--bandwidth", "99"])
        assert code == 0
        err = capsys.readouterr().err
        assert "clamped" in err and "8" in err

    def test_collinear_design_exits_3(self, tmp_path):
        rows = ["firm,year,roa,hhi"]
        for i in range(3):
            for t in range(4):
                rows.append(f"f{i},{t},1.0,1.0")  # x identical to intercept
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(rows) + "\n")
        code = main(["infer", str(path), *SCHEMA_FLAGS])
        assert code == 3

    def test_unbalanced_exits_2(self, tmp_path):
        path = tmp_path / "unb.csv"
        path.write_text("firm,year,roa,hhi\na,1,1,2\na,2,1,2\nb,1,1,2\n")
        assert main(["infer", str(path), *SCHEMA_FLAGS]) == 2

    def test_table_output_deterministic_without_timestamp(self, panel_csv, tmp_path):
        outs = []
        for name in ("a.txt", "b.txt"):
            out = tmp_path / name
            code = main(["infer", str(panel_csv), *SCHEMA_FLAGS,
                         "--bandwidth", "2", "--cv", "fixedb", "--seed", "9",
                         "--cv-reps", "200", "--cv-increments", "60",
                         "--no-timestamp", "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_fixedb_without_seed_exits_4(self, panel_csv):
        assert main(["infer", str(panel_csv), *SCHEMA_FLAGS, "--cv", "fixedb"]) == 4


class TestCv:
    def test_iid_mode(self, tmp_path):
        out = tmp_path / "cv.csv"
        code = main(["cv", "--iid", "IID_DKA", "--b", "0.2", "--seed", "3",
                     "--cv-reps", "2000", "--cv-increments", "200", "--out", str(out)])
        assert code == 0
        body = out.read_text().splitlines()
        assert body[0] == "kind,b,c,level,value,reps,increments,seed"
        assert body[1].startswith("IID_DKA,0.2,")

    def test_plugin_mode(self, panel_csv, tmp_path):
        out = tmp_path / "cv.csv"
        code = main(["cv", str(panel_csv), *SCHEMA_FLAGS, "--coefficient", "hhi",
                     "--bandwidth", "2", "--seed", "4",
                     "--cv-reps", "300", "--cv-increments", "80", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3  # header + CHS + BCCHS_DKA
        assert lines[1].startswith("CHS,") and lines[2].startswith("BCCHS_DKA,")

    def test_requires_mode(self):
        assert main(["cv", "--seed", "1"]) == 4

    def test_iid_requires_b(self):
        assert main(["cv", "--iid", "IID_CHS", "--seed", "1"]) == 4


class TestMc:
    def test_runs_config(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "dgp = IID\nn_units = 8\nn_periods = 8\nreplications = 40\n"
            "bandwidths = 2\nestimators = EHW, CHS, DKA\ncv = normal\n"
        )
        out = tmp_path / "mc.csv"
        code = main(["mc", "--config", str(cfg), "--seed", "5", "--threads", "1",
                     "--format", "csv", "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert "estimator,bandwidth,cv_policy,coverage" in text

    def test_bad_config_exits_4(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("nonsense = 1\n")
        assert main(["mc", "--config", str(cfg), "--seed", "5"]) == 4

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["mc", "--config", str(tmp_path / "nope.cfg"), "--seed", "5"]) == 2


class TestAsytab:
    def test_small_grid(self, tmp_path):
        out = tmp_path / "tab.csv"
        code = main(["asytab", "--b-grid", "0,0.4", "--reps", "500",
                     "--increments", "100", "--seed", "7",
                     "--format", "csv", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(1.959964, abs=1e-4)

    def test_byte_identical_reruns(self, tmp_path):
        blobs = []
        for name in ("t1.txt", "t2.txt"):
            out = tmp_path / name
            code = main(["asytab", "--b-grid", "0.2", "--reps", "400",
                         "--increments", "80", "--seed", "21",
                         "--no-timestamp", "--out", str(out)])
            assert code == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_default_grid_stdout(self, capsys):
        code = main(["asytab", "--reps", "200", "--increments", "50",
                     "--seed", "2", "--no-timestamp"])
        assert code == 0
        out = capsys.readouterr().out
        assert "0.08" in out and "1.00" in out
