import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from redunet import cli, selection
from redunet.trainer import TrainingDiverged

FAST = ["--hidden-min", "2", "--hidden-max", "3", "--folds", "3", "--iters", "60"]


def read_matrix(path):
    rows = list(csv.reader(open(path)))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


@pytest.fixture
def iris_csv(data_dir):
    return str(data_dir / "iris.csv")


class TestDeps:
    def test_iris(self, iris_csv, tmp_path):
        out = tmp_path / "dep.csv"
        assert cli.main(["deps", "--data", iris_csv, "--out", str(out)]) == 0
        names, M = read_matrix(out)
        assert M.shape == (4, 4) and names[2] == "petal_length"
        assert abs(M[2, 3] - 0.9216) <= 0.01

    def test_landsat_groups(self, data_dir, tmp_path):
        out = tmp_path / "dep.csv"
        rc = cli.main(["deps", "--data", str(data_dir / "landsat.csv"),
                       "--groups", str(data_dir / "landsat.groups"), "--out", str(out)])
        assert rc == 0
        _, M = read_matrix(out)
        table = np.array([[1.00, 0.87, 0.81, 0.69], [0.88, 1.00, 0.88, 0.79],
                          [0.79, 0.88, 1.00, 0.88], [0.68, 0.81, 0.87, 1.00]])
        np.testing.assert_allclose(M, table, atol=0.01)
        assert not np.allclose(M, M.T)

    def test_single_feature(self, tmp_path):
        f = tmp_path / "one.csv"
        f.write_text("x,y\n1,a\n2,b\n4,a\n")
        out = tmp_path / "dep.csv"
        assert cli.main(["deps", "--data", str(f), "--out", str(out)]) == 0
        _, M = read_matrix(out)
        np.testing.assert_allclose(M, [[1.0]])

    def test_missing_file(self, tmp_path):
        assert cli.main(["deps", "--data", str(tmp_path / "no.csv"), "--out", str(tmp_path / "o")]) == 2

    def test_bad_groups(self, iris_csv, tmp_path):
        g = tmp_path / "g.txt"
        g.write_text("1-3;3-4\n")
        rc = cli.main(["deps", "--data", iris_csv, "--groups", str(g), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestTrace:
    def test_zero_iterations(self, iris_csv, tmp_path):
        out = tmp_path / "t.csv"
        assert cli.main(["trace", "--data", iris_csv, "--iters", "0", "--out", str(out)]) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["iter", "total_loss", "grad_norm", "norm_g1", "norm_g2", "norm_g3", "norm_g4"]
        assert len(rows) == 2

    def test_redundant_feature_decays(self, iris_csv, tmp_path):
        out = tmp_path / "t.csv"
        rc = cli.main(["trace", "--data", iris_csv, "--lambda", "5", "--mu", "0", "--eta", "0.02",
                       "--hidden", "2", "--iters", "500", "--seed", "0", "--out", str(out)])
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 501
        last = np.array([float(rows[-1][f"norm_g{i}"]) for i in range(1, 5)])
        assert last[0] < 0.1 * last.max()

    def test_no_penalty_no_forced_decay(self, iris_csv, tmp_path):
        out = tmp_path / "t.csv"
        cli.main(["trace", "--data", iris_csv, "--eta", "0.02", "--hidden", "2", "--out", str(out)])
        rows = list(csv.DictReader(open(out)))
        last = np.array([float(rows[-1][f"norm_g{i}"]) for i in range(1, 5)])
        assert last[0] >= 0.1 * last.max()

    def test_bad_eta(self, iris_csv, tmp_path):
        assert cli.main(["trace", "--data", iris_csv, "--eta", "0", "--out", str(tmp_path / "t")]) == 2

    def test_divergence_exit_3(self, iris_csv, tmp_path):
        rc = cli.main(["trace", "--data", iris_csv, "--eta", "1e305", "--iters", "5",
                       "--out", str(tmp_path / "t.csv")])
        assert rc == 3


class TestTrainSelect:
    def test_train_then_select(self, iris_csv, tmp_path):
        w = tmp_path / "w.json"
        assert cli.main(["train", "--data", iris_csv, "--lambda", "5", "--eta", "0.02", "--hidden", "2",
                         "--out", str(w)]) == 0
        assert json.loads(w.read_text())["shape"] == {"p": 4, "h": 2, "c": 3}
        sel = tmp_path / "s.json"
        assert cli.main(["select", "--data", iris_csv, "--weights", str(w), "--out", str(sel)]) == 0
        obj = json.loads(sel.read_text())
        assert 1 not in obj["selected"] and obj["rule"] == "relative_threshold"

    def test_select_top_d(self, iris_csv, tmp_path, capsys):
        assert cli.main(["select", "--data", iris_csv, "--top-d", "2", "--iters", "50"]) == 0
        assert len(json.loads(capsys.readouterr().out)["selected"]) == 2

    def test_weights_mismatch(self, iris_csv, data_dir, tmp_path):
        w = tmp_path / "w.json"
        cli.main(["train", "--data", iris_csv, "--iters", "2", "--out", str(w)])
        rc = cli.main(["select", "--data", str(data_dir / "thyroid.csv"), "--weights", str(w)])
        assert rc == 2


class TestCv:
    def test_report_and_determinism(self, iris_csv, tmp_path):
        args = ["cv", "--data", iris_csv, "--lambda", "2", "--repeats", "2", *FAST]
        assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "report.json").read_bytes()
        assert a == (tmp_path / "b" / "report.json").read_bytes()
        assert "FinalTestAcc" in json.loads(a)
        assert len(list(csv.reader(open(tmp_path / "a" / "repeats.csv")))) == 3

    def test_experiment_failure(self, iris_csv, tmp_path, monkeypatch):
        def always(*a, **k):
            raise TrainingDiverged("planted")

        monkeypatch.setattr(selection, "train", always)
        monkeypatch.setattr(selection, "choose_hidden_nodes", lambda *a, **k: 2)
        rc = cli.main(["cv", "--data", iris_csv, "--repeats", "3", *FAST, "--out", str(tmp_path / "o")])
        assert rc == 3

    def test_config_file(self, iris_csv, tmp_path):
        conf = tmp_path / "run.toml"
        conf.write_text(f'data = "{iris_csv}"\nlambda = 2.0\nrepeats = 2\n[cv]\nhidden-max = 3\n'
                        'folds = 3\niters = 60\nseed = 4\n')
        assert cli.main(["cv", "--config", str(conf), "--out", str(tmp_path / "a")]) == 0
        rep = json.loads((tmp_path / "a" / "report.json").read_text())
        assert rep["config"]["lambda"] == 2.0 and rep["config"]["seed"] == 4
        assert cli.main(["cv", "--config", str(conf), "--seed", "9", "--out", str(tmp_path / "b")]) == 0
        assert json.loads((tmp_path / "b" / "report.json").read_text())["config"]["seed"] == 9

    def test_config_unknown_key(self, tmp_path, iris_csv):
        conf = tmp_path / "run.toml"
        conf.write_text("bogus = 1\n")
        assert cli.main(["deps", "--config", str(conf), "--data", iris_csv, "--out", "x"]) == 2


class TestSweep:
    def test_empty_grid(self, iris_csv, tmp_path):
        assert cli.main(["sweep", "--data", iris_csv, "--lambdas", "", "--out", str(tmp_path / "s")]) == 2

    def test_single_cell_matches_cv(self, iris_csv, tmp_path):
        common = ["--data", iris_csv, "--repeats", "2", "--seed", "3", *FAST]
        assert cli.main(["sweep", *common, "--lambdas", "4", "--mus", "0.5", "--out", str(tmp_path / "s.csv")]) == 0
        assert cli.main(["cv", *common, "--lambda", "4", "--mu", "0.5", "--out", str(tmp_path / "cv")]) == 0
        rows = list(csv.DictReader(open(tmp_path / "s.csv")))
        assert list(rows[0]) == ["lambda", "mu", "FinalTestAcc", "avg_selected", "max_dep", "avg_dep"]
        rep = json.loads((tmp_path / "cv" / "report.json").read_text())
        assert float(rows[0]["FinalTestAcc"]) == rep["FinalTestAcc"]
        assert float(rows[0]["avg_selected"]) == rep["summary"]["avg_selected"]

    def test_grid_rows(self, iris_csv, tmp_path):
        out = tmp_path / "s.csv"
        assert cli.main(["sweep", "--data", iris_csv, "--repeats", "1", *FAST, "--lambdas", "0,10",
                         "--mus", "0,1", "--out", str(out)]) == 0
        assert len(list(csv.DictReader(open(out)))) == 4


def test_usage_error_exit_code():
    assert cli.main(["deps"]) == 2
    assert cli.main(["nonsense"]) == 2


def test_module_entry_point(iris_csv, tmp_path):
    out = tmp_path / "d.csv"
    res = subprocess.run([sys.executable, "-m", "redunet", "deps", "--data", iris_csv, "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and out.exists()
