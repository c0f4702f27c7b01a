import csv

import numpy as np
import pytest

from rankad import cli, datagen, evaluation, storage


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--spec", "fig2", "--n", "150", "--seed", "3", "-o", str(d / "train.csv")]) == 0
    assert cli.main(["synth", "--n", "100", "--n-anomaly", "100", "--seed", "4", "-o", str(d / "test.csv")]) == 0
    assert cli.main(["train", "--data", str(d / "train.csv"), "--sigma", "4.0", "--model", str(d / "m.json")]) == 0
    return d


class TestSynth:
    def test_shapes_and_labels(self, workdir):
        X = storage.load_dataset(workdir / "train.csv")
        assert X.shape == (150, 2)
        T, y = storage.load_dataset(workdir / "test.csv", has_labels=True)
        assert T.shape == (200, 2) and y.sum() == 100

    def test_matches_library(self, workdir):
        X = storage.load_dataset(workdir / "train.csv")
        np.testing.assert_array_equal(X, datagen.sample_mixture(datagen.GAUSSIAN_TOY_MIXTURE, 150, 3))

    def test_config_spec(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("spec = config\nweights = 0.5,0.5\nmeans = 0,0;3,3\ncovs = 1,0,0,1;1,0,0,1\nn = 20\n")
        assert cli.main(["synth", "--config", str(cfg), "-o", str(tmp_path / "d.csv")]) == 0
        assert storage.load_dataset(tmp_path / "d.csv").shape == (20, 2)

    def test_unknown_spec(self, tmp_path):
        assert cli.main(["synth", "--spec", "nope", "-o", str(tmp_path / "d.csv")]) == cli.EXIT_USAGE


class TestTrainDetect:
    def test_detect_columns(self, workdir):
        out = workdir / "d.csv"
        args = ["detect", "--model", str(workdir / "m.json"), "--data", str(workdir / "test.csv"), "--has-labels"]
        assert cli.main(args + ["--alpha", "0.1", "-o", str(out)]) == 0
        rows = read_rows(out)
        assert list(rows[0]) == ["score", "rank", "is_anomaly"]
        assert len(rows) == 200
        det = storage.load_model(workdir / "m.json")
        T, _ = storage.load_dataset(workdir / "test.csv", has_labels=True)
        np.testing.assert_array_equal([int(r["is_anomaly"]) for r in rows], det.flags(T, 0.1).astype(int))

    def test_alpha_zero_flags_nothing(self, workdir):
        out = workdir / "d0.csv"
        args = ["detect", "--model", str(workdir / "m.json"), "--data", str(workdir / "test.csv"), "--has-labels"]
        assert cli.main(args + ["--alpha", "0", "-o", str(out)]) == 0
        assert all(r["is_anomaly"] == "0" for r in read_rows(out))

    def test_eval(self, workdir):
        out, roc = workdir / "e.csv", workdir / "roc.csv"
        args = ["eval", "--model", str(workdir / "m.json"), "--data", str(workdir / "test.csv")]
        assert cli.main(args + ["--alphas", "0.05,0.1", "-o", str(out), "--roc-output", str(roc)]) == 0
        metrics = {r["metric"]: float(r["value"]) for r in read_rows(out)}
        assert set(metrics) == {"auc", "false_alarm@0.05", "detection@0.05", "false_alarm@0.1", "detection@0.1"}
        det = storage.load_model(workdir / "m.json")
        T, y = storage.load_dataset(workdir / "test.csv", has_labels=True)
        s = det.score(T)
        assert metrics["auc"] == evaluation.auc_score(s[y == 0], s[y == 1])
        assert list(read_rows(roc)[0]) == ["threshold", "fpr", "tpr"]

    def test_level_grid(self, workdir):
        out = workdir / "g.csv"
        assert cli.main(["level-grid", "--model", str(workdir / "m.json"), "--resolution", "5", "-o", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 25 and list(rows[0]) == ["x", "y", "score"]

    def test_bench(self, workdir):
        out = workdir / "b.csv"
        args = ["bench", "--model", str(workdir / "m.json"), "--train-data", str(workdir / "train.csv")]
        args += ["--test-data", str(workdir / "test.csv"), "--has-labels", "--max-points", "20", "-o", str(out)]
        assert cli.main(args) == 0
        rows = read_rows(out)
        assert [r["method"] for r in rows] == ["rankad", "aklpe"]
        assert list(rows[0])[2:] == ["repeat_1", "repeat_2", "repeat_3"]

    def test_flags_override_config(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("sigma = 2.0\nC = 0.5\n")
        model = tmp_path / "m.json"
        args = ["train", "--config", str(cfg), "--data", str(workdir / "train.csv"), "--C", "3", "--model", str(model)]
        assert cli.main(args) == 0
        err = capsys.readouterr().err
        assert "# C = 3.0" in err and "# sigma = 2.0" in err
        _, params = storage.load_model(model, with_params=True)
        assert (params["C"], params["sigma"]) == (3.0, 2.0)


class TestCv:
    def test_report(self, workdir):
        out = workdir / "cv.csv"
        args = ["cv", "--data", str(workdir / "train.csv"), "--c-values", "0.1,1", "--sigma-exponents", "0,2"]
        assert cli.main(args + ["-o", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 4
        assert list(rows[0])[:3] == ["C", "sigma", "mean_disagreement"]
        assert sum(int(r["chosen"]) for r in rows) == 1


class TestErrors:
    def test_one_row_train(self, tmp_path):
        (tmp_path / "one.csv").write_text("1,2\n")
        args = ["train", "--data", str(tmp_path / "one.csv"), "--model", str(tmp_path / "m.json")]
        assert cli.main(args) == cli.EXIT_DATA

    def test_missing_required(self):
        assert cli.main(["train"]) == cli.EXIT_USAGE

    def test_no_command(self):
        assert cli.main([]) == cli.EXIT_USAGE

    def test_unknown_flag(self):
        assert cli.main(["detect", "--bogus"]) == cli.EXIT_USAGE

    def test_missing_file(self, tmp_path):
        args = ["detect", "--model", str(tmp_path / "none.json"), "--data", str(tmp_path / "x.csv")]
        assert cli.main(args) == cli.EXIT_DATA

    def test_corrupt_model(self, workdir, tmp_path):
        bad = tmp_path / "m.json"
        bad.write_text((workdir / "m.json").read_text().replace('"C"', '"C_"', 1))
        args = ["detect", "--model", str(bad), "--data", str(workdir / "train.csv")]
        assert cli.main(args) == cli.EXIT_DATA

    def test_nan_in_data(self, workdir, tmp_path):
        (tmp_path / "nan.csv").write_text("1,2\nnan,3\n")
        args = ["detect", "--model", str(workdir / "m.json"), "--data", str(tmp_path / "nan.csv")]
        assert cli.main(args) == cli.EXIT_DATA

    def test_bad_config_line(self, tmp_path):
        (tmp_path / "c.txt").write_text("what\n")
        assert cli.main(["cv", "--config", str(tmp_path / "c.txt"), "--data", "x.csv"]) == cli.EXIT_USAGE


def test_synth_train_cv_eval_pipeline(tmp_path):
    """synth fig2 (n=600, seed 7) -> train --cv -> eval, checked against the library."""
    d = tmp_path
    assert cli.main(["synth", "--spec", "fig2", "--n", "600", "--seed", "7", "-o", str(d / "tr.csv")]) == 0
    assert cli.main(["synth", "--n", "500", "--n-anomaly", "1000", "--seed", "8", "-o", str(d / "te.csv")]) == 0
    assert cli.main(["train", "--data", str(d / "tr.csv"), "--cv", "--seed", "7", "--model", str(d / "m.json")]) == 0
    assert cli.main(["eval", "--model", str(d / "m.json"), "--data", str(d / "te.csv"), "-o", str(d / "e.csv")]) == 0
    auc = {r["metric"]: float(r["value"]) for r in read_rows(d / "e.csv")}["auc"]
    T, y = storage.load_dataset(d / "te.csv", has_labels=True)
    f = datagen.mixture_density(datagen.GAUSSIAN_TOY_MIXTURE, T)
    bayes = evaluation.auc_score(f[y == 0], f[y == 1])
    print(f"cli pipeline auc={auc:.4f} bayes={bayes:.4f}")
    assert 0.5 < auc <= 1.0
