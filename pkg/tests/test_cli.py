"""Command-line interface: subcommands, formats, grids, exit codes."""

import json
import time

import numpy as np
import pytest

from shapeboost.bags import Bag, LabeledSample, save_mil_jsonl, save_timeseries_csv
from shapeboost.cli import (
    MIL_NU_GRID,
    MIL_SIGMA2_GRID,
    SL_INV_SIGMA2_GRID,
    SL_NU_GRID,
    main,
    stratified_folds,
)
from shapeboost.model import load_model, score_bags
from shapeboost.estimator import series_to_bags

pytestmark = pytest.mark.filterwarnings(
    "ignore:boosting stopped at the column cap"
)


def spike_dataset(rng, n_per_class, length=16):
    # The spiked rows get the larger label so the loader's sign mapping
    # makes them the positive class, which is the side the max-instance
    # scoring can pick patterns from.
    X = rng.normal(scale=0.25, size=(2 * n_per_class, length))
    y = np.array([2] * n_per_class + [1] * n_per_class)
    for i in range(n_per_class):
        X[i, 4:7] += 3.0
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


@pytest.fixture
def series_files(tmp_path):
    rng = np.random.default_rng(0)
    X, y = spike_dataset(rng, 8)
    Xt, yt = spike_dataset(rng, 6)
    train = tmp_path / "train.csv"
    test = tmp_path / "test.csv"
    save_timeseries_csv(str(train), X, y)
    save_timeseries_csv(str(test), Xt, yt)
    return str(train), str(test)


@pytest.fixture
def mil_file(tmp_path):
    rng = np.random.default_rng(1)
    bags, labels = [], []
    for i in range(14):
        inst = rng.normal(scale=0.3, size=(3, 4))
        if i % 2 == 0:
            inst[0] += 3.0
        bags.append(Bag(list(inst)))
        labels.append(1 if i % 2 == 0 else -1)
    path = tmp_path / "bags.jsonl"
    save_mil_jsonl(str(path), LabeledSample(bags, labels))
    return str(path)


def run_cli(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


TRAIN_FLAGS = ["--lengths", "4", "--nu", "0.3", "--sigma2", "0.5", "--k", "0",
               "--max-columns", "12"]


class TestGrids:
    def test_default_grid_constants(self):
        assert SL_NU_GRID == (0.1, 0.2, 0.3, 0.4)
        assert SL_INV_SIGMA2_GRID == (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0)
        assert MIL_NU_GRID == (0.5, 0.3, 0.2, 0.15, 0.1)
        assert MIL_SIGMA2_GRID == (0.005, 0.01, 0.05, 0.1, 0.5, 1.0)


class TestTrain:
    def test_train_writes_model_and_summary(self, series_files, tmp_path, capsys):
        train, _ = series_files
        out = str(tmp_path / "model.json")
        code, stdout = run_cli(
            capsys, ["train", train, *TRAIN_FLAGS, "--seed", "0", "--out", out]
        )
        assert code == 0
        summary = json.loads(stdout)
        # Two-class label sets are sign-mapped when the file is loaded.
        assert summary["classes"] == [-1, 1]
        assert summary["training_accuracy"] == 1.0
        assert summary["nu"] == 0.3
        assert summary["sigma2"] == 0.5
        assert summary["columns"] >= 1
        assert summary["model"] == out
        model = load_model(out)
        assert model.meta["task"] == "timeseries"
        assert model.meta["lengths"] == [4]

    def test_train_deterministic_given_seed(self, series_files, tmp_path, capsys):
        train, _ = series_files
        out_a = str(tmp_path / "a.json")
        out_b = str(tmp_path / "b.json")
        flags = ["--lengths", "4", "--nu", "0.3", "--sigma2", "0.5", "--k", "6",
                 "--max-columns", "8", "--seed", "5"]
        assert run_cli(capsys, ["train", train, *flags, "--out", out_a])[0] == 0
        assert run_cli(capsys, ["train", train, *flags, "--out", out_b])[0] == 0
        a = json.loads(open(out_a).read())
        b = json.loads(open(out_b).read())
        assert a == b

    def test_mil_train(self, mil_file, tmp_path, capsys):
        out = str(tmp_path / "mil_model.json")
        code, stdout = run_cli(
            capsys,
            ["train", mil_file, "--task", "mil", "--nu", "0.3", "--sigma2", "0.5",
             "--k", "0", "--max-columns", "10", "--out", out],
        )
        assert code == 0
        assert json.loads(stdout)["training_accuracy"] == 1.0
        assert load_model(out).meta["task"] == "mil"

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = main(["train", str(tmp_path / "nope.csv"), "--nu", "0.2",
                     "--out", str(tmp_path / "m.json")])
        capsys.readouterr()
        assert code == 2

    def test_ragged_csv_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,0.5,0.25\n-1,0.5\n")
        code = main(["train", str(bad), "--nu", "0.2", "--out", str(tmp_path / "m.json")])
        capsys.readouterr()
        assert code == 2

    def test_unseparable_data_exits_3(self, tmp_path, capsys):
        # Identical series with opposite labels leave no hypothesis with
        # a positive edge, so column generation cannot start.
        path = tmp_path / "dup.csv"
        path.write_text("1,0.5,0.25,0.75\n-1,0.5,0.25,0.75\n")
        code = main(["train", str(path), "--lengths", "3", "--nu", "1.0",
                     "--k", "0", "--out", str(tmp_path / "m.json")])
        capsys.readouterr()
        assert code == 3

    def test_invalid_length_token_exits_2(self, series_files, tmp_path, capsys):
        train, _ = series_files
        code = main(["train", train, "--lengths", "abc", "--nu", "0.2",
                     "--out", str(tmp_path / "m.json")])
        capsys.readouterr()
        assert code == 2


class TestPredictEvalExplain:
    @pytest.fixture
    def trained(self, series_files, tmp_path, capsys):
        train, test = series_files
        out = str(tmp_path / "model.json")
        assert run_cli(
            capsys, ["train", train, *TRAIN_FLAGS, "--seed", "0", "--out", out]
        )[0] == 0
        return out, train, test

    def test_predict_csv_schema(self, trained, tmp_path, capsys):
        model, _, test = trained
        code, stdout = run_cli(capsys, ["predict", test, "--model", model])
        assert code == 0
        lines = stdout.strip().split("\n")
        assert lines[0] == "index,score,label"
        assert len(lines) == 1 + 12
        for i, line in enumerate(lines[1:]):
            idx, score, label = line.split(",")
            assert int(idx) == i
            float(score)
            assert int(label) in (-1, 1)

    def test_predict_out_file_matches_loaded_model(self, trained, tmp_path, capsys):
        model_path, _, test = trained
        out = tmp_path / "preds.csv"
        code, _ = run_cli(
            capsys, ["predict", test, "--model", model_path, "--out", str(out)]
        )
        assert code == 0
        rows = out.read_text().strip().split("\n")[1:]
        got = np.array([float(r.split(",")[1]) for r in rows])
        model = load_model(model_path)
        from shapeboost.bags import load_timeseries_csv

        X, _ = load_timeseries_csv(test)
        bags = series_to_bags(X, model.lengths)
        np.testing.assert_allclose(got, score_bags(model, bags), atol=1e-12)

    def test_eval_reports_accuracy_and_margin_loss(self, trained, capsys):
        model, _, test = trained
        code, stdout = run_cli(
            capsys, ["eval", test, "--model", model, "--rho", "0.0,0.2"]
        )
        assert code == 0
        metrics = json.loads(stdout)
        assert metrics["n_bags"] == 12
        assert 0.0 <= metrics["accuracy"] <= 1.0
        losses = metrics["margin_loss"]
        assert set(losses) == {"0.0", "0.2"}
        # At threshold zero the margin loss is the error rate.
        assert losses["0.0"] == pytest.approx(1.0 - metrics["accuracy"], abs=1e-12)
        assert losses["0.2"] >= losses["0.0"]

    def test_explain_one_record_per_bag(self, trained, tmp_path, capsys):
        model_path, _, test = trained
        out = tmp_path / "explain.jsonl"
        code, _ = run_cli(
            capsys, ["explain", test, "--model", model_path, "--out", str(out)]
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(records) == 12
        n_terms = len(load_model(model_path).terms)
        for i, record in enumerate(records):
            assert record["bag_index"] == i
            assert len(record["terms"]) == n_terms
            total = sum(t["contribution"] for t in record["terms"])
            assert total == pytest.approx(record["score"], abs=1e-9)
            assert record["label"] in (-1, 1)


class TestMulticlass:
    @pytest.fixture
    def three_class_files(self, tmp_path):
        rng = np.random.default_rng(3)
        X = rng.normal(scale=0.2, size=(18, 16))
        y = np.repeat([0, 1, 2], 6)
        patterns = {0: 3.0, 1: -3.0, 2: 0.0}
        for i, label in enumerate(y):
            X[i, 5:8] += patterns[label]
            if label == 2:
                X[i, 5] += 3.0
                X[i, 7] -= 3.0
        train = tmp_path / "train3.csv"
        save_timeseries_csv(str(train), X, y)
        return str(train)

    def test_container_train_predict_eval_explain(
        self, three_class_files, tmp_path, capsys
    ):
        outdir = tmp_path / "container"
        code, stdout = run_cli(
            capsys,
            ["train", three_class_files, "--lengths", "3", "--nu", "0.3",
             "--sigma2", "0.5", "--k", "0", "--max-columns", "10",
             "--out", str(outdir)],
        )
        assert code == 0
        summary = json.loads(stdout)
        assert summary["classes"] == [0, 1, 2]
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["container"] == "one-vs-rest"
        assert set(manifest["files"]) == {"0", "1", "2"}
        for name in manifest["files"].values():
            assert (outdir / name).is_file()

        code, stdout = run_cli(
            capsys, ["predict", three_class_files, "--model", str(outdir)]
        )
        assert code == 0
        labels = [int(l.split(",")[2]) for l in stdout.strip().split("\n")[1:]]
        assert set(labels) <= {0, 1, 2}

        code, stdout = run_cli(
            capsys, ["eval", three_class_files, "--model", str(outdir)]
        )
        assert code == 0
        metrics = json.loads(stdout)
        assert metrics["accuracy"] >= 0.9
        assert "margin_loss" not in metrics

        code = main(["explain", three_class_files, "--model", str(outdir),
                     "--out", str(tmp_path / "x.jsonl")])
        capsys.readouterr()
        assert code == 2


class TestTune:
    def test_single_cell_tune_equals_train(self, series_files, tmp_path, capsys):
        train, _ = series_files
        out_train = str(tmp_path / "train.json")
        out_tune = str(tmp_path / "tune.json")
        flags = ["--lengths", "4", "--k", "0", "--max-columns", "12", "--seed", "0"]
        assert run_cli(
            capsys,
            ["train", train, *flags, "--nu", "0.3", "--sigma2", "0.5",
             "--out", out_train],
        )[0] == 0
        code, stdout = run_cli(
            capsys,
            ["tune", train, *flags, "--nu", "0.3", "--sigma2", "0.5",
             "--folds", "3", "--runs", "1", "--out", out_tune],
        )
        assert code == 0
        summary = json.loads(stdout)
        assert summary["nu"] == 0.3
        assert summary["sigma2"] == 0.5
        assert len(summary["cv_table"]) == 1
        assert json.loads(open(out_tune).read()) == json.loads(open(out_train).read())

    def test_tune_picks_the_separating_bandwidth(self, series_files, tmp_path, capsys):
        train, test = series_files
        out = str(tmp_path / "tuned.json")
        code, stdout = run_cli(
            capsys,
            ["tune", train, "--lengths", "4", "--k", "0", "--max-columns", "8",
             "--nu", "0.3", "--sigma2", "0.5,1e-8", "--folds", "3",
             "--runs", "1", "--seed", "0", "--out", out],
        )
        assert code == 0
        summary = json.loads(stdout)
        # A vanishing bandwidth memorizes training windows and scores every
        # held-out bag near zero, so cross-validation must reject it.
        assert summary["sigma2"] == 0.5
        cells = {row["sigma2"]: row["cv_accuracy"] for row in summary["cv_table"]}
        assert cells[0.5] > cells[1e-8]
        code, stdout = run_cli(capsys, ["eval", test, "--model", out])
        assert code == 0
        assert json.loads(stdout)["accuracy"] >= 0.9

    def test_rough_tune_is_at_least_twice_as_fast(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        X, y = spike_dataset(rng, 10, length=24)
        train = tmp_path / "train.csv"
        save_timeseries_csv(str(train), X, y)
        flags = ["--lengths", "4,6", "--k", "8", "--nu", "0.1,0.3",
                 "--sigma2", "0.05,0.5", "--folds", "3", "--runs", "1",
                 "--seed", "0"]
        start = time.perf_counter()
        code, _ = run_cli(
            capsys,
            ["tune", str(train), *flags, "--out", str(tmp_path / "full.json")],
        )
        full_time = time.perf_counter() - start
        assert code == 0
        start = time.perf_counter()
        code, stdout = run_cli(
            capsys,
            ["tune", str(train), *flags, "--rough-tune",
             "--out", str(tmp_path / "rough.json")],
        )
        rough_time = time.perf_counter() - start
        assert code == 0
        assert json.loads(stdout)["rough_tune"] is True
        assert rough_time * 2.0 <= full_time

    def test_single_member_class_fold_skipped_with_warning(
        self, tmp_path, capsys
    ):
        rng = np.random.default_rng(5)
        X = rng.normal(scale=0.25, size=(7, 12))
        X[:6, 3:5] += 3.0
        y = np.array([1, 1, 1, 1, 1, 1, -1])
        train = tmp_path / "skew.csv"
        save_timeseries_csv(str(train), X, y)
        with pytest.warns(UserWarning, match="single-class training fold"):
            code, _ = run_cli(
                capsys,
                ["tune", str(train), "--lengths", "3", "--k", "0",
                 "--nu", "1.0", "--sigma2", "0.5", "--folds", "2", "--runs", "1",
                 "--max-columns", "6", "--out", str(tmp_path / "m.json")],
            )
        assert code == 0


class TestStratifiedFolds:
    def test_partition_covers_everything_once(self):
        labels = np.array([0] * 7 + [1] * 5)
        folds = stratified_folds(labels, 3, np.random.default_rng(0))
        allidx = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(allidx, np.arange(12))

    def test_class_balance_within_one(self):
        labels = np.array([0] * 9 + [1] * 6)
        folds = stratified_folds(labels, 3, np.random.default_rng(1))
        for value in (0, 1):
            counts = [int(np.sum(labels[f] == value)) for f in folds]
            assert max(counts) - min(counts) <= 1

    def test_seed_controls_the_deal(self):
        labels = np.array([0, 0, 0, 1, 1, 1])
        a = stratified_folds(labels, 2, np.random.default_rng(7))
        b = stratified_folds(labels, 2, np.random.default_rng(7))
        c = stratified_folds(labels, 2, np.random.default_rng(8))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))
