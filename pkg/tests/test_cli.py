import json

import pytest
from click.testing import CliRunner

from asdkit.cli import main


@pytest.fixture
def runner():
    return CliRunner()


class TestInspect:
    def test_children_summary(self, runner):
        r = runner.invoke(main, ["inspect", "children"])
        assert r.exit_code == 0
        assert "rows: 292" in r.output
        assert "attributes: 21" in r.output
        assert "YES=141" in r.output and "NO=151" in r.output
        assert "missing total: 90" in r.output

    def test_adult_summary(self, runner):
        r = runner.invoke(main, ["inspect", "adult"])
        assert r.exit_code == 0
        assert "rows: 704" in r.output
        assert "YES=189" in r.output and "NO=515" in r.output
        assert "missing total: 192" in r.output

    def test_missing_file_clean_error(self, runner, tmp_path):
        r = runner.invoke(main, ["inspect", str(tmp_path / "nope.arff")])
        assert r.exit_code != 0

    def test_empty_file_clean_error(self, runner, tmp_path):
        p = tmp_path / "empty.arff"
        p.write_text("")
        r = runner.invoke(main, ["inspect", str(p)])
        assert r.exit_code != 0


class TestTrain:
    def test_train_json_output(self, runner):
        r = runner.invoke(
            main,
            ["train", "--dataset", "children", "--model", "naive_bayes",
             "--params", "table4", "--drop-leaky", "--seed", "1", "--json"],
        )
        assert r.exit_code == 0, r.output
        payload = json.loads(r.stdout)
        assert "metrics" in payload and "manifest_hash" in payload
        assert 0.8 <= payload["metrics"]["accuracy"] <= 1.0

    def test_train_svm_table5_row(self, runner):
        r = runner.invoke(
            main,
            ["train", "--dataset", "children", "--model", "svm",
             "--params", "table4", "--drop-leaky", "--seed", "1", "--json"],
        )
        assert r.exit_code == 0, r.output
        payload = json.loads(r.stdout)
        assert payload["metrics"]["accuracy"] >= 0.98

    def test_idempotent_given_flags(self, runner):
        args = ["train", "--dataset", "children", "--model", "decision_tree",
                "--params", "table4", "--seed", "7", "--json"]
        a = runner.invoke(main, args)
        b = runner.invoke(main, args)
        assert a.stdout == b.stdout

    def test_artifacts_written(self, runner, tmp_path):
        out = tmp_path / "run"
        r = runner.invoke(
            main,
            ["train", "--dataset", "children", "--model", "naive_bayes",
             "--params", "table4", "--seed", "2", "--out", str(out)],
        )
        assert r.exit_code == 0, r.output
        assert (out / "report.json").is_file()
        assert (out / "ranking.png").is_file()


class TestCluster:
    def test_cluster_json(self, runner):
        r = runner.invoke(
            main,
            ["cluster", "--dataset", "children", "--k", "2", "--seed", "1",
             "--drop-leaky", "--json"],
        )
        assert r.exit_code == 0, r.output
        payload = json.loads(r.stdout)
        assert set(payload) == {"kmeans", "agglomerative", "gmm", "spectral", "birch"}
        for rep in payload.values():
            assert set(rep) == {"nmi", "ari", "silhouette"}


class TestGridsearch:
    def test_lr_grid_consistency(self, runner):
        """The emitted best point retrains to the grid-search CV score."""
        r = runner.invoke(
            main,
            ["gridsearch", "--dataset", "children", "--model",
             "logistic_regression", "--folds", "3", "--seed", "3",
             "--drop-leaky", "--json"],
        )
        assert r.exit_code == 0, r.output
        payload = json.loads(r.stdout)
        assert payload["best"]["penalty"] in ("l1", "l2")
        best_rows = [
            row for row in payload["table"]
            if row["params"] == payload["best"]
        ]
        assert best_rows[0]["mean_score"] == payload["best_score"]
