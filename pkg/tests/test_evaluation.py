import json
import warnings

import numpy as np
import pytest

import asdkit.classifiers as classifiers_pkg
from asdkit.classifiers import ModelSpec, TrainedModel
from asdkit.evaluation import (
    ExperimentManifest,
    TABLE4_GRIDS,
    TABLE4_OPTIMIZED,
    cross_validate,
    grid_search,
    k_fold_indices,
    run_clustering_experiment,
    run_experiment,
)
from asdkit.numerics import Matrix, SeededRng
from asdkit.pipeline import build_pipeline
from asdkit.sources import load_dataset
from tests.conftest import make_design


class TestKFold:
    def test_five_pairs_from_ten(self):
        folds = k_fold_indices(10, 5, SeededRng(1), strata=np.array([0, 1] * 5))
        assert [len(f) for f in folds] == [2] * 5

    def test_exact_partition(self):
        strata = np.array([0] * 13 + [1] * 10)
        folds = k_fold_indices(23, 4, SeededRng(2), strata=strata)
        joined = np.concatenate(folds)
        assert sorted(joined.tolist()) == list(range(23))
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_adult_class_ratio_within_one(self):
        _, m = build_pipeline(load_dataset("adult"))
        folds = k_fold_indices(m.n_rows, 5, SeededRng(3), strata=m.y)
        total_pos = m.y.sum()
        for f in folds:
            expected = total_pos * len(f) / m.n_rows
            assert abs(m.y[f].sum() - expected) <= 1.0

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            k_fold_indices(5, 1, SeededRng(0))
        with pytest.raises(ValueError):
            k_fold_indices(3, 4, SeededRng(0))


class _ConstantModel(TrainedModel):
    kind = "knn"  # reuse an existing registry name for spec validation

    def __init__(self, spec, n_features, value):
        super().__init__(spec, n_features)
        self.value = value

    def _proba1(self, X):
        return np.full(X.shape[0], self.value)


class TestCrossValidate:
    def test_constant_model_accuracy_is_majority(self, monkeypatch):
        def train_const(m, **kwargs):
            return _ConstantModel(ModelSpec("knn", {"n_neighbors": 1}), m.x.cols, 0.01)

        monkeypatch.setitem(classifiers_pkg._TRAINERS, "knn", train_const)
        rng = SeededRng(4)
        X = rng.normal_array(80).reshape(40, 2)
        y = np.array([0] * 28 + [1] * 12)
        m = make_design(X, y)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scores = cross_validate(ModelSpec("knn", {"n_neighbors": 1}), m, 4, SeededRng(5))
        # constant class-0 prediction scores the fold's majority fraction
        assert scores.mean["accuracy"] == pytest.approx(0.7, abs=1e-12)

    def test_leave_one_out_matches_direct(self):
        rng = SeededRng(6)
        X = rng.normal_array(20).reshape(10, 2)
        y = (X[:, 0] > 0).astype(int)
        if y.sum() in (0, 10):
            y[0] = 1 - y[0]
        m = make_design(X, y)
        spec = ModelSpec("knn", {"n_neighbors": 1})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scores = cross_validate(spec, m, 10, SeededRng(7))
        # direct per-row oracle: nearest other row's label
        correct = 0
        for i in range(10):
            d = np.sum((X - X[i]) ** 2, axis=1)
            d[i] = np.inf
            correct += int(y[int(np.argmin(d))] == y[i])
        assert scores.mean["accuracy"] == pytest.approx(correct / 10, abs=1e-12)

    def test_children_svm_cv_mean(self):
        _, m = build_pipeline(load_dataset("children"), top_k=10, drop_leaky=True)
        from asdkit.dataset import train_test_split

        train, _ = train_test_split(m, 0.3, SeededRng(1).split(1))
        scores = cross_validate(
            ModelSpec("svm", TABLE4_OPTIMIZED["children"]["svm"]), train, 5, SeededRng(8)
        )
        assert scores.k == 5
        assert scores.mean["accuracy"] >= 0.95

    def test_fold_error_annotated(self):
        m = make_design([[0.0], [1.0], [2.0], [3.0]], [0, 1, 0, 1])
        spec = ModelSpec("knn", {"n_neighbors": 50})  # invalid on every fold
        with pytest.raises(RuntimeError, match="fold 0"):
            cross_validate(spec, m, 2, SeededRng(9))


class TestGridSearch:
    def test_single_point_grid(self, blob_data):
        result = grid_search(
            "decision_tree",
            blob_data,
            3,
            rng=SeededRng(10),
            grid={"criterion": ["gini"], "max_depth": [3]},
        )
        assert result.best == {"criterion": "gini", "max_depth": 3}
        assert len(result.table) == 1

    def test_argmax_definition(self, blob_data):
        result = grid_search(
            "logistic_regression",
            blob_data,
            3,
            rng=SeededRng(11),
            grid={"penalty": ["l2"], "c": [0.001, 0.1, 10.0]},
        )
        scores = [r["mean_score"] for r in result.table if r["error"] is None]
        assert result.best_score == max(scores)

    def test_invalid_points_recorded(self, blob_data):
        result = grid_search(
            "knn",
            blob_data,
            3,
            rng=SeededRng(12),
            grid={"n_neighbors": [1, 1000], "weights": ["uniform"]},
        )
        errors = [r for r in result.table if r["error"] is not None]
        assert len(errors) == 1
        assert "n_neighbors" in errors[0]["error"]

    def test_min_samples_split_clamped(self, blob_data):
        with pytest.warns(UserWarning, match="clamp"):
            result = grid_search(
                "decision_tree",
                blob_data,
                3,
                rng=SeededRng(13),
                grid={"criterion": ["gini"], "min_samples_split": [1]},
            )
        assert result.best["min_samples_split"] == 2


class TestRunExperiment:
    def test_children_lr_reaches_table5(self, tmp_path):
        manifest = ExperimentManifest(
            dataset="children",
            model="logistic_regression",
            params="table4",
            drop_leaky=True,
            seed=1,
        )
        result = run_experiment(manifest, out_dir=tmp_path / "run")
        assert result.report.accuracy == 1.0
        for name in (
            "manifest.json",
            "ranking.csv",
            "pipeline.json",
            "model.json",
            "report.json",
            "report.md",
            "report.csv",
            "ranking.png",
            "metrics.png",
        ):
            assert (tmp_path / "run" / name).is_file(), name

    def test_rerun_byte_identical(self, tmp_path):
        manifest = ExperimentManifest(
            dataset="children", model="naive_bayes", params="table4", seed=3,
            drop_leaky=True,
        )
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_experiment(manifest, out_dir=a)
        run_experiment(manifest, out_dir=b)
        for name in ("manifest.json", "report.json", "model.json", "pipeline.json",
                     "ranking.csv", "report.md", "report.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_manifest_hash_stable(self):
        m1 = ExperimentManifest(dataset="children", model="svm", seed=1)
        m2 = ExperimentManifest(dataset="children", model="svm", seed=1)
        assert m1.content_hash == m2.content_hash
        m3 = ExperimentManifest(dataset="children", model="svm", seed=2)
        assert m1.content_hash != m3.content_hash

    def test_stage_tagged_error(self):
        manifest = ExperimentManifest(dataset="does-not-exist.arff")
        with pytest.raises(RuntimeError, match=r"\[preprocess\]"):
            run_experiment(manifest)

    def test_cv_included_when_folds_set(self):
        manifest = ExperimentManifest(
            dataset="children", model="naive_bayes", params="table4",
            drop_leaky=True, seed=2, folds=3,
        )
        result = run_experiment(manifest)
        assert result.fold_scores is not None
        assert result.fold_scores.k == 3


class TestRunClusteringExperiment:
    def test_children_kmeans_band(self, tmp_path):
        manifest = ExperimentManifest(dataset="children", seed=1, drop_leaky=True)
        reports = run_clustering_experiment(
            manifest, out_dir=tmp_path / "c", algorithms=("kmeans",)
        )
        assert 0.4 <= reports["kmeans"].nmi <= 0.8
        assert (tmp_path / "c" / "report.json").is_file()
        assert (tmp_path / "c" / "report.csv").is_file()
        assert (tmp_path / "c" / "assignments_kmeans.csv").is_file()
        assert (tmp_path / "c" / "metrics.png").is_file()

    def test_degenerate_four_rows(self):
        import asdkit.evaluation as ev

        def tiny_prepare(manifest):
            rng = SeededRng(50)
            X = rng.normal_array(8).reshape(4, 2)
            m = make_design(X, [0, 1, 0, 1])
            return None, None, m

        orig = ev._prepare
        ev._prepare = tiny_prepare
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                manifest = ExperimentManifest(dataset="children", seed=1)
                reports = run_clustering_experiment(manifest)
        finally:
            ev._prepare = orig
        assert set(reports) == {"kmeans", "agglomerative", "gmm", "spectral", "birch"}
        for rep in reports.values():
            assert np.isfinite(rep.nmi) and np.isfinite(rep.ari) and np.isfinite(rep.silhouette)
