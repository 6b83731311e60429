import warnings

import numpy as np
import pytest

from asdkit.classifiers import (
    ModelSpec,
    model_from_json_dict,
    train_ann,
    train_decision_tree,
    train_gradient_boost,
    train_knn,
    train_logistic_regression,
    train_model,
    train_naive_bayes,
    train_random_forest,
    train_svm,
)
from asdkit.classifiers.ann import forward, init_params, loss_and_grads
from asdkit.classifiers.logistic import lr_loss_and_grad
from asdkit.numerics import Matrix, SeededRng
from tests.conftest import make_design


def rel_err(a, b):
    denom = max(np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


class TestNaiveBayes:
    def test_separated_clouds(self, blob_data):
        model = train_naive_bayes(blob_data, var_smoothing=1e-9)
        assert (model.predict(blob_data.x) == blob_data.y).all()

    def test_symmetric_posterior_half(self):
        m = make_design([[-1.0], [1.0], [-2.0], [2.0]], [0, 1, 0, 1])
        model = train_naive_bayes(m)
        p = model.predict_proba(Matrix([[0.0]]))
        assert p[0, 0] == pytest.approx(0.5, abs=1e-9)
        assert p[0, 1] == pytest.approx(0.5, abs=1e-9)

    def test_single_class_rejected(self):
        m = make_design([[1.0], [2.0]], [1, 1])
        with pytest.raises(ValueError, match="single class"):
            train_naive_bayes(m)

    def test_serialization_round_trip(self, blob_data):
        model = train_naive_bayes(blob_data, var_smoothing=0.1)
        clone = model_from_json_dict(model.to_json_dict())
        assert np.array_equal(
            clone.predict_proba(blob_data.x), model.predict_proba(blob_data.x)
        )


class TestKnn:
    def test_k1_self_label(self, blob_data):
        model = train_knn(blob_data, n_neighbors=1)
        assert (model.predict(blob_data.x) == blob_data.y).all()

    def test_vote_share(self):
        m = make_design([[0.0], [0.1], [5.0]], [1, 1, 0])
        model = train_knn(m, n_neighbors=3)
        p = model.predict_proba(Matrix([[0.05]]))
        assert p[0, 1] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_k_exceeds_n(self):
        m = make_design([[0.0], [1.0]], [0, 1])
        with pytest.raises(ValueError, match="n_neighbors"):
            train_knn(m, n_neighbors=3)

    def test_distance_weights_exact_match(self):
        m = make_design([[0.0], [1.0], [2.0]], [1, 0, 0])
        model = train_knn(m, n_neighbors=3, weights="distance")
        p = model.predict_proba(Matrix([[0.0]]))
        assert p[0, 1] == pytest.approx(1.0, abs=1e-9)  # zero-distance dominates

    def test_leaf_size_is_inert(self, blob_data):
        a = train_knn(blob_data, n_neighbors=3, leaf_size=1)
        b = train_knn(blob_data, n_neighbors=3, leaf_size=445)
        assert np.array_equal(a.predict_proba(blob_data.x), b.predict_proba(blob_data.x))


class TestSvm:
    def test_separable_margin_matches_analytic(self):
        # points at x = -1, -2 (class 0) and +1, +2 (class 1): the maximal
        # margin separator is x = 0 with geometric margin 1
        m = make_design([[-2.0], [-1.0], [1.0], [2.0]], [0, 0, 1, 1])
        model = train_svm(m, c=100.0, kernel="linear")
        dec = model.decision_function(np.array([[-1.0], [1.0], [0.0]]))
        assert (model.predict(m.x) == m.y).all()
        assert dec[2] == pytest.approx(0.0, abs=1e-2)
        # unit functional margin at the closest points
        assert dec[0] == pytest.approx(-1.0, abs=1e-2)
        assert dec[1] == pytest.approx(+1.0, abs=1e-2)

    def test_duplication_leaves_boundary(self, blob_data):
        model_a = train_svm(blob_data, c=1.0, kernel="linear")
        X2 = np.vstack([blob_data.x.a, blob_data.x.a])
        y2 = np.concatenate([blob_data.y, blob_data.y])
        doubled = make_design(X2, y2)
        model_b = train_svm(doubled, c=1.0, kernel="linear")
        grid = Matrix(np.linspace(-2, 6, 40).reshape(-1, 1) @ np.ones((1, 2)))
        assert np.array_equal(model_a.predict(grid), model_b.predict(grid))

    @pytest.mark.parametrize("kernel,floor", [("poly", 0.9), ("rbf", 0.9), ("sigmoid", 0.5)])
    def test_other_kernels_train(self, blob_data, kernel, floor):
        # sigmoid with coef0=0 is a weak kernel; it only has to train sanely
        model = train_svm(blob_data, c=13.0, kernel=kernel, degree=3)
        acc = (model.predict(blob_data.x) == blob_data.y).mean()
        assert acc >= floor

    def test_probability_calibration_monotone(self, blob_data):
        model = train_svm(blob_data, c=1.0, kernel="linear")
        dec = model.decision_function(blob_data.x.a)
        proba = model.predict_proba(blob_data.x)[:, 1]
        order = np.argsort(dec)
        assert np.all(np.diff(proba[order]) >= -1e-12)


class TestDecisionTree:
    def test_pure_input_single_leaf(self):
        m = make_design([[0.0], [1.0], [2.0]], [1, 1, 1])
        model = train_decision_tree(m)
        assert model.root.is_leaf

    def test_threshold_split_exact(self):
        # exhaustive split-point oracle: the only zero-impurity cut sits at
        # the midpoint of 2 and 3
        m = make_design([[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]], [0, 0, 0, 1, 1, 1])
        model = train_decision_tree(m)
        assert not model.root.is_leaf
        assert model.root.threshold == pytest.approx(2.5)
        assert model.root.left.is_leaf and model.root.right.is_leaf

    def test_constraints_positive(self):
        m = make_design([[0.0], [1.0]], [0, 1])
        with pytest.raises(ValueError):
            train_decision_tree(m, max_depth=0)

    def test_min_samples_leaf_respected(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        y = np.array([0] * 9 + [1])
        model = train_decision_tree(make_design(X, y), min_samples_leaf=4)

        def check(node):
            if node.is_leaf:
                assert node.n0 + node.n1 >= 4
            else:
                check(node.left)
                check(node.right)

        check(model.root)

    def test_entropy_criterion(self, blob_data):
        model = train_decision_tree(blob_data, criterion="entropy", max_depth=4)
        assert (model.predict(blob_data.x) == blob_data.y).mean() > 0.95


class TestRandomForest:
    def test_degenerate_forest_equals_tree(self, blob_data):
        tree = train_decision_tree(blob_data, criterion="gini", max_depth=6)
        forest = train_random_forest(
            blob_data,
            n_estimators=1,
            criterion="gini",
            max_depth=6,
            max_features="all",
            bootstrap=False,
            rng=SeededRng(1),
        )
        assert np.array_equal(
            forest.predict_proba(blob_data.x), tree.predict_proba(blob_data.x)
        )

    def test_forest_beats_pruned_tree_on_noise(self):
        rng = SeededRng(31)
        X = rng.normal_array(600).reshape(300, 2)
        y = ((X[:, 0] + X[:, 1] + 0.8 * rng.normal_array(300)) > 0).astype(int)
        m = make_design(X, y)
        tree = train_decision_tree(m, max_depth=1)
        forest = train_random_forest(m, n_estimators=60, max_depth=6, rng=SeededRng(2))
        acc_tree = (tree.predict(m.x) == y).mean()
        acc_forest = (forest.predict(m.x) == y).mean()
        assert acc_forest >= acc_tree

    def test_deterministic_given_seed(self, blob_data):
        a = train_random_forest(blob_data, n_estimators=10, rng=SeededRng(7))
        b = train_random_forest(blob_data, n_estimators=10, rng=SeededRng(7))
        assert np.array_equal(a.predict_proba(blob_data.x), b.predict_proba(blob_data.x))


class TestGradientBoost:
    def test_zero_rounds_is_base_score(self, blob_data):
        model = train_gradient_boost(blob_data, n_estimators=1, learning_rate=0.1)
        base_only = 1.0 / (1.0 + np.exp(-model.base_score))
        # first tree shifts away from the prior, but the stored base score
        # reproduces the round-0 probability
        assert model.base_score == pytest.approx(
            np.log(blob_data.y.mean() / (1 - blob_data.y.mean()))
        )
        assert 0.0 < base_only < 1.0

    def test_train_logloss_non_increasing(self, blob_data):
        model = train_gradient_boost(blob_data, n_estimators=40, max_depth=3)
        hist = np.array(model.train_log.objectives)
        assert np.all(np.diff(hist) <= 1e-12)

    def test_learning_rate_validation(self, blob_data):
        with pytest.raises(ValueError):
            train_gradient_boost(blob_data, learning_rate=0.0)

    def test_serialization_round_trip(self, blob_data):
        model = train_gradient_boost(blob_data, n_estimators=5, max_depth=2)
        clone = model_from_json_dict(model.to_json_dict())
        assert np.array_equal(
            clone.predict_proba(blob_data.x), model.predict_proba(blob_data.x)
        )


class TestLogisticRegression:
    def test_symmetric_data_half_probability(self):
        # class independent of x and balanced: the optimum is beta = 0
        m = make_design([[-1.0], [-1.0], [1.0], [1.0]], [0, 1, 0, 1])
        model = train_logistic_regression(m, penalty="l2", c=1.0)
        assert np.abs(model.beta).max() < 1e-4
        p = model.predict_proba(Matrix([[0.5]]))
        assert p[0, 1] == pytest.approx(0.5, abs=1e-4)

    def test_gradient_matches_finite_differences(self):
        rng = SeededRng(33)
        X = rng.normal_array(60).reshape(20, 3)
        y = (rng.uniform_array(20) > 0.5).astype(int)
        Xb = np.column_stack([X, np.ones(20)])
        beta = rng.normal_array(4) * 0.5
        _, grad = lr_loss_and_grad(beta, Xb, y, c=2.0, penalty="l2")
        eps = 1e-6
        fd = np.zeros_like(beta)
        for j in range(len(beta)):
            up = beta.copy()
            up[j] += eps
            dn = beta.copy()
            dn[j] -= eps
            fd[j] = (
                lr_loss_and_grad(up, Xb, y, 2.0, "l2")[0]
                - lr_loss_and_grad(dn, Xb, y, 2.0, "l2")[0]
            ) / (2 * eps)
        assert rel_err(grad, fd) < 1e-4

    def test_l1_produces_sparsity(self):
        rng = SeededRng(34)
        X = rng.normal_array(300).reshape(100, 3)
        y = (X[:, 0] > 0).astype(int)  # only feature 0 matters
        m = make_design(X, y)
        model = train_logistic_regression(m, penalty="l1", c=0.05)
        w = model.beta[:-1]
        assert abs(w[0]) > 1e-3
        assert abs(w[1]) < abs(w[0]) / 5 and abs(w[2]) < abs(w[0]) / 5

    def test_separable_fits_training(self, blob_data):
        model = train_logistic_regression(blob_data, penalty="l2", c=1000.0)
        assert (model.predict(blob_data.x) == blob_data.y).all()


class TestAnn:
    def test_gradients_match_finite_differences_each_layer(self):
        rng = SeededRng(35)
        n_in = 4
        X = rng.normal_array(3 * n_in).reshape(3, n_in)
        y = np.array([1, 0, 1])
        params = init_params(n_in, rng)  # full 1024/512/512 architecture
        loss, grads, _ = loss_and_grads(params, X, y, training=True)
        eps = 1e-5
        probe = SeededRng(36)
        for name, g in grads.items():
            flat = params[name].reshape(-1)
            gflat = g.reshape(-1)
            idx = [probe.randint(flat.size) for _ in range(min(6, flat.size))]
            for j in idx:
                orig = flat[j]
                flat[j] = orig + eps
                up, _, _ = loss_and_grads(params, X, y, training=True)
                flat[j] = orig - eps
                dn, _, _ = loss_and_grads(params, X, y, training=True)
                flat[j] = orig
                fd = (up - dn) / (2 * eps)
                if max(abs(fd), abs(gflat[j])) < 1e-6:
                    # batch norm makes the loss exactly flat along uniform
                    # bias shifts; both sides agree the gradient is zero
                    continue
                denom = max(abs(fd), abs(gflat[j]))
                assert abs(gflat[j] - fd) / denom < 1e-4, f"{name}[{j}]"

    def test_blob_pair_reaches_full_accuracy(self, blob_data):
        model = train_ann(
            blob_data, rng=SeededRng(5), widths=(16, 8, 8), max_epochs=50
        )
        assert (model.predict(blob_data.x) == blob_data.y).mean() == 1.0

    def test_divergence_aborts(self, blob_data):
        with pytest.raises(RuntimeError, match="diverged|non-finite"):
            train_ann(
                blob_data,
                optimizer="sgd",
                learning_rate=1e18,
                rng=SeededRng(6),
                widths=(8, 4, 4),
                max_epochs=5,
            )

    def test_deterministic_given_seed(self, blob_data):
        a = train_ann(blob_data, rng=SeededRng(9), widths=(8, 4, 4), max_epochs=10)
        b = train_ann(blob_data, rng=SeededRng(9), widths=(8, 4, 4), max_epochs=10)
        assert np.array_equal(a.predict_proba(blob_data.x), b.predict_proba(blob_data.x))

    def test_running_stats_used_at_inference(self, blob_data):
        model = train_ann(blob_data, rng=SeededRng(10), widths=(8, 4, 4), max_epochs=10)
        one = model.predict_proba(Matrix(blob_data.x.a[:1]))
        batch = model.predict_proba(blob_data.x)
        # single-row inference must not depend on batch composition
        assert one[0, 1] == pytest.approx(batch[0, 1], abs=1e-12)


ALL_KINDS = [
    ("naive_bayes", {}),
    ("knn", {"n_neighbors": 3}),
    ("svm", {"c": 1.0, "kernel": "linear"}),
    ("decision_tree", {"max_depth": 5}),
    ("random_forest", {"n_estimators": 10}),
    ("gradient_boost", {"n_estimators": 10, "max_depth": 2}),
    ("logistic_regression", {"c": 10.0}),
    ("ann", {}),
]


class TestSharedContract:
    @pytest.mark.parametrize("kind,params", ALL_KINDS)
    def test_proba_rows_sum_to_one(self, blob_data, kind, params):
        if kind == "ann":
            model = train_ann(blob_data, rng=SeededRng(1), widths=(8, 4, 4), max_epochs=5)
        else:
            model = train_model(ModelSpec(kind, params), blob_data, rng=SeededRng(1))
        proba = model.predict_proba(blob_data.x)
        assert np.all(np.abs(proba.sum(axis=1) - 1.0) <= 1e-9)
        assert proba.min() >= 1e-15 and proba.max() <= 1 - 1e-15

    @pytest.mark.parametrize("kind,params", ALL_KINDS)
    def test_predict_is_thresholded_proba(self, blob_data, kind, params):
        if kind == "ann":
            model = train_ann(blob_data, rng=SeededRng(2), widths=(8, 4, 4), max_epochs=5)
        else:
            model = train_model(ModelSpec(kind, params), blob_data, rng=SeededRng(2))
        rng = SeededRng(40)
        Q = Matrix(rng.normal_array(2000).reshape(1000, 2) * 2.0 + 2.0)
        pred = model.predict(Q)
        proba = model.predict_proba(Q)
        assert np.array_equal(pred, (proba[:, 1] >= 0.5).astype(np.int64))

    @pytest.mark.parametrize("kind,params", ALL_KINDS)
    def test_feature_count_mismatch(self, blob_data, kind, params):
        if kind == "ann":
            model = train_ann(blob_data, rng=SeededRng(3), widths=(8, 4, 4), max_epochs=3)
        else:
            model = train_model(ModelSpec(kind, params), blob_data, rng=SeededRng(3))
        with pytest.raises(ValueError, match="feature count"):
            model.predict(Matrix([[1.0, 2.0, 3.0]]))

    @pytest.mark.parametrize("kind", ["naive_bayes", "knn", "svm", "decision_tree",
                                       "logistic_regression"])
    def test_row_permutation_invariance(self, kind):
        rng = SeededRng(41)
        X = rng.normal_array(160).reshape(80, 2)
        y = (X[:, 0] + X[:, 1] > 0).astype(int)
        X[y == 1] += 1.5
        m = make_design(X, y)
        params = dict(ALL_KINDS)[kind] if kind != "naive_bayes" else {}
        base = train_model(ModelSpec(kind, params), m, rng=SeededRng(0))
        perm = rng.shuffle(80)
        m2 = make_design(X[perm], y[perm])
        permuted = train_model(ModelSpec(kind, params), m2, rng=SeededRng(0))
        Q = Matrix(rng.normal_array(60).reshape(30, 2))
        pred_a = base.predict(Q)
        pred_b = permuted.predict(Q)
        if kind == "svm":
            # the SMO stops at KKT tolerance 1e-3, so the two runs may place
            # the boundary within that band; compare decisive queries only
            dec = base.decision_function(Q.a)
            decisive = np.abs(dec) > 0.05
            assert np.array_equal(pred_a[decisive], pred_b[decisive])
        else:
            assert np.array_equal(pred_a, pred_b)

    def test_serialization_all_kinds(self, blob_data):
        for kind, params in ALL_KINDS:
            if kind == "ann":
                model = train_ann(blob_data, rng=SeededRng(4), widths=(8, 4, 4), max_epochs=3)
            else:
                model = train_model(ModelSpec(kind, params), blob_data, rng=SeededRng(4))
            clone = model_from_json_dict(model.to_json_dict())
            assert np.array_equal(
                clone.predict_proba(blob_data.x), model.predict_proba(blob_data.x)
            ), kind
