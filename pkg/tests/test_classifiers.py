import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szclass.classifiers import (GbtConfig, SgdConfig, default_params, fit_model, gbt_fit,
                                 gbt_predict, gbt_predict_proba, knn_fit, knn_predict,
                                 model_from_json, model_to_json, predict_labels, sgd_fit,
                                 sgd_objective, sgd_predict, sgd_predict_proba)
from szclass.errors import DimensionError, DivergenceError


def _blobs(n=200, d=2, classes=(0, 1), sep=6.0, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([classes[i % len(classes)] for i in range(n)])
    centers = {c: sep * rng.standard_normal(d) for c in classes}
    X = np.array([centers[c] for c in y]) + 0.5 * rng.standard_normal((n, d))
    return X, y


def _xor(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    return X, y


class TestKnn:
    def test_exact_match(self):
        X = np.array([[0.0, 0], [1, 1], [5, 5]])
        model = knn_fit(X, [2, 4, 6], k=1)
        np.testing.assert_array_equal(knn_predict(model, X), [2, 4, 6])

    def test_two_vs_one(self):
        model = knn_fit([[0.0, 0], [1, 0], [10, 0]], [0, 0, 1], k=3)
        assert knn_predict(model, [[0.4, 0]])[0] == 0

    def test_equidistant_tie(self):
        model = knn_fit([[0.0], [2.0]], [3, 1], k=2)
        first = knn_predict(model, [[1.0]])
        for _ in range(5):
            np.testing.assert_array_equal(knn_predict(model, [[1.0]]), first)
        # equal distances leave the lowest class id
        assert first[0] == 1

    def test_tie_goes_to_nearest(self):
        model = knn_fit([[0.0], [3.0]], [5, 2], k=2)
        assert knn_predict(model, [[1.0]])[0] == 5

    def test_inverse_distance_vote(self):
        model = knn_fit([[0.0], [5.0], [5.1]], [0, 1, 1], k=3, vote="inverse-distance")
        assert knn_predict(model, [[0.5]])[0] == 0
        assert knn_predict(knn_fit([[0.0], [5.0], [5.1]], [0, 1, 1], k=3), [[0.5]])[0] == 1

    @given(st.integers(1, 40), st.integers(0, 2**16))
    @settings(max_examples=30, deadline=None)
    def test_k_equals_n_majority(self, n, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, 3))
        y = rng.integers(0, 7, n)
        counts = np.bincount(y, minlength=7)
        if np.sum(counts == counts.max()) > 1:
            return
        pred = knn_predict(knn_fit(X, y, k=n), rng.standard_normal((10, 3)))
        assert np.all(pred == np.argmax(counts))

    def test_chunking_invariant(self):
        X, y = _blobs(300, 4, classes=(0, 1, 2))
        model = knn_fit(X, y, k=7)
        np.testing.assert_array_equal(knn_predict(model, X, chunk=13), knn_predict(model, X))

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            knn_fit([[0.0]], [0], k=2)


class TestSgd:
    def test_separable(self):
        X, y = _blobs(200, 2)
        model = sgd_fit(X, y, SgdConfig(alpha=1e-6, lr=0.1, schedule="constant", epochs=50))
        assert np.mean(sgd_predict(model, X) == y) == 1.0

    def test_strong_regularization(self):
        X, y = _blobs(200, 2)
        model = sgd_fit(X, y, SgdConfig(alpha=1e6, lr=0.1, epochs=5))
        assert np.linalg.norm(model.W, 2) < 1e-2

    def test_deterministic(self):
        X, y = _blobs(100, 3, classes=(0, 1, 2))
        a = sgd_fit(X, y, seed=4)
        b = sgd_fit(X, y, seed=4)
        assert a.W.tobytes() == b.W.tobytes() and a.b.tobytes() == b.b.tobytes()
        c = sgd_fit(X, y, seed=5)
        assert a.W.tobytes() != c.W.tobytes()

    def test_gradient_check(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((5, 4))
        y = rng.integers(0, 7, 5)
        h = 1e-6
        for _ in range(20):
            W = rng.standard_normal((7, 4))
            b = rng.standard_normal(7)
            alpha = float(rng.uniform(0, 1))
            _, dW, db = sgd_objective(W, b, X, y, alpha)
            num_W = np.zeros_like(W)
            for idx in np.ndindex(W.shape):
                Wp, Wm = W.copy(), W.copy()
                Wp[idx] += h
                Wm[idx] -= h
                num_W[idx] = (sgd_objective(Wp, b, X, y, alpha)[0]
                              - sgd_objective(Wm, b, X, y, alpha)[0]) / (2 * h)
            num_b = np.zeros_like(b)
            for j in range(7):
                bp, bm = b.copy(), b.copy()
                bp[j] += h
                bm[j] -= h
                num_b[j] = (sgd_objective(W, bp, X, y, alpha)[0]
                            - sgd_objective(W, bm, X, y, alpha)[0]) / (2 * h)
            ana = np.concatenate([dW.ravel(), db])
            num = np.concatenate([num_W.ravel(), num_b])
            assert np.linalg.norm(ana - num) / np.linalg.norm(ana + num) <= 1e-5

    def test_divergence_names_epoch(self):
        X = np.array([[1e200, -1e200], [-1e200, 1e200]])
        with pytest.raises(DivergenceError) as info:
            sgd_fit(X, [0, 1], SgdConfig(alpha=0.0, lr=1.0, schedule="constant", epochs=3))
        assert info.value.epoch == 0

    def test_proba_sums_to_one(self):
        X, y = _blobs(60, 3, classes=(0, 1, 2))
        p = sgd_predict_proba(sgd_fit(X, y), X)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


class TestGbt:
    def test_prior_only(self):
        X = np.random.default_rng(0).standard_normal((10, 2))
        y = np.array([3] * 6 + [1] * 4)
        model = gbt_fit(X, y, GbtConfig(rounds=1, depth=0))
        assert np.all(gbt_predict(model, np.random.default_rng(1).standard_normal((20, 2))) == 3)

    def test_xor(self):
        X, y = _xor()
        model = gbt_fit(X, y, GbtConfig(rounds=50, depth=2, learning_rate=0.3))
        assert np.mean(gbt_predict(model, X) == y) >= 0.95
        linear = sgd_fit(X, y, SgdConfig(epochs=50, lr=0.1))
        assert np.mean(sgd_predict(linear, X) == y) < 0.8

    def test_loss_non_increasing(self):
        X, y = _blobs(150, 3, classes=(0, 2, 5), sep=1.0)
        model = gbt_fit(X, y, GbtConfig(rounds=30, depth=3, learning_rate=0.1))
        assert np.all(np.diff(model.loss_history) <= 1e-12)

    def test_eta_zero_is_prior(self):
        X, y = _blobs(50, 2, classes=(0, 1, 4))
        model = gbt_fit(X, y, GbtConfig(rounds=5, depth=2, learning_rate=0.0))
        F = model.decision_function(X)
        np.testing.assert_array_equal(F, np.tile(model.prior, (50, 1)))

    def test_single_class(self, caplog):
        model = gbt_fit(np.zeros((5, 2)), [4] * 5)
        assert np.all(gbt_predict(model, np.ones((3, 2))) == 4)
        assert "single class" in caplog.text

    def test_tree_structure_valid(self):
        X, y = _blobs(80, 5, classes=(0, 1, 2, 3))
        model = gbt_fit(X, y, GbtConfig(rounds=5, depth=4, min_leaf=3))
        for rnd in model.trees:
            for tree in rnd:
                inner = tree.feature >= 0
                assert np.all(tree.feature[inner] < 5)
                assert np.all(np.isfinite(tree.value))
                assert np.all(tree.left[inner] > 0) and np.all(tree.right[inner] > 0)

    def test_proba_and_determinism(self):
        X, y = _blobs(80, 3, classes=(0, 1, 2))
        a = gbt_fit(X, y, GbtConfig(rounds=5))
        b = gbt_fit(X, y, GbtConfig(rounds=5))
        np.testing.assert_array_equal(a.decision_function(X), b.decision_function(X))
        np.testing.assert_allclose(gbt_predict_proba(a, X).sum(axis=1), 1.0, atol=1e-9)


class TestFacade:
    @pytest.mark.parametrize("kind", ["knn", "sgd", "gbt"])
    def test_dispatch_matches_direct(self, kind):
        X, y = _blobs(60, 3, classes=(0, 1, 2))
        model = fit_model(kind, {}, X, y, seed=1)
        direct = {"knn": knn_predict, "sgd": sgd_predict, "gbt": gbt_predict}[kind]
        np.testing.assert_array_equal(predict_labels(model, X), direct(model, X))
        assert predict_labels(model, np.zeros((0, 3))).shape == (0,)
        with pytest.raises(DimensionError):
            predict_labels(model, np.zeros((2, 4)))

    @pytest.mark.parametrize("kind", ["knn", "sgd", "gbt"])
    def test_json_round_trip(self, kind):
        X, y = _blobs(40, 2, classes=(0, 3))
        params = {"rounds": 3} if kind == "gbt" else {}
        model = fit_model(kind, params, X, y)
        back = model_from_json(model_to_json(model))
        np.testing.assert_array_equal(predict_labels(back, X), predict_labels(model, X))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            default_params("cnn")
