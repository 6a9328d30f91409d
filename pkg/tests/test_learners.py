import numpy as np
import pytest

from litiscope.errors import TrainingError
from litiscope.learners import (
    EnsembleModel,
    ensemble_prob,
    ensemble_probs,
    rbf_kernel,
    train_ensemble,
    train_forest,
    train_svm,
)


def blobs(n_per, d=3, gap=6.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.normal(0.0, 1.0, size=(n_per, d)),
        rng.normal(gap, 1.0, size=(n_per, d)),
    ])
    y = np.array([False] * n_per + [True] * n_per)
    return X, y


TOY_X = np.array([[0.0, 0.0], [0.0, 1.0], [4.0, 4.0], [4.0, 5.0]])
TOY_Y = np.array([False, False, True, True])


class TestSvm:
    def test_toy_set_separates(self):
        model = train_svm(TOY_X, TOY_Y, gamma=0.5, C=10.0, seed=0)
        proba = model.predict_proba(TOY_X)
        assert np.array_equal(proba >= 0.5, TOY_Y)
        assert np.all((proba > 0) & (proba < 1))

    def test_dual_coefficients_bounded(self):
        X, y = blobs(30, seed=1)
        C = 1.5
        model = train_svm(X, y, gamma=0.2, C=C, seed=0)
        assert np.all(np.abs(model.dual_coef) <= C + 1e-9)

    def test_probability_monotone_in_decision(self):
        X, y = blobs(25, seed=2)
        model = train_svm(X, y, gamma=0.3, C=1.0, seed=0)
        rng = np.random.default_rng(3)
        probe = rng.normal(2.0, 3.0, size=(50, X.shape[1]))
        f = model.decision_values(probe)
        p = model.predict_proba(probe)
        order = np.argsort(f)
        assert np.all(np.diff(p[order]) >= -1e-12)

    def test_matches_libsvm_decision_function(self):
        from sklearn.svm import SVC

        for seed, gamma, C in [(0, 0.3, 1.0), (1, 0.05, 5.0), (2, 1.0, 0.5)]:
            X, y = blobs(40, d=4, gap=3.0, seed=seed)
            mine = train_svm(X, y, gamma=gamma, C=C, seed=0)
            ref = SVC(kernel="rbf", gamma=gamma, C=C, tol=1e-5).fit(X, y)
            rng = np.random.default_rng(seed + 10)
            probe = rng.normal(1.5, 2.0, size=(60, 4))
            diff = np.abs(mine.decision_values(probe) - ref.decision_function(probe))
            assert diff.max() < 5e-3, f"seed {seed}: max diff {diff.max():.2e}"

    def test_duplicated_rows_keep_decision_function(self):
        # Double every row. With no dual coefficient at the box bound the
        # duplicated problem has the same unique solution.
        X, y = blobs(20, d=2, gap=8.0, seed=4)
        base = train_svm(X, y, gamma=0.4, C=50.0, seed=0)
        assert np.abs(base.dual_coef).max() < 50.0 - 1e-6
        dup = train_svm(np.vstack([X, X]), np.concatenate([y, y]), gamma=0.4, C=50.0, seed=0)
        rng = np.random.default_rng(5)
        probe = rng.normal(4.0, 3.0, size=(40, 2))
        assert np.allclose(base.decision_values(probe), dup.decision_values(probe), atol=1e-6)

    def test_single_class_rejected(self):
        X = np.zeros((5, 2))
        with pytest.raises(TrainingError, match="single class"):
            train_svm(X, np.ones(5, dtype=bool))

    def test_deterministic(self):
        X, y = blobs(30, seed=6)
        a = train_svm(X, y, gamma=0.3, C=1.0, seed=7)
        b = train_svm(X, y, gamma=0.3, C=1.0, seed=7)
        probe = np.random.default_rng(8).normal(size=(20, X.shape[1]))
        assert np.array_equal(a.predict_proba(probe), b.predict_proba(probe))

    def test_row_cache_path_matches_full_gram(self):
        X, y = blobs(25, seed=9)
        full = train_svm(X, y, gamma=0.3, C=1.0, seed=0, cache_mb=64)
        tiny = train_svm(X, y, gamma=0.3, C=1.0, seed=0, cache_mb=0)
        probe = np.random.default_rng(10).normal(size=(30, X.shape[1]))
        assert np.allclose(full.decision_values(probe), tiny.decision_values(probe), atol=1e-9)

    def test_default_hyperparameters_run(self):
        X, y = blobs(40, seed=11)
        model = train_svm(X, y)
        p = model.predict_proba(X)
        assert np.all((p > 0) & (p < 1))


class TestForest:
    def test_blob_holdout_accuracy(self):
        X, y = blobs(120, d=4, gap=4.0, seed=12)
        Xte, yte = blobs(60, d=4, gap=4.0, seed=13)
        model = train_forest(X, y, n_trees=100, seed=0)
        acc = np.mean((model.predict_proba(Xte) >= 0.5) == yte)
        assert acc >= 0.95

    def test_single_tree_deterministic(self):
        X, y = blobs(30, seed=14)
        a = train_forest(X, y, n_trees=1, seed=3)
        b = train_forest(X, y, n_trees=1, seed=3)
        probe = np.random.default_rng(15).normal(2.0, 2.0, size=(50, X.shape[1]))
        assert np.array_equal(a.predict_proba(probe), b.predict_proba(probe))
        for ta, tb in zip(a.trees, b.trees):
            for arr_a, arr_b in zip(ta, tb):
                assert np.array_equal(arr_a, arr_b)

    def test_seed_changes_model(self):
        X, y = blobs(30, seed=16)
        a = train_forest(X, y, n_trees=5, seed=0)
        b = train_forest(X, y, n_trees=5, seed=99)
        probe = np.random.default_rng(17).normal(1.0, 3.0, size=(100, X.shape[1]))
        assert not np.array_equal(a.predict_proba(probe), b.predict_proba(probe))

    def test_probability_is_vote_fraction(self):
        X, y = blobs(25, seed=18)
        model = train_forest(X, y, n_trees=7, seed=1)
        p = model.predict_proba(X)
        votes = p * 7
        assert np.allclose(votes, np.round(votes))

    def test_single_class_rejected(self):
        with pytest.raises(TrainingError, match="single class"):
            train_forest(np.zeros((6, 2)), np.zeros(6, dtype=bool))

    def test_training_fit_on_pure_numeric(self):
        # Mixed duplicate rows with conflicting labels must not hang.
        X = np.array([[1.0, 1.0]] * 10 + [[2.0, 2.0]] * 10)
        y = np.array([True, False] * 10)
        model = train_forest(X, y, n_trees=10, seed=0)
        p = model.predict_proba(X)
        assert np.all((p >= 0.0) & (p <= 1.0))

    def test_width_mismatch_rejected(self):
        X, y = blobs(10, d=3, seed=19)
        model = train_forest(X, y, n_trees=2, seed=0)
        with pytest.raises(ValueError, match="features"):
            model.predict_proba(np.zeros((2, 5)))


class TestEnsemble:
    def _model(self, **kwargs):
        X, y = blobs(40, seed=20)
        return train_ensemble(X, y, gamma=0.3, C=1.0, n_trees=20, seed=0, **kwargs), (X, y)

    def test_probability_is_weighted_sum(self):
        model, (X, _) = self._model()
        p, _ = ensemble_probs(model, X)
        expect = 0.3 * model.svm.predict_proba(X) + 0.7 * model.forest.predict_proba(X)
        assert np.allclose(p, expect)
        assert np.all((p >= 0.0) & (p <= 1.0))

    def test_worked_arithmetic(self):
        # w=(0.3, 0.7), p=(0.5, 0.2) → 0.29, below the 0.3 cutoff.
        p = 0.3 * 0.5 + 0.7 * 0.2
        assert p == pytest.approx(0.29)
        assert not p >= 0.3

    def test_cutoff_monotonicity(self):
        model, (X, _) = self._model()
        p_lo, lab_lo = ensemble_probs(
            EnsembleModel(model.svm, model.forest, 0.3, 0.7, cutoff=0.2), X
        )
        p_hi, lab_hi = ensemble_probs(
            EnsembleModel(model.svm, model.forest, 0.3, 0.7, cutoff=0.6), X
        )
        assert np.array_equal(p_lo, p_hi)
        assert not np.any(lab_hi & ~lab_lo)

    def test_degenerate_weights_recover_svm(self):
        model, (X, _) = self._model()
        pure = EnsembleModel(model.svm, model.forest, w_svm=1.0, w_forest=0.0, cutoff=0.3)
        p, _ = ensemble_probs(pure, X)
        assert np.allclose(p, model.svm.predict_proba(X))

    def test_single_vector_entry_point(self):
        model, (X, _) = self._model()
        p, label = ensemble_prob(model, X[0])
        p_batch, labels = ensemble_probs(model, X[:1])
        assert p == pytest.approx(float(p_batch[0]))
        assert label == bool(labels[0])

    def test_invalid_weights_and_cutoff(self):
        model, _ = self._model()
        with pytest.raises(ValueError, match="sum to 1"):
            EnsembleModel(model.svm, model.forest, 0.5, 0.7, 0.3)
        with pytest.raises(ValueError, match="cutoff"):
            EnsembleModel(model.svm, model.forest, 0.3, 0.7, 1.5)


class TestKernel:
    def test_rbf_values(self):
        A = np.array([[0.0, 0.0], [1.0, 0.0]])
        K = rbf_kernel(A, A, gamma=0.5)
        assert K[0, 0] == pytest.approx(1.0)
        assert K[0, 1] == pytest.approx(np.exp(-0.5))
        assert np.allclose(K, K.T)
