"""Base classifiers and their weighted ensemble.

The SVM is solved in the dual by sequential minimal optimization with
maximal-violating-pair selection, stopped at the usual KKT-violation
tolerance. Probabilities come from Platt scaling fitted on out-of-fold
decision values of an internal stratified split, so the sigmoid never
sees resubstitution scores. The forest is a from-scratch CART ensemble
(Gini, sqrt-width feature subsets, min-leaf 2) with numba-compiled tree
kernels; its probability is the fraction of trees voting positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._forest import grow_tree, tree_leaf_values
from .errors import ConvergenceError, TrainingError

SVM_GAMMA = 0.001
SVM_C = 0.1
SMO_TOL = 1e-3
SMO_MAX_ITER = 500_000
KERNEL_CACHE_MB = 512
PLATT_FOLDS = 3

FOREST_TREES = 100
FOREST_MIN_LEAF = 2

ENSEMBLE_W_SVM = 0.3
ENSEMBLE_W_FOREST = 0.7
ENSEMBLE_CUTOFF = 0.3


def _values(X) -> np.ndarray:
    return np.ascontiguousarray(getattr(X, "values", X), dtype=np.float64)


def _check_two_classes(y: np.ndarray) -> None:
    if y.all() or not y.any():
        raise TrainingError("training labels contain a single class")


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq_a = (A**2).sum(axis=1)[:, None]
    sq_b = (B**2).sum(axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


class _KernelRows:
    """Row access to the RBF Gram matrix under a byte budget.

    Below the budget the full matrix is materialized once; above it rows
    are computed on demand and kept in a bounded FIFO cache.
    """

    def __init__(self, X: np.ndarray, gamma: float, cache_bytes: int):
        self.X = X
        self.gamma = gamma
        self.n = X.shape[0]
        self._sq = (X**2).sum(axis=1)
        if self.n * self.n * 8 <= cache_bytes:
            self._full = rbf_kernel(X, X, gamma)
            self._cache: dict[int, np.ndarray] | None = None
        else:
            self._full = None
            self._cache = {}
            self._max_rows = max(2, cache_bytes // (8 * self.n))

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        cached = self._cache.get(i)
        if cached is not None:
            return cached
        d2 = np.maximum(self._sq + self._sq[i] - 2.0 * (self.X @ self.X[i]), 0.0)
        row = np.exp(-self.gamma * d2)
        if len(self._cache) >= self._max_rows:
            self._cache.pop(next(iter(self._cache)))
        self._cache[i] = row
        return row


def _smo_solve(
    kernel: _KernelRows,
    y_pm: np.ndarray,
    C: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int]:
    """Dual SMO with maximal-violating-pair working set selection.

    Returns (alpha, bias, iterations). y_pm is +/-1. The gradient is
    tracked through u_i = sum_j alpha_j y_j K_ij; the violation measure is
    m(alpha) - M(alpha) over the usual index sets.
    """
    n = y_pm.size
    alpha = np.zeros(n)
    u = np.zeros(n)
    eps = 1e-12
    it = 0
    m_val = math.inf
    big_m_val = -math.inf
    for it in range(1, max_iter + 1):
        neg_grad = y_pm - u
        up = ((alpha < C - eps) & (y_pm > 0)) | ((alpha > eps) & (y_pm < 0))
        low = ((alpha < C - eps) & (y_pm < 0)) | ((alpha > eps) & (y_pm > 0))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[neg_grad[up].argmax()])
        j = int(np.flatnonzero(low)[neg_grad[low].argmin()])
        m_val = neg_grad[i]
        big_m_val = neg_grad[j]
        if m_val - big_m_val <= tol:
            break

        k_i = kernel.row(i)
        k_j = kernel.row(j)
        eta = max(k_i[i] + k_j[j] - 2.0 * k_i[j], 1e-12)
        e_i = u[i] - y_pm[i]
        e_j = u[j] - y_pm[j]
        if y_pm[i] != y_pm[j]:
            lo_bound = max(0.0, alpha[j] - alpha[i])
            hi_bound = min(C, C + alpha[j] - alpha[i])
        else:
            lo_bound = max(0.0, alpha[i] + alpha[j] - C)
            hi_bound = min(C, alpha[i] + alpha[j])
        new_j = np.clip(alpha[j] + y_pm[j] * (e_i - e_j) / eta, lo_bound, hi_bound)
        delta_j = new_j - alpha[j]
        if abs(delta_j) < 1e-15:
            # Numerically stuck pair; the violation is below resolution.
            break
        new_i = alpha[i] + y_pm[i] * y_pm[j] * (alpha[j] - new_j)
        delta_i = new_i - alpha[i]
        alpha[i] = new_i
        alpha[j] = new_j
        u += (delta_i * y_pm[i]) * k_i + (delta_j * y_pm[j]) * k_j
    else:
        raise ConvergenceError(
            f"SMO hit {max_iter} iterations with KKT violation {m_val - big_m_val:.3e}"
        )
    if math.isfinite(m_val) and math.isfinite(big_m_val):
        bias = (m_val + big_m_val) / 2.0
    else:
        free = (alpha > eps) & (alpha < C - eps)
        bias = float((y_pm[free] - u[free]).mean()) if free.any() else 0.0
    return alpha, float(bias), it


def _fit_platt(decision: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Newton fit of P(y=1|f) = 1 / (1 + exp(A f + B)).

    Targets are the smoothed frequencies (N+1)/(N+2) and 1/(N+2) rather
    than hard 0/1, and the line search backtracks on the regularized
    cross-entropy, following the numerically careful published recipe.
    """
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    t = np.where(labels, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12

    def objective(a_, b_):
        z = a_ * decision + b_
        # Sum of t*z + log(1 + e^-z), branch chosen so exp never overflows.
        return float(np.sum(np.where(
            z >= 0, t * z + np.log1p(np.exp(-np.abs(z))),
            (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))),
        )))

    f_val = objective(a, b)
    for _ in range(100):
        z = a * decision + b
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        d1 = t - p
        grad_a = float((decision * d1).sum())
        grad_b = float(d1.sum())
        if max(abs(grad_a), abs(grad_b)) < 1e-5:
            break
        w = p * (1.0 - p)
        h11 = float((decision * decision * w).sum()) + sigma
        h22 = float(w.sum()) + sigma
        h12 = float((decision * w).sum())
        det = h11 * h22 - h12 * h12
        da = -(h22 * grad_a - h12 * grad_b) / det
        db = -(h11 * grad_b - h12 * grad_a) / det
        descent = grad_a * da + grad_b * db
        step = 1.0
        while step >= 1e-10:
            f_new = objective(a + step * da, b + step * db)
            if f_new < f_val + 1e-4 * step * descent:
                a, b, f_val = a + step * da, b + step * db, f_new
                break
            step /= 2.0
        else:
            break
    return a, b


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    platt_a: float
    platt_b: float
    n_iter: int

    def decision_values(self, X) -> np.ndarray:
        X = _values(X)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def predict_proba(self, X) -> np.ndarray:
        z = self.platt_a * self.decision_values(X) + self.platt_b
        return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))


def _stratified_fold_ids(labels: np.ndarray, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    fold_of = np.empty(labels.size, dtype=np.int64)
    for cls in (True, False):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        fold_of[members] = np.arange(members.size) % n_folds
    return fold_of


def train_svm(
    X,
    y: Sequence[bool],
    gamma: float = SVM_GAMMA,
    C: float = SVM_C,
    seed: int = 0,
    tol: float = SMO_TOL,
    max_iter: int = SMO_MAX_ITER,
    cache_mb: int = KERNEL_CACHE_MB,
    calibration_folds: int = PLATT_FOLDS,
) -> SvmModel:
    X = _values(X)
    y = np.asarray(y, dtype=bool)
    if X.shape[0] != y.size:
        raise ValueError("X and y must agree on row count")
    _check_two_classes(y)
    y_pm = np.where(y, 1.0, -1.0)
    cache_bytes = int(cache_mb) * 1024 * 1024
    rng = np.random.default_rng(seed)

    min_class = int(min(y.sum(), (~y).sum()))
    n_folds = min(calibration_folds, min_class)
    if n_folds >= 2:
        oof = np.zeros(y.size)
        fold_of = _stratified_fold_ids(y, n_folds, rng)
        for fold in range(n_folds):
            tr = fold_of != fold
            te = ~tr
            alpha, bias, _ = _smo_solve(
                _KernelRows(X[tr], gamma, cache_bytes), y_pm[tr], C, tol, max_iter
            )
            coef = alpha * y_pm[tr]
            oof[te] = rbf_kernel(X[te], X[tr], gamma) @ coef + bias
        platt_source = oof
    else:
        platt_source = None  # resubstitution fallback below

    alpha, bias, n_iter = _smo_solve(_KernelRows(X, gamma, cache_bytes), y_pm, C, tol, max_iter)
    keep = alpha > 1e-12
    model_wo_platt = (X[keep], alpha[keep] * y_pm[keep], bias)
    if platt_source is None:
        platt_source = rbf_kernel(X, model_wo_platt[0], gamma) @ model_wo_platt[1] + bias
    platt_a, platt_b = _fit_platt(platt_source, y)
    return SvmModel(
        support_vectors=model_wo_platt[0],
        dual_coef=model_wo_platt[1],
        bias=bias,
        gamma=gamma,
        C=C,
        platt_a=platt_a,
        platt_b=platt_b,
        n_iter=n_iter,
    )


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    n_features: int
    n_trees: int
    seed: int

    def predict_proba(self, X) -> np.ndarray:
        X = _values(X)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        votes = np.zeros(X.shape[0])
        leaf = np.empty(X.shape[0])
        for feat, thresh, left, right, value in self.trees:
            tree_leaf_values(feat, thresh, left, right, value, X, leaf)
            votes += leaf > 0.5
        return votes / self.n_trees


def train_forest(
    X,
    y: Sequence[bool],
    n_trees: int = FOREST_TREES,
    seed: int = 0,
    min_leaf: int = FOREST_MIN_LEAF,
    max_features: int | None = None,
) -> ForestModel:
    X = _values(X)
    y = np.asarray(y, dtype=bool)
    if X.shape[0] != y.size:
        raise ValueError("X and y must agree on row count")
    _check_two_classes(y)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    width = X.shape[1]
    if max_features is None:
        max_features = max(1, math.ceil(math.sqrt(width)))
    max_features = min(max_features, width)
    y8 = y.astype(np.uint8)
    trees = tuple(
        grow_tree(X, y8, np.uint64(seed + t), max_features, min_leaf)
        for t in range(n_trees)
    )
    return ForestModel(trees=trees, n_features=width, n_trees=n_trees, seed=seed)


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    svm: SvmModel
    forest: ForestModel
    w_svm: float = ENSEMBLE_W_SVM
    w_forest: float = ENSEMBLE_W_FOREST
    cutoff: float = ENSEMBLE_CUTOFF

    def __post_init__(self) -> None:
        if abs(self.w_svm + self.w_forest - 1.0) > 1e-9:
            raise ValueError("ensemble weights must sum to 1")
        if not 0.0 < self.cutoff < 1.0:
            raise ValueError("cutoff must lie strictly between 0 and 1")


def ensemble_probs(model: EnsembleModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = _values(X)
    p = model.w_svm * model.svm.predict_proba(X) + model.w_forest * model.forest.predict_proba(X)
    return p, p >= model.cutoff


def ensemble_prob(model: EnsembleModel, x: np.ndarray) -> tuple[float, bool]:
    p, label = ensemble_probs(model, np.asarray(x, dtype=float)[None, :])
    return float(p[0]), bool(label[0])


def train_ensemble(
    X,
    y: Sequence[bool],
    gamma: float = SVM_GAMMA,
    C: float = SVM_C,
    n_trees: int = FOREST_TREES,
    w_svm: float = ENSEMBLE_W_SVM,
    w_forest: float = ENSEMBLE_W_FOREST,
    cutoff: float = ENSEMBLE_CUTOFF,
    seed: int = 0,
    cache_mb: int = KERNEL_CACHE_MB,
) -> EnsembleModel:
    svm = train_svm(X, y, gamma=gamma, C=C, seed=seed, cache_mb=cache_mb)
    forest = train_forest(X, y, n_trees=n_trees, seed=seed)
    return EnsembleModel(svm=svm, forest=forest, w_svm=w_svm, w_forest=w_forest, cutoff=cutoff)
