"""Litigation-likelihood models: pure classification and cluster-with-ensemble.

The cluster route scores a case in three stages. First the distances to
the nearest litigated and non-litigated cluster hulls form a ratio; below
the threshold the case is provisionally litigated. Second, a ball around
the case (radius = scale times the distance to the closest training point
of the provisional class) is inspected: if the ratio of litigated to
non-litigated training cases inside is below a floor, the provisional
litigated label is revoked. Otherwise the weighted SVM+forest ensemble
makes the final call at its cutoff.
"""

from __future__ import annotations

import math
import pickle
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ModelFileError, TrainingError
from .featset import FeatureMatrix, FeatureSchema
from .geometry import (
    HULL_TOL,
    hull_distances,
    kmeans,
    nearest_point_distances,
    pairwise_sq_distances,
    safe_ratio,
    safe_ratios,
)
from .learners import (
    ENSEMBLE_CUTOFF,
    ENSEMBLE_W_FOREST,
    ENSEMBLE_W_SVM,
    FOREST_TREES,
    KERNEL_CACHE_MB,
    SVM_C,
    SVM_GAMMA,
    EnsembleModel,
    ensemble_probs,
    train_ensemble,
)
from .resample import SmoteConfig, one_hot_groups, smote
from .util import derive_seed

CLUSTERS_PER_CLASS = 5


@dataclass(frozen=True)
class LitHyperparams:
    """Thresholds of the cluster-with-ensemble decision path.

    ball_scale multiplies the nearest-point distance r into the ball
    radius z (set scale_divides to read it as z = r / ball_scale);
    hull_ratio_max is the hull-distance-ratio cutoff for the provisional
    litigated label; lit_fraction_min is the floor under which the
    provisional label is revoked.
    """

    ball_scale: float = 3.5
    hull_ratio_max: float = 1.3
    lit_fraction_min: float = 0.015
    scale_divides: bool = False
    hull_tol: float = HULL_TOL

    def __post_init__(self) -> None:
        if self.ball_scale <= 0 or self.hull_ratio_max <= 0 or self.lit_fraction_min < 0:
            raise ValueError("hyperparameters out of range")
        if self.hull_tol <= 0:
            raise ValueError("hull tolerance must be positive")

    def radius(self, r: np.ndarray) -> np.ndarray:
        return r / self.ball_scale if self.scale_divides else r * self.ball_scale


@dataclass(frozen=True)
class LitTrainConfig:
    clusters_per_class: int = CLUSTERS_PER_CLASS
    hyper: LitHyperparams = field(default_factory=LitHyperparams)
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    gamma: float = SVM_GAMMA
    svm_C: float = SVM_C
    n_trees: int = FOREST_TREES
    w_svm: float = ENSEMBLE_W_SVM
    w_forest: float = ENSEMBLE_W_FOREST
    cutoff: float = ENSEMBLE_CUTOFF
    cache_mb: int = KERNEL_CACHE_MB
    cluster_on_original: bool = False
    balls_include_synthetic: bool = False
    seed: int = 0


@dataclass(frozen=True, eq=False)
class LitigationModel:
    lit_hulls: tuple[np.ndarray, ...]
    nonlit_hulls: tuple[np.ndarray, ...]
    ball_points: np.ndarray
    ball_labels: np.ndarray
    ensemble: EnsembleModel
    hyper: LitHyperparams
    resampled_counts: tuple[int, int]
    schema: FeatureSchema | None = None

    def with_schema(self, schema: FeatureSchema) -> "LitigationModel":
        return replace(self, schema=schema)


@dataclass(frozen=True)
class ScoreTrace:
    d_lit: float
    d_nonlit: float
    hull_ratio: float
    initial_label: bool
    r: float
    z: float
    n_lit_in_ball: int
    n_nonlit_in_ball: int
    lit_fraction_ratio: float
    ensemble_p: float | None
    final_label: bool


def _cluster_hulls(points: np.ndarray, k: int, seed: int, side: str) -> tuple[np.ndarray, ...]:
    if points.shape[0] < k:
        raise TrainingError(
            f"{side} class has {points.shape[0]} rows, fewer than {k} clusters"
        )
    try:
        clusters = kmeans(points, k=k, seed=seed)
    except ValueError as exc:
        raise TrainingError(f"{side} class clustering failed: {exc}")
    return tuple(clusters.members(c) for c in range(k))


def train_litigation(
    matrix: FeatureMatrix,
    labels: Sequence[bool],
    cfg: LitTrainConfig,
    schema: FeatureSchema | None = None,
) -> LitigationModel:
    """Resample, cluster each class, and fit the ensemble."""
    y = np.asarray(labels, dtype=bool)
    if not y.any() or y.all():
        raise TrainingError("training labels contain a single class")
    groups = one_hot_groups(schema) if schema is not None else None
    smote_cfg = replace(cfg.smote, seed=derive_seed(cfg.seed, "smote"))
    resampled, res_labels = smote(matrix, y, smote_cfg, groups=groups)

    cluster_x, cluster_y = (
        (matrix.values, y) if cfg.cluster_on_original else (resampled.values, res_labels)
    )
    lit_hulls = _cluster_hulls(
        cluster_x[cluster_y], cfg.clusters_per_class,
        derive_seed(cfg.seed, "kmeans", "lit"), "litigated",
    )
    nonlit_hulls = _cluster_hulls(
        cluster_x[~cluster_y], cfg.clusters_per_class,
        derive_seed(cfg.seed, "kmeans", "nonlit"), "non-litigated",
    )

    ensemble = train_ensemble(
        resampled.values,
        res_labels,
        gamma=cfg.gamma,
        C=cfg.svm_C,
        n_trees=cfg.n_trees,
        w_svm=cfg.w_svm,
        w_forest=cfg.w_forest,
        cutoff=cfg.cutoff,
        seed=derive_seed(cfg.seed, "ensemble"),
        cache_mb=cfg.cache_mb,
    )
    if cfg.balls_include_synthetic:
        ball_points, ball_labels = resampled.values, res_labels
    else:
        ball_points, ball_labels = matrix.values, y
    return LitigationModel(
        lit_hulls=lit_hulls,
        nonlit_hulls=nonlit_hulls,
        ball_points=np.ascontiguousarray(ball_points, dtype=float),
        ball_labels=ball_labels.copy(),
        ensemble=ensemble,
        hyper=cfg.hyper,
        resampled_counts=(int(res_labels.sum()), int((~res_labels).sum())),
        schema=schema,
    )


def _min_hull_distances(
    X: np.ndarray, hulls: Sequence[np.ndarray], tol: float = HULL_TOL
) -> np.ndarray:
    return np.minimum.reduce([hull_distances(X, hull, tol=tol) for hull in hulls])


def _ball_counts_batch(
    X: np.ndarray, radii: np.ndarray, points: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n_lit = np.empty(X.shape[0], dtype=np.int64)
    n_nonlit = np.empty(X.shape[0], dtype=np.int64)
    step = max(1, int(4_000_000 / max(points.shape[0], 1)))
    r2 = radii * radii
    for start in range(0, X.shape[0], step):
        stop = start + step
        inside = pairwise_sq_distances(X[start:stop], points) <= r2[start:stop, None]
        n_lit[start:stop] = (inside & labels[None, :]).sum(axis=1)
        n_nonlit[start:stop] = (inside & ~labels[None, :]).sum(axis=1)
    return n_lit, n_nonlit


def score_litigation_batch(
    model: LitigationModel, X
) -> tuple[np.ndarray, list[ScoreTrace]]:
    """Run the full decision path for each row; labels plus full traces."""
    X = np.ascontiguousarray(getattr(X, "values", X), dtype=float)
    if model.schema is not None and X.shape[1] != model.schema.width():
        raise ValueError(
            f"expected {model.schema.width()} features, got {X.shape[1]}"
        )
    n = X.shape[0]
    tol = model.hyper.hull_tol
    d_lit = _min_hull_distances(X, model.lit_hulls, tol=tol)
    d_nonlit = _min_hull_distances(X, model.nonlit_hulls, tol=tol)
    hull_ratio = safe_ratios(d_lit, d_nonlit)
    initial = hull_ratio < model.hyper.hull_ratio_max

    lit_points = model.ball_points[model.ball_labels]
    nonlit_points = model.ball_points[~model.ball_labels]
    r = np.empty(n)
    if initial.any():
        r[initial] = nearest_point_distances(X[initial], lit_points)
    if (~initial).any():
        r[~initial] = nearest_point_distances(X[~initial], nonlit_points)
    z = model.hyper.radius(r)
    n_lit, n_nonlit = _ball_counts_batch(X, z, model.ball_points, model.ball_labels)
    rho = safe_ratios(n_lit.astype(float), n_nonlit.astype(float))

    to_ensemble = rho >= model.hyper.lit_fraction_min
    final = np.zeros(n, dtype=bool)
    ensemble_p = np.full(n, np.nan)
    if to_ensemble.any():
        p, lab = ensemble_probs(model.ensemble, X[to_ensemble])
        ensemble_p[to_ensemble] = p
        final[to_ensemble] = lab

    traces = [
        ScoreTrace(
            d_lit=float(d_lit[i]),
            d_nonlit=float(d_nonlit[i]),
            hull_ratio=float(hull_ratio[i]),
            initial_label=bool(initial[i]),
            r=float(r[i]),
            z=float(z[i]),
            n_lit_in_ball=int(n_lit[i]),
            n_nonlit_in_ball=int(n_nonlit[i]),
            lit_fraction_ratio=float(rho[i]),
            ensemble_p=float(ensemble_p[i]) if to_ensemble[i] else None,
            final_label=bool(final[i]),
        )
        for i in range(n)
    ]
    return final, traces


def score_litigation(model: LitigationModel, x: np.ndarray) -> tuple[bool, ScoreTrace]:
    labels, traces = score_litigation_batch(model, np.asarray(x, dtype=float)[None, :])
    return bool(labels[0]), traces[0]


def score_pure_batch(model: EnsembleModel, X) -> np.ndarray:
    _, labels = ensemble_probs(model, X)
    return labels


def score_pure(model: EnsembleModel, x: np.ndarray) -> bool:
    return bool(score_pure_batch(model, np.asarray(x, dtype=float)[None, :])[0])


MODEL_HEADER = b"#litiscope-model v1\n"


def save_model(path, payload: object) -> None:
    """Write a versioned model file: one header line, then a pickle.

    The payload is whatever the caller trained, typically a bundle of the
    LitigationModel (schema included) plus the featurization context it
    needs at prediction time.
    """
    data = pickle.dumps(payload, protocol=4)
    with open(path, "wb") as fh:
        fh.write(MODEL_HEADER)
        fh.write(data)


def load_model(path) -> object:
    try:
        with open(path, "rb") as fh:
            header = fh.readline()
            if header != MODEL_HEADER:
                raise ModelFileError(
                    f"{path}: not a model file (expected header "
                    f"{MODEL_HEADER.decode().strip()!r})"
                )
            return pickle.load(fh)
    except OSError as exc:
        raise ModelFileError(f"{path}: cannot read model file: {exc}") from exc
    except pickle.UnpicklingError as exc:
        raise ModelFileError(f"{path}: corrupt model payload: {exc}") from exc


def trace_consistent(trace: ScoreTrace, hyper: LitHyperparams) -> bool:
    """Recheck a trace's arithmetic; used by tests and debugging."""
    if not math.isclose(
        trace.hull_ratio, safe_ratio(trace.d_lit, trace.d_nonlit), rel_tol=1e-12
    ):
        return False
    expected_rho = safe_ratio(trace.n_lit_in_ball, trace.n_nonlit_in_ball)
    if trace.lit_fraction_ratio != expected_rho:
        return False
    if trace.initial_label != (trace.hull_ratio < hyper.hull_ratio_max):
        return False
    revoked = trace.lit_fraction_ratio < hyper.lit_fraction_min
    if revoked:
        return trace.ensemble_p is None and trace.final_label is False
    return trace.ensemble_p is not None
