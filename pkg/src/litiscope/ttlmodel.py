"""Time-to-litigation model over litigated cases.

Litigated cases are bucketed into year groups by how soon after issue the
first suit arrived. Two predictors are built on top of the buckets: one
binary model per hierarchy node with a monotone adjustment, and a nested
convex-hull classifier grown outward from the fastest-litigated group.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import TrainingError
from .geometry import HULL_TOL, hull_distances, kmeans
from .litmodel import (
    LitTrainConfig,
    LitigationModel,
    score_litigation_batch,
    score_pure_batch,
    train_litigation,
)
from .util import derive_seed

log = logging.getLogger(__name__)

MAX_MODELED_YEARS = 14.0


class YearGroup(enum.IntEnum):
    """Time-to-litigation bucket; the value is the bucket's exclusive upper bound."""

    G1 = 1
    G4 = 4
    G7 = 7
    G14 = 14


GROUP_ORDER = (YearGroup.G1, YearGroup.G4, YearGroup.G7, YearGroup.G14)


def year_group(years: float) -> YearGroup:
    """Bucket a nonnegative time to litigation; intervals are half-open."""
    if not np.isfinite(years) or years < 0:
        raise ValueError(f"time to litigation must be a nonnegative number, got {years!r}")
    for group in GROUP_ORDER:
        if years < group.value:
            return group
    raise ValueError(
        f"time to litigation {years} falls outside the modeled range "
        f"(under {MAX_MODELED_YEARS:g} years)"
    )


def assign_year_groups(years: Sequence[float]) -> tuple[list[YearGroup], np.ndarray]:
    """Bucket each value, dropping out-of-range cases with a logged warning.

    Returns the groups of the kept rows and a boolean keep mask aligned
    with the input.
    """
    arr = np.asarray(years, dtype=float)
    keep = arr < MAX_MODELED_YEARS
    n_dropped = int((~keep).sum())
    if n_dropped:
        log.warning(
            "excluding %d litigated case(s) with time to litigation >= %g years",
            n_dropped,
            MAX_MODELED_YEARS,
        )
    return [year_group(v) for v in arr[keep]], keep


@dataclass(frozen=True)
class NodePrediction:
    """Per-node booleans, each meaning "litigated before year t"."""

    by_1: bool
    by_4: bool
    by_7: bool
    by_14: bool = False


def hierarchy_adjust(raw: NodePrediction) -> NodePrediction:
    """Close the prediction upward: litigated by year 1 implies by 4, 7, 14.

    The root of the litigated branch is always true after adjustment.
    """
    by_4 = raw.by_4 or raw.by_1
    by_7 = raw.by_7 or by_4
    return NodePrediction(by_1=raw.by_1, by_4=by_4, by_7=by_7, by_14=True)


def node_group(pred: NodePrediction) -> YearGroup:
    """Innermost true node, read as a year-group label."""
    if pred.by_1:
        return YearGroup.G1
    if pred.by_4:
        return YearGroup.G4
    if pred.by_7:
        return YearGroup.G7
    return YearGroup.G14


# Hierarchy nodes, innermost first, with the groups counted as positives.
NODE_POSITIVES = (
    ("by_1", frozenset({YearGroup.G1})),
    ("by_4", frozenset({YearGroup.G1, YearGroup.G4})),
    ("by_7", frozenset({YearGroup.G1, YearGroup.G4, YearGroup.G7})),
)


@dataclass(frozen=True)
class PerNodeModels:
    by_1: LitigationModel
    by_4: LitigationModel
    by_7: LitigationModel
    pure: bool = False


def train_per_node(
    X, groups: Sequence[YearGroup], cfg: LitTrainConfig, pure: bool = False
) -> PerNodeModels:
    """One binary model per hierarchy node over litigated cases only.

    Node "by year t" takes cases with T < t as positives and the remaining
    litigated cases as negatives; each node runs the full litigation
    pipeline (resampling included) on its own split. `pure` marks the
    bundle to predict from the ensembles alone.
    """
    rows = np.asarray(getattr(X, "values", X), dtype=float)
    if rows.shape[0] != len(groups):
        raise ValueError("groups must align with the feature rows")
    trained = {}
    for name, positives in NODE_POSITIVES:
        labels = np.array([g in positives for g in groups])
        if labels.all() or not labels.any():
            raise TrainingError(
                f"node {name} needs litigated cases on both sides of year "
                f"{name.split('_')[1]}"
            )
        node_cfg = replace(cfg, seed=derive_seed(cfg.seed, "ttl-node", name))
        trained[name] = train_litigation(X, labels, node_cfg)
    return PerNodeModels(pure=pure, **trained)


def predict_nodes(models: PerNodeModels, X) -> list[NodePrediction]:
    """Raw per-node votes; apply hierarchy_adjust before reading them as a tree."""
    rows = np.asarray(getattr(X, "values", X), dtype=float)
    votes = {}
    for name, _ in NODE_POSITIVES:
        model: LitigationModel = getattr(models, name)
        if models.pure:
            votes[name] = score_pure_batch(model.ensemble, rows)
        else:
            votes[name], _ = score_litigation_batch(model, rows)
    return [
        NodePrediction(by_1=bool(b1), by_4=bool(b4), by_7=bool(b7))
        for b1, b4, b7 in zip(votes["by_1"], votes["by_4"], votes["by_7"])
    ]


def predict_adjusted(models: PerNodeModels, X) -> list[NodePrediction]:
    return [hierarchy_adjust(p) for p in predict_nodes(models, X)]


@dataclass(frozen=True, eq=False)
class NestedHulls:
    """Per-cluster point layers; layers[c][s] holds cluster c at stage s.

    Stage s covers GROUP_ORDER[s]; each stage's points are a superset of
    the previous stage's for the same cluster.
    """

    layers: tuple[tuple[np.ndarray, ...], ...]
    k: int


def train_nested_hulls(X, groups: Sequence[YearGroup], k: int, seed: int) -> NestedHulls:
    """Cluster the fastest-litigated group, then grow each cluster outward.

    Later groups join one stage at a time: every row of the stage is
    measured against the hulls as they stood when the stage began and
    appended to the nearest one (ties go to the lowest cluster index).
    """
    rows = np.asarray(getattr(X, "values", X), dtype=float)
    if rows.shape[0] != len(groups):
        raise ValueError("groups must align with the feature rows")
    group_arr = np.array([g.value for g in groups])
    inner = rows[group_arr == YearGroup.G1.value]
    if inner.shape[0] == 0:
        raise TrainingError("nested hulls need at least one case litigated within a year")
    if inner.shape[0] < k:
        raise TrainingError(f"{k} clusters need at least {k} cases litigated within a year")
    try:
        clustering = kmeans(inner, k, seed=seed)
    except ValueError as exc:
        raise TrainingError(str(exc)) from exc

    current = [inner[clustering.assignments == c] for c in range(k)]
    stages = [tuple(np.array(pts) for pts in current)]
    for group in GROUP_ORDER[1:]:
        stage_rows = rows[group_arr == group.value]
        if stage_rows.shape[0]:
            dists = np.stack(
                [hull_distances(stage_rows, pts) for pts in current], axis=1
            )
            nearest = dists.argmin(axis=1)
            current = [
                np.vstack([current[c], stage_rows[nearest == c]])
                if (nearest == c).any()
                else current[c]
                for c in range(k)
            ]
        stages.append(tuple(np.array(pts) for pts in current))
    per_cluster = tuple(
        tuple(stages[s][c] for s in range(len(GROUP_ORDER))) for c in range(k)
    )
    return NestedHulls(layers=per_cluster, k=k)


def classify_nested_batch(
    nested: NestedHulls, X, tol: float = HULL_TOL
) -> list[YearGroup]:
    """Innermost layer whose hull contains each row; contained in none means G14."""
    rows = np.asarray(getattr(X, "values", X), dtype=float)
    out = np.full(rows.shape[0], len(GROUP_ORDER) - 1, dtype=int)
    undecided = np.arange(rows.shape[0])
    for s, _ in enumerate(GROUP_ORDER[:-1]):
        dists = np.stack(
            [
                hull_distances(rows[undecided], nested.layers[c][s], tol=tol)
                for c in range(nested.k)
            ],
            axis=1,
        )
        inside = dists.min(axis=1) <= tol
        out[undecided[inside]] = s
        undecided = undecided[~inside]
        if undecided.size == 0:
            break
    return [GROUP_ORDER[s] for s in out]


def classify_nested(nested: NestedHulls, x: np.ndarray, tol: float = HULL_TOL) -> YearGroup:
    return classify_nested_batch(nested, np.asarray(x, dtype=float)[None, :], tol=tol)[0]
