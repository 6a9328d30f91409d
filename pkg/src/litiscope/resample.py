"""SMOTE resampling for the litigation class imbalance.

Each minority row spawns a fixed number of synthetic rows interpolated
toward one of its k nearest minority neighbors. The majority class grows
too: j majority rows are drawn with replacement per synthetic row and
appended. That is the arithmetic the worked numbers imply (140 -> 840
minority alongside 6500 -> 7200 majority at s=5, j=1); a flag switches to
classical undersampling, which removes m*s*j majority rows instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TrainingError
from .featset import FeatureMatrix, FeatureSchema


@dataclass(frozen=True)
class SmoteConfig:
    n_synth_per_minority: int = 5
    n_major_per_synth: int = 1
    k_neighbors: int = 5
    seed: int = 0
    undersample_majority: bool = False

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.n_synth_per_minority < 0 or self.n_major_per_synth < 0:
            raise ValueError("resampling counts must be >= 0")


def one_hot_groups(schema: FeatureSchema) -> list[list[int]]:
    """Column index groups that form one one-hot block each (by field)."""
    groups: dict[str, list[int]] = {}
    for i, col in enumerate(schema.columns):
        if col.kind == "categorical-one-hot":
            field = col.name.split("=", 1)[0]
            groups.setdefault(field, []).append(i)
    return list(groups.values())


def _minority_label(labels: np.ndarray) -> bool:
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    # Tie goes to the litigated class; it is the one SMOTE exists to help.
    return n_pos <= n_neg


def smote(
    matrix: FeatureMatrix,
    labels: Sequence[bool],
    cfg: SmoteConfig,
    groups: Sequence[Sequence[int]] | None = None,
) -> tuple[FeatureMatrix, np.ndarray]:
    """Resample a labeled feature matrix. Returns the new matrix and labels.

    Row order: all original rows first (in place), then per minority row
    its synthetic rows, each immediately followed by its sampled majority
    companions. ``groups`` lists one-hot column blocks; a synthetic row
    copies each block whole from the nearer parent (u <= 0.5 means the
    seed row) instead of interpolating.
    """
    labels_arr = np.asarray(labels, dtype=bool)
    X = matrix.values
    if labels_arr.size != X.shape[0]:
        raise ValueError("labels length must match matrix rows")
    s = cfg.n_synth_per_minority
    j = cfg.n_major_per_synth
    if s == 0:
        return matrix, labels_arr.copy()

    minority = _minority_label(labels_arr)
    min_idx = np.flatnonzero(labels_arr == minority)
    maj_idx = np.flatnonzero(labels_arr != minority)
    m, big_m = min_idx.size, maj_idx.size
    if m < cfg.k_neighbors + 1:
        raise TrainingError(
            f"SMOTE needs at least k_neighbors+1 = {cfg.k_neighbors + 1} minority rows, got {m}"
        )
    rng = np.random.default_rng(cfg.seed)

    Xmin = X[min_idx]
    d2 = ((Xmin[:, None, :] - Xmin[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    neighbor_table = np.argsort(d2, axis=1, kind="stable")[:, : cfg.k_neighbors]

    ids: list[str] = list(matrix.ids)
    extra_labels: list[bool] = []
    extras: list[np.ndarray] = []
    dup_counter = 0
    for local_i, i in enumerate(min_idx):
        seed_row = X[i]
        for t in range(s):
            nb = Xmin[neighbor_table[local_i, int(rng.integers(0, cfg.k_neighbors))]]
            u = float(rng.uniform())
            synth = seed_row + u * (nb - seed_row)
            if groups:
                parent = seed_row if u <= 0.5 else nb
                for grp in groups:
                    synth[list(grp)] = parent[list(grp)]
            extras.append(synth)
            ids.append(f"{matrix.ids[i]}~s{t}")
            extra_labels.append(minority)
            if not cfg.undersample_majority:
                for _ in range(j):
                    pick = int(maj_idx[int(rng.integers(0, big_m))])
                    extras.append(X[pick].copy())
                    ids.append(f"{matrix.ids[pick]}~d{dup_counter}")
                    dup_counter += 1
                    extra_labels.append(not minority)

    values = np.vstack([X, np.array(extras)]) if extras else X.copy()
    all_labels = np.concatenate([labels_arr, np.array(extra_labels, dtype=bool)])

    if cfg.undersample_majority:
        n_remove = m * s * j
        if n_remove > big_m:
            raise TrainingError(
                f"undersampling would remove {n_remove} majority rows but only {big_m} exist"
            )
        removed = set(rng.choice(maj_idx, size=n_remove, replace=False).tolist())
        keep = [r for r in range(values.shape[0]) if r not in removed]
        values = values[keep]
        all_labels = all_labels[keep]
        ids = [ids[r] for r in keep]

    return FeatureMatrix(values, tuple(ids)), all_labels
