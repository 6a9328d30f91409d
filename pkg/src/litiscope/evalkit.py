"""Evaluation: confusion counts, P/R/F1, replicated stratified cross-validation.

Also owns the fold pipeline: everything label-dependent (n-gram selection,
schema statistics, resampling, clustering, learners) is fitted on each
training fold alone. The citation graph and its PageRank scores are label
free, so they are built once per corpus.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, DataOption, apply_data_option, litigation_label
from .errors import CorpusError
from .featset import FeatureMatrix, FeatureSchema, assemble_features
from .graphfeat import CitationGraph, build_graph, pagerank
from .litmodel import (
    LitTrainConfig,
    LitigationModel,
    score_litigation_batch,
    score_pure_batch,
    train_litigation,
)
from .textfeat import gram_counter, select_top_from_counters
from .ttlmodel import (
    GROUP_ORDER,
    NODE_POSITIVES,
    NestedHulls,
    PerNodeModels,
    YearGroup,
    assign_year_groups,
    hierarchy_adjust,
    predict_nodes,
    train_nested_hulls,
    train_per_node,
)
from .util import derive_seed

N_TEXTUAL = 30
DEFAULT_FOLDS = 10
DEFAULT_REPS = 3

TASK_LITIGATION = "litigation"
TASK_TTL = "ttl"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float


def confusion(pred: Sequence[bool], truth: Sequence[bool]) -> ConfusionMatrix:
    p = np.asarray(pred, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if p.shape != t.shape:
        raise ValueError(f"prediction and truth lengths differ: {p.shape} vs {t.shape}")
    return ConfusionMatrix(
        tp=int((p & t).sum()),
        fp=int((p & ~t).sum()),
        fn=int((~p & t).sum()),
        tn=int((~p & ~t).sum()),
    )


def metrics(cm: ConfusionMatrix) -> Metrics:
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision, recall, f1)


def stratified_folds(labels: Sequence, n_folds: int, seed: int) -> list[np.ndarray]:
    """Disjoint index folds with each class spread round-robin after a shuffle.

    Per-class counts across folds differ by at most one, and so do the
    fold sizes (the round-robin pointer carries over between classes).
    """
    arr = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    if arr.size < n_folds:
        raise CorpusError(f"cannot split {arr.size} rows into {n_folds} folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    offset = 0
    for cls in np.unique(arr):
        idx = np.flatnonzero(arr == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[(offset + j) % n_folds].append(int(i))
        offset += idx.size
    return [np.sort(np.array(f, dtype=int)) for f in folds]


@dataclass(frozen=True)
class PipelineConfig:
    option: DataOption = DataOption.NO_SEC
    n_textual: int = N_TEXTUAL
    min_df: int = 2
    discount_rate: float = 0.0
    lit: LitTrainConfig = field(default_factory=LitTrainConfig)
    pure: bool = False
    ttl_clusters: int = 5


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    """A trained litigation model plus the context that featurizes new rows."""

    model: LitigationModel
    graph: CitationGraph
    scores: np.ndarray
    litigated_ids: frozenset[str]
    option: DataOption
    pure: bool = False
    nodes: PerNodeModels | None = None
    nested: NestedHulls | None = None


def _counters(corpus: Corpus) -> list[Counter]:
    return [gram_counter(r.claims_text) for r in corpus.records]


def _fit_features(
    corpus: Corpus,
    labels: Sequence[bool],
    cfg: PipelineConfig,
    graph: CitationGraph,
    scores: np.ndarray,
    counters: Sequence[Counter],
    litigated_ids: frozenset[str],
) -> tuple[FeatureMatrix, FeatureSchema]:
    text_set, _ = select_top_from_counters(counters, labels, cfg.n_textual, cfg.min_df)
    return assemble_features(
        corpus,
        text_set,
        graph,
        litigated_ids,
        cfg.option,
        scores=scores,
        counters=counters,
        discount_rate=cfg.discount_rate,
    )


def fit_pipeline(corpus: Corpus, cfg: PipelineConfig, seed: int = 0) -> FittedPipeline:
    """Fit features and the litigation model on an entire (training) corpus."""
    prepared = apply_data_option(corpus, cfg.option)
    labels = [litigation_label(r).litigated for r in prepared.records]
    graph = build_graph(prepared)
    scores = pagerank(graph)
    counters = _counters(prepared)
    litigated = prepared.litigated_ids()
    matrix, schema = _fit_features(
        prepared, labels, cfg, graph, scores, counters, litigated
    )
    lit_cfg = replace(cfg.lit, seed=derive_seed(seed, "lit"))
    model = train_litigation(matrix, labels, lit_cfg, schema=schema)
    return FittedPipeline(
        model=model,
        graph=graph,
        scores=scores,
        litigated_ids=litigated,
        option=cfg.option,
        pure=cfg.pure,
    )


def featurize_for(fitted: FittedPipeline, corpus: Corpus) -> FeatureMatrix:
    prepared = apply_data_option(corpus, fitted.option)
    matrix, _ = assemble_features(
        prepared,
        None,
        fitted.graph,
        fitted.litigated_ids,
        fitted.option,
        schema=fitted.model.schema,
        scores=fitted.scores,
    )
    return matrix


def predict_pipeline(fitted: FittedPipeline, corpus: Corpus, pure: bool | None = None):
    """Labels and traces for every record of a corpus under a fitted pipeline."""
    matrix = featurize_for(fitted, corpus)
    if fitted.pure if pure is None else pure:
        labels = score_pure_batch(fitted.model.ensemble, matrix.values)
        return labels, [None] * len(labels)
    return score_litigation_batch(fitted.model, matrix.values)


def fit_ttl_nested(
    fitted: FittedPipeline, corpus: Corpus, k: int, seed: int
) -> FittedPipeline:
    """Attach nested year-group hulls, fitted on the bundle's own feature space.

    Only litigated cases inside the modeled year range participate; the
    hulls then let a litigated-predicted record be placed in a year group
    from the same feature vector that scored it.
    """
    prepared = apply_data_option(corpus, fitted.option)
    lit_idx = [
        i for i, r in enumerate(prepared.records) if litigation_label(r).litigated
    ]
    years = [
        litigation_label(prepared.records[i]).years_to_litigation for i in lit_idx
    ]
    try:
        groups, keep = assign_year_groups(years)
    except ValueError as exc:
        raise CorpusError(str(exc))
    kept = np.asarray(lit_idx, dtype=int)[keep]
    matrix = featurize_for(fitted, prepared.subset(kept))
    nested = train_nested_hulls(matrix.values, groups, k, seed)
    return replace(fitted, nested=nested)


@dataclass(frozen=True)
class FoldRecord:
    rep: int
    fold: int
    node: str
    cm: ConfusionMatrix
    scores: Metrics


@dataclass(frozen=True)
class CVReport:
    task: str
    n_folds: int
    n_reps: int
    seed: int
    records: tuple[FoldRecord, ...]

    def nodes(self) -> tuple[str, ...]:
        seen: list[str] = []
        for r in self.records:
            if r.node not in seen:
                seen.append(r.node)
        return tuple(seen)

    def f1_values(self, node: str) -> np.ndarray:
        return np.array([r.scores.f1 for r in self.records if r.node == node])

    def aggregate(self, node: str) -> tuple[float, float]:
        vals = self.f1_values(node)
        return float(vals.mean()), float(vals.std())

    def pooled_cm(self, node: str) -> ConfusionMatrix:
        total = ConfusionMatrix(0, 0, 0, 0)
        for r in self.records:
            if r.node == node:
                total = total + r.cm
        return total


def _train_index(n: int, test_idx: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask)


def _fit_litigation_fold(
    corpus: Corpus,
    labels: np.ndarray,
    train_idx: np.ndarray,
    cfg: PipelineConfig,
    graph: CitationGraph,
    scores: np.ndarray,
    counters: list[Counter],
    seed: int,
) -> tuple[LitigationModel, frozenset[str]]:
    train_corpus = corpus.subset(train_idx)
    train_labels = labels[train_idx]
    train_counters = [counters[i] for i in train_idx]
    litigated = train_corpus.litigated_ids()
    matrix, schema = _fit_features(
        train_corpus, train_labels, cfg, graph, scores, train_counters, litigated
    )
    model = train_litigation(matrix, train_labels, replace(cfg.lit, seed=seed), schema=schema)
    return model, litigated


def _litigation_fold(
    corpus: Corpus,
    labels: np.ndarray,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    cfg: PipelineConfig,
    graph: CitationGraph,
    scores: np.ndarray,
    counters: list[Counter],
    seed: int,
) -> ConfusionMatrix:
    model, litigated = _fit_litigation_fold(
        corpus, labels, train_idx, cfg, graph, scores, counters, seed
    )
    schema = model.schema

    test_corpus = corpus.subset(test_idx)
    test_matrix, _ = assemble_features(
        test_corpus,
        None,
        graph,
        litigated,
        cfg.option,
        schema=schema,
        scores=scores,
        counters=[counters[i] for i in test_idx],
    )
    if cfg.pure:
        pred = score_pure_batch(model.ensemble, test_matrix.values)
    else:
        pred, _ = score_litigation_batch(model, test_matrix.values)
    return confusion(pred, labels[test_idx])


def _ttl_fold(
    corpus: Corpus,
    groups: list[YearGroup],
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    cfg: PipelineConfig,
    graph: CitationGraph,
    scores: np.ndarray,
    counters: list[Counter],
    seed: int,
) -> dict[str, ConfusionMatrix]:
    train_corpus = corpus.subset(train_idx)
    train_groups = [groups[i] for i in train_idx]
    train_counters = [counters[i] for i in train_idx]
    # Text selection needs a binary target; the innermost node's split is
    # used, matching the leaf the hierarchy cares most about.
    inner_labels = [g is YearGroup.G1 for g in train_groups]
    litigated = train_corpus.litigated_ids()
    matrix, schema = _fit_features(
        train_corpus, inner_labels, cfg, graph, scores, train_counters, litigated
    )
    models = train_per_node(
        matrix, train_groups, replace(cfg.lit, seed=seed), pure=cfg.pure
    )
    test_corpus = corpus.subset(test_idx)
    test_matrix, _ = assemble_features(
        test_corpus,
        None,
        graph,
        litigated,
        cfg.option,
        schema=schema,
        scores=scores,
        counters=[counters[i] for i in test_idx],
    )
    adjusted = [hierarchy_adjust(p) for p in predict_nodes(models, test_matrix)]
    out = {}
    for name, positives in NODE_POSITIVES:
        truth = [groups[i] in positives for i in test_idx]
        pred = [getattr(p, name) for p in adjusted]
        out[name] = confusion(pred, truth)
    return out


def cross_validate(
    corpus: Corpus,
    cfg: PipelineConfig,
    folds: int = DEFAULT_FOLDS,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    task: str = TASK_LITIGATION,
) -> CVReport:
    """Replicated stratified k-fold evaluation of either prediction task.

    The litigation task stratifies on the binary label over the whole
    corpus; the time-to-litigation task keeps only litigated cases inside
    the modeled range and stratifies on their year group.
    """
    if task not in (TASK_LITIGATION, TASK_TTL):
        raise ValueError(f"unknown evaluation task {task!r}")
    prepared = apply_data_option(corpus, cfg.option)
    graph = build_graph(prepared)
    scores = pagerank(graph)
    counters = _counters(prepared)
    lit_labels = np.array([litigation_label(r).litigated for r in prepared.records])

    records: list[FoldRecord] = []
    if task == TASK_LITIGATION:
        n_pos = int(lit_labels.sum())
        if n_pos < folds:
            raise CorpusError(
                f"stratified {folds}-fold evaluation needs at least {folds} "
                f"litigated cases, found {n_pos}"
            )
        strata = lit_labels
        eval_corpus = prepared
        eval_counters = counters
    else:
        lit_idx = np.flatnonzero(lit_labels)
        years = [
            litigation_label(prepared.records[i]).years_to_litigation for i in lit_idx
        ]
        try:
            groups, keep = assign_year_groups(years)
        except ValueError as exc:
            raise CorpusError(str(exc))
        kept_idx = lit_idx[keep]
        if kept_idx.size < folds:
            raise CorpusError(
                f"time-to-litigation evaluation needs at least {folds} litigated "
                f"cases under {GROUP_ORDER[-1].value} years, found {kept_idx.size}"
            )
        eval_corpus = prepared.subset(kept_idx)
        eval_counters = [counters[i] for i in kept_idx]
        strata = np.array([g.value for g in groups])

    for rep in range(reps):
        fold_sets = stratified_folds(strata, folds, derive_seed(seed, "folds", rep))
        for f, test_idx in enumerate(fold_sets):
            train_idx = _train_index(len(strata), test_idx)
            fit_seed = derive_seed(seed, "rep", rep, "fold", f)
            if task == TASK_LITIGATION:
                cm = _litigation_fold(
                    eval_corpus, lit_labels, train_idx, test_idx,
                    cfg, graph, scores, eval_counters, fit_seed,
                )
                records.append(FoldRecord(rep, f, TASK_LITIGATION, cm, metrics(cm)))
            else:
                per_node = _ttl_fold(
                    eval_corpus, groups, train_idx, test_idx,
                    cfg, graph, scores, eval_counters, fit_seed,
                )
                for name, _ in NODE_POSITIVES:
                    cm = per_node[name]
                    records.append(FoldRecord(rep, f, name, cm, metrics(cm)))
    return CVReport(task, folds, reps, seed, tuple(records))


REPORT_COLUMNS = ("rep", "fold", "node", "tp", "fp", "fn", "tn", "precision", "recall", "f1")


def report_lines(report: CVReport) -> list[str]:
    """The delimited report body; stable formatting so reruns compare byte-equal."""
    lines = ["\t".join(REPORT_COLUMNS)]
    for r in report.records:
        lines.append(
            "\t".join(
                [
                    str(r.rep),
                    str(r.fold),
                    r.node,
                    str(r.cm.tp),
                    str(r.cm.fp),
                    str(r.cm.fn),
                    str(r.cm.tn),
                    f"{r.scores.precision:.10f}",
                    f"{r.scores.recall:.10f}",
                    f"{r.scores.f1:.10f}",
                ]
            )
        )
    return lines


def write_report(report: CVReport, path) -> None:
    Path(path).write_text("\n".join(report_lines(report)) + "\n", encoding="utf-8")


def summary_table(report: CVReport) -> str:
    rows = [f"task: {report.task}   folds: {report.n_folds}   reps: {report.n_reps}"]
    rows.append(f"{'node':<12}{'mean F1':>10}{'std F1':>10}{'pooled P':>10}{'pooled R':>10}")
    for node in report.nodes():
        mean, std = report.aggregate(node)
        pooled = metrics(report.pooled_cm(node))
        rows.append(
            f"{node:<12}{mean:>10.4f}{std:>10.4f}"
            f"{pooled.precision:>10.4f}{pooled.recall:>10.4f}"
        )
    return "\n".join(rows)


def render_figures(report: CVReport, out_dir) -> list[Path]:
    """Per-fold F1 chart and pooled confusion heatmap, written as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for node in report.nodes():
        vals = report.f1_values(node)
        ax.plot(np.arange(len(vals)), vals, marker="o", linewidth=1, label=node)
        ax.axhline(vals.mean(), linestyle="--", linewidth=0.8, alpha=0.5)
    ax.set_xlabel("fold (across replications)")
    ax.set_ylabel("F1")
    ax.set_title(f"{report.task}: per-fold F1")
    ax.legend()
    f1_path = out / f"{report.task}_f1.png"
    fig.savefig(f1_path, dpi=120)
    plt.close(fig)
    written.append(f1_path)

    nodes = report.nodes()
    fig, axes = plt.subplots(1, len(nodes), figsize=(4 * len(nodes), 3.5), squeeze=False)
    for ax, node in zip(axes[0], nodes):
        cm = report.pooled_cm(node)
        grid = np.array([[cm.tp, cm.fn], [cm.fp, cm.tn]], dtype=float)
        shade = np.log1p(grid)
        ax.imshow(shade, cmap="Blues")
        for (i, j), v in np.ndenumerate(grid):
            ax.text(j, i, f"{int(v)}", ha="center", va="center", fontsize=11)
        ax.set_xticks([0, 1], ["pred +", "pred -"])
        ax.set_yticks([0, 1], ["true +", "true -"])
        ax.set_title(node)
    fig.tight_layout()
    cm_path = out / f"{report.task}_confusion.png"
    fig.savefig(cm_path, dpi=120)
    plt.close(fig)
    written.append(cm_path)
    return written
