"""Feature assembly: textual tf-idf + numeric counts + SEC categoricals.

A FeatureSchema is fitted on training rows only and then applied verbatim
to held-out rows, so no statistic (idf, mean, standard deviation, bin
boundary, category level) ever depends on test data.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import AbstractSet, Mapping, Sequence

import numpy as np

from .corpus import Corpus, DataOption
from .errors import CorpusError
from .graphfeat import CitationGraph, pagerank, record_ref_features
from .textfeat import TextFeatureSet, gram_counter

NUMERIC_NAMES = (
    "n_inventors",
    "n_claims",
    "n_claim_words",
    "n_foreign_refs",
    "n_backward",
    "n_backward_2nd",
    "n_lit_backward",
    "n_lit_backward_2nd",
    "avg_pagerank_backward",
)

SEC_FIELDS = ("revenue", "eps", "share_price")

UNKNOWN_LEVEL = "unknown"


@dataclass(frozen=True)
class FinancialBins:
    """Quantile cut points per SEC field, on discounted values.

    An amount from report year y is carried to the reference year as
    amount * (1 + rate)^(as_of - y) before binning. Rate 0 (the default)
    makes that a pass-through.
    """

    boundaries: Mapping[str, tuple[float, ...]]
    rate: float = 0.0
    as_of: int = 0

    def levels(self, field: str) -> tuple[str, ...]:
        return tuple(f"q{i + 1}" for i in range(len(self.boundaries[field]) + 1)) + (
            UNKNOWN_LEVEL,
        )


def adjust_value(amount: float, report_year: int, rate: float, as_of: int) -> float:
    return amount * (1.0 + rate) ** (as_of - report_year)


def fit_financial_bins(corpus: Corpus, rate: float = 0.0, as_of: int | None = None) -> FinancialBins:
    """Quartile boundaries per field over the discounted training values."""
    years = [r.sec.report_year for r in corpus if r.sec is not None and r.sec.report_year is not None]
    if as_of is None:
        as_of = max(years) if years else 0
    boundaries: dict[str, tuple[float, ...]] = {}
    for field in SEC_FIELDS:
        values = []
        for r in corpus:
            if r.sec is None or getattr(r.sec, field) is None:
                continue
            year = r.sec.report_year if r.sec.report_year is not None else as_of
            values.append(adjust_value(getattr(r.sec, field), year, rate, as_of))
        if not values:
            raise CorpusError(f"cannot fit financial bins: no values for sec field {field!r}")
        cuts = np.quantile(np.asarray(values), [0.25, 0.5, 0.75])
        kept: list[float] = []
        for c in cuts:
            if not kept or c > kept[-1]:
                kept.append(float(c))
        boundaries[field] = tuple(kept)
    return FinancialBins(boundaries, rate=rate, as_of=as_of)


def discretize_financial(
    values: Sequence[tuple[float, int | None] | None],
    bins: FinancialBins,
    as_of: int,
    field: str,
) -> list[str]:
    """Map optional (amount, report_year) pairs to category names."""
    cuts = bins.boundaries[field]
    out: list[str] = []
    for item in values:
        if item is None or item[0] is None:
            out.append(UNKNOWN_LEVEL)
            continue
        amount, year = item
        adjusted = adjust_value(amount, year if year is not None else as_of, bins.rate, as_of)
        out.append(f"q{int(np.searchsorted(cuts, adjusted, side='left')) + 1}")
    return out


def information_gain(feature: Sequence, labels: Sequence[bool]) -> float:
    """IG in bits of an arbitrary discrete column against boolean labels."""
    if len(feature) != len(labels):
        raise ValueError("feature and labels must have equal length")
    n = len(labels)
    if n == 0:
        raise ValueError("information gain needs at least one row")
    labels = [bool(l) for l in labels]

    def entropy(subset: Sequence[bool]) -> float:
        m = len(subset)
        pos = sum(subset)
        h = 0.0
        for count in (pos, m - pos):
            if count:
                p = count / m
                h -= p * math.log2(p)
        return h

    gain = entropy(labels)
    groups: dict = {}
    for value, label in zip(feature, labels):
        groups.setdefault(value, []).append(label)
    for subset in groups.values():
        gain -= (len(subset) / n) * entropy(subset)
    return max(gain, 0.0)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # "textual" | "numeric" | "categorical-one-hot"
    source: str


@dataclass(frozen=True, eq=False)
class FeatureSchema:
    columns: tuple[ColumnSpec, ...]
    grams: tuple[str, ...]
    gram_idf: np.ndarray
    numeric_mean: np.ndarray
    numeric_std: np.ndarray
    option: DataOption
    bins: FinancialBins | None

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        assert len(names) == len(set(names))

    def width(self) -> int:
        return len(self.columns)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        assert self.values.shape[0] == len(self.ids)


def _build_columns(grams: Sequence[str], option: DataOption, bins: FinancialBins | None) -> tuple[ColumnSpec, ...]:
    cols = [ColumnSpec(f"tfidf:{g}", "textual", "claims_text") for g in grams]
    cols += [ColumnSpec(name, "numeric", "record") for name in NUMERIC_NAMES]
    if option is not DataOption.NO_SEC:
        assert bins is not None
        for field in SEC_FIELDS:
            for level in bins.levels(field):
                cols.append(ColumnSpec(f"sec:{field}={level}", "categorical-one-hot", "sec"))
    return tuple(cols)


def _raw_parts(
    corpus: Corpus,
    grams: Sequence[str],
    gram_idf: np.ndarray,
    graph: CitationGraph,
    litigated_ids: AbstractSet[str],
    scores: np.ndarray,
    counters: Sequence[Counter] | None,
) -> tuple[np.ndarray, np.ndarray]:
    n = len(corpus)
    gram_pos = {g: i for i, g in enumerate(grams)}
    textual = np.zeros((n, len(grams)))
    numeric = np.zeros((n, len(NUMERIC_NAMES)))
    for row, record in enumerate(corpus.records):
        counter = counters[row] if counters is not None else gram_counter(record.claims_text)
        for gram, count in counter.items():
            col = gram_pos.get(gram)
            if col is not None:
                textual[row, col] = count * gram_idf[col]
        refs = record_ref_features(record, graph, litigated_ids, scores)
        numeric[row, :4] = (
            record.n_inventors,
            record.n_claims,
            record.n_claim_words,
            record.n_foreign_refs,
        )
        numeric[row, 4:] = refs.as_array()
    return textual, numeric


def _one_hot(corpus: Corpus, bins: FinancialBins) -> np.ndarray:
    blocks: list[np.ndarray] = []
    for field in SEC_FIELDS:
        pairs = [
            None if r.sec is None or getattr(r.sec, field) is None
            else (getattr(r.sec, field), r.sec.report_year)
            for r in corpus
        ]
        cats = discretize_financial(pairs, bins, bins.as_of, field)
        levels = bins.levels(field)
        level_pos = {lv: i for i, lv in enumerate(levels)}
        block = np.zeros((len(corpus), len(levels)))
        for row, cat in enumerate(cats):
            block[row, level_pos.get(cat, level_pos[UNKNOWN_LEVEL])] = 1.0
        blocks.append(block)
    return np.concatenate(blocks, axis=1)


def assemble_features(
    corpus: Corpus,
    text_set: TextFeatureSet | None,
    graph: CitationGraph,
    litigated_ids: AbstractSet[str],
    option: DataOption,
    schema: FeatureSchema | None = None,
    scores: np.ndarray | None = None,
    counters: Sequence[Counter] | None = None,
    discount_rate: float = 0.0,
) -> tuple[FeatureMatrix, FeatureSchema]:
    """Build the feature matrix; fit a schema or apply a supplied one.

    ``graph``, ``litigated_ids``, and ``scores`` always describe the
    training fold; in transform mode ``corpus`` holds the held-out rows.
    ``counters`` optionally carries precomputed per-record gram counters
    aligned to corpus order. ``discount_rate`` only matters in fit mode,
    where it discounts SEC values before binning.
    """
    if scores is None:
        scores = pagerank(graph)
    if schema is None:
        if text_set is None:
            raise ValueError("fitting a schema requires a selected text feature set")
        grams = text_set.grams
        df = np.zeros(len(grams))
        gram_pos = {g: i for i, g in enumerate(grams)}
        for row, record in enumerate(corpus.records):
            counter = counters[row] if counters is not None else gram_counter(record.claims_text)
            for gram in counter.keys():
                col = gram_pos.get(gram)
                if col is not None:
                    df[col] += 1
        # A gram the fitting corpus never shows is given idf 0 so the
        # column stays defined (and inert) rather than erroring.
        idf = np.where(df > 0, np.log(len(corpus) / np.maximum(df, 1.0)), 0.0)
        textual, numeric = _raw_parts(corpus, grams, idf, graph, litigated_ids, scores, counters)
        mean = numeric.mean(axis=0) if len(corpus) else np.zeros(len(NUMERIC_NAMES))
        std = numeric.std(axis=0) if len(corpus) else np.ones(len(NUMERIC_NAMES))
        std = np.where(std == 0.0, 1.0, std)
        bins = (
            None
            if option is DataOption.NO_SEC
            else fit_financial_bins(corpus, rate=discount_rate)
        )
        schema = FeatureSchema(
            columns=_build_columns(grams, option, bins),
            grams=grams,
            gram_idf=idf,
            numeric_mean=mean,
            numeric_std=std,
            option=option,
            bins=bins,
        )
    else:
        if option is not schema.option:
            raise ValueError(
                f"schema was fitted with data option {schema.option.value!r}, got {option.value!r}"
            )
        textual, numeric = _raw_parts(
            corpus, schema.grams, schema.gram_idf, graph, litigated_ids, scores, counters
        )
    parts = [textual, (numeric - schema.numeric_mean) / schema.numeric_std]
    if schema.option is not DataOption.NO_SEC:
        parts.append(_one_hot(corpus, schema.bins))
    values = np.concatenate(parts, axis=1) if len(corpus) else np.zeros((0, schema.width()))
    assert values.shape[1] == schema.width()
    return FeatureMatrix(values, corpus.ids()), schema
