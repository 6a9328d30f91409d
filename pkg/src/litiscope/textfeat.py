"""Claim-text n-gram features: tokenization, tf-idf, information gain.

Textual features are tf-idf weights over a vocabulary of word 1/2/3-grams
drawn from claim text. The top k grams are chosen by information gain of
the gram's presence/absence against the litigation labels.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import xlogy

GRAM_ORDERS = (1, 2, 3)

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs. No stemming, no stopwords."""
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


def tokenize_ngrams(text: str) -> list[str]:
    """All contiguous 1-, 2-, and 3-grams of the token stream, in order."""
    tokens = tokenize(text)
    grams: list[str] = []
    for order in GRAM_ORDERS:
        for i in range(len(tokens) - order + 1):
            grams.append(" ".join(tokens[i : i + order]))
    return grams


def gram_counter(text: str) -> Counter:
    return Counter(tokenize_ngrams(text))


def _texts(docs: Iterable) -> list[str]:
    return [getattr(d, "claims_text", d) for d in docs]


@dataclass(frozen=True)
class Vocabulary:
    grams: tuple[str, ...]
    df: np.ndarray
    n_docs: int

    def __post_init__(self) -> None:
        assert len(self.grams) == len(self.df)

    def index(self) -> dict[str, int]:
        return {g: i for i, g in enumerate(self.grams)}

    def idf(self) -> np.ndarray:
        return np.log(self.n_docs / self.df.astype(float))


def build_vocabulary(docs: Iterable, min_df: int = 2) -> Vocabulary:
    """Collect grams over the corpus; grams seen in fewer than min_df docs drop."""
    texts = _texts(docs)
    df_map: Counter = Counter()
    for text in texts:
        df_map.update(set(tokenize_ngrams(text)))
    grams = tuple(sorted(g for g, c in df_map.items() if c >= min_df))
    df = np.array([df_map[g] for g in grams], dtype=np.int64)
    return Vocabulary(grams, df, n_docs=len(texts))


@dataclass(frozen=True)
class DocTermMatrix:
    values: np.ndarray
    grams: tuple[str, ...]


def tfidf_matrix(docs: Iterable, vocab: Vocabulary) -> DocTermMatrix:
    """Dense tf-idf matrix in corpus order. tf is the raw in-document count."""
    texts = _texts(docs)
    index = vocab.index()
    idf = vocab.idf()
    values = np.zeros((len(texts), len(vocab.grams)))
    for row, text in enumerate(texts):
        for gram, count in gram_counter(text).items():
            col = index.get(gram)
            if col is not None:
                values[row, col] = count * idf[col]
    return DocTermMatrix(values, vocab.grams)


@dataclass(frozen=True)
class TextFeatureSet:
    grams: tuple[str, ...]
    gains: tuple[float, ...]
    degenerate: bool = False

    def __post_init__(self) -> None:
        assert len(self.grams) == len(self.gains)


def binary_entropy(p: np.ndarray | float) -> np.ndarray | float:
    """Entropy in bits of a Bernoulli(p); xlogy keeps the p∈{0,1} ends at 0."""
    p = np.asarray(p, dtype=float)
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / np.log(2.0)


def information_gain(presence: np.ndarray, labels: np.ndarray) -> float:
    """IG in bits of a single presence column against boolean labels."""
    presence = np.asarray(presence, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    return float(_gain_from_counts(
        np.array([presence.sum()]),
        np.array([(presence & labels).sum()]),
        n=labels.size,
        n_pos=int(labels.sum()),
    )[0])


def _gain_from_counts(df: np.ndarray, df_pos: np.ndarray, n: int, n_pos: int) -> np.ndarray:
    """Vectorized presence/absence IG from document counts per gram."""
    df = df.astype(float)
    df_pos = df_pos.astype(float)
    absent = n - df
    absent_pos = n_pos - df_pos
    h_root = binary_entropy(n_pos / n)
    # df = 0 implies df_pos = 0, so the guarded ratio is 0 and its entropy 0.
    h_present = binary_entropy(df_pos / np.maximum(df, 1.0))
    h_absent = binary_entropy(absent_pos / np.maximum(absent, 1.0))
    gain = h_root - (df / n) * h_present - (absent / n) * h_absent
    # Float cancellation can land a hair below zero; clamp.
    return np.maximum(gain, 0.0)


def _rank_top(grams: Sequence[str], gains: np.ndarray, k: int) -> tuple[tuple[str, ...], tuple[float, ...]]:
    order = sorted(range(len(grams)), key=lambda i: (-gains[i], grams[i]))[:k]
    return tuple(grams[i] for i in order), tuple(float(gains[i]) for i in order)


def select_top_textual(matrix: DocTermMatrix, labels: Sequence[bool], k: int) -> TextFeatureSet:
    """Top-k grams by presence/absence information gain against the labels.

    Presence is read off the matrix as a nonzero tf-idf weight. A gram
    occurring in every document has an all-zero column and so reads as
    all-absent, but its gain is 0 under either reading, so the ranking is
    unaffected. Ties break lexicographically.
    """
    labels_arr = np.asarray(labels, dtype=bool)
    if labels_arr.size != matrix.values.shape[0]:
        raise ValueError("labels length must match matrix row count")
    if k < 1:
        raise ValueError("k must be >= 1")
    n_pos = int(labels_arr.sum())
    if n_pos in (0, labels_arr.size):
        grams, gains = _rank_top(matrix.grams, np.zeros(len(matrix.grams)), k)
        return TextFeatureSet(grams, gains, degenerate=True)
    presence = matrix.values > 0
    df = presence.sum(axis=0)
    df_pos = (presence & labels_arr[:, None]).sum(axis=0)
    gains_all = _gain_from_counts(df, df_pos, n=labels_arr.size, n_pos=n_pos)
    grams, gains = _rank_top(matrix.grams, gains_all, k)
    return TextFeatureSet(grams, gains, degenerate=bool(np.all(gains_all == 0)))


def select_top_from_counters(
    counters: Sequence[Mapping[str, int]],
    labels: Sequence[bool],
    k: int,
    min_df: int = 2,
) -> tuple[TextFeatureSet, np.ndarray]:
    """Selection without materializing a document-term matrix.

    Equivalent to build_vocabulary + tfidf_matrix + select_top_textual but
    driven by per-document gram counters, which the pipeline caches per
    record. Returns the feature set and the idf value for each kept gram.
    """
    labels_arr = np.asarray(labels, dtype=bool)
    if labels_arr.size != len(counters):
        raise ValueError("labels length must match counter count")
    n = labels_arr.size
    df_map: Counter = Counter()
    pos_map: Counter = Counter()
    for counter, lab in zip(counters, labels_arr):
        df_map.update(counter.keys())
        if lab:
            pos_map.update(counter.keys())
    grams = sorted(g for g, c in df_map.items() if c >= min_df)
    df = np.array([df_map[g] for g in grams], dtype=np.int64)
    n_pos = int(labels_arr.sum())
    if n_pos in (0, n) or not grams:
        top_grams, gains = _rank_top(grams, np.zeros(len(grams)), k)
        fset = TextFeatureSet(top_grams, gains, degenerate=True)
    else:
        df_pos = np.array([pos_map.get(g, 0) for g in grams], dtype=np.int64)
        gains_all = _gain_from_counts(df, df_pos, n=n, n_pos=n_pos)
        top_grams, gains = _rank_top(grams, gains_all, k)
        fset = TextFeatureSet(top_grams, gains, degenerate=bool(np.all(gains_all == 0)))
    df_by_gram = {g: df_map[g] for g in fset.grams}
    idf = np.array([np.log(n / df_by_gram[g]) for g in fset.grams]) if fset.grams else np.zeros(0)
    return fset, idf


def tfidf_features(
    counters: Sequence[Mapping[str, int]],
    grams: Sequence[str],
    idf: np.ndarray,
) -> np.ndarray:
    """tf-idf columns for a fixed gram list (schema transform path)."""
    out = np.zeros((len(counters), len(grams)))
    for row, counter in enumerate(counters):
        for col, gram in enumerate(grams):
            count = counter.get(gram, 0)
            if count:
                out[row, col] = count * idf[col]
    return out
