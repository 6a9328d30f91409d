"""Citation graph, PageRank, and reference-derived numeric features.

Edges point citing -> cited. PageRank mass flows along edges, so a patent
referenced by many others accumulates score. Referenced ids that never
appear as corpus records become external nodes: they participate in the
walk but have no outgoing edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, PatentRecord
from .errors import ConvergenceError

DAMPING = 0.85
# L1 residual stop; the fixed-point error is about d/(1-d) times the final
# residual, so 1e-10 here keeps every node well inside 1e-8 of the limit.
PAGERANK_TOL = 1e-10
PAGERANK_MAX_ITER = 1000


@dataclass(frozen=True, eq=False)
class CitationGraph:
    ids: tuple[str, ...]
    n_internal: int
    out_indptr: np.ndarray
    out_indices: np.ndarray
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        self._index.update({pid: i for i, pid in enumerate(self.ids)})

    def __len__(self) -> int:
        return len(self.ids)

    def index(self) -> Mapping[str, int]:
        return self._index

    def is_external(self, node: int) -> bool:
        return node >= self.n_internal

    def out_neighbors(self, node: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[node] : self.out_indptr[node + 1]]

    def n_edges(self) -> int:
        return int(self.out_indices.size)


def build_graph(corpus: Corpus) -> CitationGraph:
    """One node per corpus record plus one per unknown referenced id."""
    internal = [r.id for r in corpus.records]
    internal_set = set(internal)
    external = sorted(
        {ref for r in corpus.records for ref in r.backward_refs} - internal_set
    )
    ids = tuple(internal + external)
    index = {pid: i for i, pid in enumerate(ids)}

    n = len(ids)
    indptr = np.zeros(n + 1, dtype=np.int64)
    chunks: list[np.ndarray] = []
    for i, record in enumerate(corpus.records):
        # Loader already deduplicates and drops self-references, but the
        # graph invariant must not rely on that.
        targets = sorted({index[ref] for ref in record.backward_refs} - {i})
        chunks.append(np.asarray(targets, dtype=np.int64))
        indptr[i + 1] = indptr[i] + len(targets)
    indptr[len(internal) + 1 :] = indptr[len(internal)]
    indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return CitationGraph(ids, len(internal), indptr, indices)


def pagerank(
    graph: CitationGraph,
    damping: float = DAMPING,
    tol: float = PAGERANK_TOL,
    max_iter: int = PAGERANK_MAX_ITER,
    reverse: bool = False,
) -> np.ndarray:
    """Power iteration over the citation graph; returns scores per node.

    Dangling mass (nodes with no outgoing edges) is spread uniformly.
    ``reverse`` flips every edge before iterating.
    """
    n = len(graph)
    if n == 0:
        raise ValueError("pagerank needs a nonempty graph")
    src = np.repeat(np.arange(n), np.diff(graph.out_indptr))
    dst = graph.out_indices
    if reverse:
        src, dst = dst, src
    out_deg = np.bincount(src, minlength=n).astype(float)
    weights = 1.0 / out_deg[src]
    matrix = sp.csr_matrix((weights, (dst, src)), shape=(n, n))
    dangling = out_deg == 0

    rank = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        spread = rank[dangling].sum() / n
        new_rank = damping * (matrix @ rank + spread) + (1.0 - damping) / n
        residual = float(np.abs(new_rank - rank).sum())
        rank = new_rank
        if residual < tol:
            return rank
    raise ConvergenceError(
        f"pagerank did not converge in {max_iter} iterations (residual {residual:.3e})"
    )


@dataclass(frozen=True)
class RefFeatures:
    n_backward: int
    n_backward_2nd: int
    n_lit_backward: int
    n_lit_backward_2nd: int
    avg_pagerank_backward: float

    def as_array(self) -> np.ndarray:
        return np.array([
            self.n_backward,
            self.n_backward_2nd,
            self.n_lit_backward,
            self.n_lit_backward_2nd,
            self.avg_pagerank_backward,
        ])


def _second_layer(graph: CitationGraph, origin: int, backward: np.ndarray) -> np.ndarray:
    if backward.size == 0:
        return backward
    second = np.unique(np.concatenate([graph.out_neighbors(b) for b in backward]))
    # Distinct patents two hops out, not the origin, not already first layer.
    mask = ~np.isin(second, backward)
    second = second[mask]
    return second[second != origin]


def ref_features(
    graph: CitationGraph,
    litigated_ids: AbstractSet[str],
    patent_id: str,
    scores: np.ndarray | None = None,
) -> RefFeatures:
    """Table-style reference features for a patent already in the graph."""
    try:
        node = graph.index()[patent_id]
    except KeyError:
        raise KeyError(f"unknown patent id {patent_id!r}")
    if scores is None:
        scores = pagerank(graph)
    backward = graph.out_neighbors(node)
    second = _second_layer(graph, node, backward)
    lit_flags = np.array([graph.ids[b] in litigated_ids for b in backward], dtype=bool)
    lit_flags_2nd = np.array([graph.ids[s] in litigated_ids for s in second], dtype=bool)
    avg = float(scores[backward].mean()) if backward.size else 0.0
    return RefFeatures(
        n_backward=int(backward.size),
        n_backward_2nd=int(second.size),
        n_lit_backward=int(lit_flags.sum()),
        n_lit_backward_2nd=int(lit_flags_2nd.sum()),
        avg_pagerank_backward=avg,
    )


def record_ref_features(
    record: PatentRecord,
    graph: CitationGraph,
    litigated_ids: AbstractSet[str],
    scores: np.ndarray,
) -> RefFeatures:
    """Reference features for a record that may be absent from the graph.

    Used to featurize held-out records against a training-fold graph:
    counts come from the record's own reference list; graph lookups cover
    whatever subset of those ids the training graph knows. References
    missing from the graph contribute a PageRank of 0 but still count in
    the averaging denominator.
    """
    index = graph.index()
    node = index.get(record.id)
    if node is not None:
        return ref_features(graph, litigated_ids, record.id, scores)
    refs = record.backward_refs
    known = np.array(
        sorted({index[r] for r in refs if r in index}), dtype=np.int64
    )
    second = _second_layer(graph, -1, known)
    lit_2nd = sum(1 for s in second if graph.ids[s] in litigated_ids)
    avg = float(scores[known].sum() / len(refs)) if refs else 0.0
    return RefFeatures(
        n_backward=len(refs),
        n_backward_2nd=int(second.size),
        n_lit_backward=sum(1 for r in refs if r in litigated_ids),
        n_lit_backward_2nd=lit_2nd,
        avg_pagerank_backward=avg,
    )
