"""Symmetric k-NN affinity graph over regions and its normalized operator.

Edge weights are inner products of the (unit-norm) region features, clamped
to be nonnegative. The propagation operator is the degree-normalized
affinity D^{-1/2} W D^{-1/2}, whose spectrum lies in [-1, 1].
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .regions import VideoSequence

log = logging.getLogger(__name__)


@dataclass
class SimilarityGraph:
    n: int
    k: int
    affinity: sparse.csr_matrix      # W, symmetric, zero diagonal
    degrees: np.ndarray              # row sums of W
    operator: sparse.csr_matrix      # D^{-1/2} W D^{-1/2}


def _assemble(n: int, k: int, edges: list[tuple[int, int, float]]) -> SimilarityGraph:
    """Build W and its normalized operator from undirected edges (i < j).

    Both matrix entries of an edge are written from the same scalar, so W and
    the operator are exactly symmetric.
    """
    edges = sorted(edges)
    if edges:
        ii = np.array([e[0] for e in edges], dtype=np.int64)
        jj = np.array([e[1] for e in edges], dtype=np.int64)
        ww = np.array([e[2] for e in edges], dtype=np.float64)
        rows = np.concatenate([ii, jj])
        cols = np.concatenate([jj, ii])
        data = np.concatenate([ww, ww])
        W = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    else:
        W = sparse.csr_matrix((n, n))
    degrees = np.asarray(W.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        dinv = 1.0 / np.sqrt(degrees)
    dinv[~np.isfinite(dinv)] = 0.0
    if edges:
        lv = ww * dinv[ii] * dinv[jj]
        L = sparse.csr_matrix((np.concatenate([lv, lv]), (rows, cols)), shape=(n, n))
    else:
        L = sparse.csr_matrix((n, n))
    return SimilarityGraph(n=n, k=k, affinity=W, degrees=degrees, operator=L)


def build_knn_graph(seq: VideoSequence, k: int) -> SimilarityGraph:
    """k-nearest-neighbor similarity graph over all regions of a sequence.

    Each vertex proposes edges to its k largest-inner-product neighbors
    (ties at the cutoff go to the smaller vertex index); the edge set is the
    union of the directed proposals. Negative inner products are clamped to
    zero and zero-weight edges are dropped, so degenerate (all-zero) features
    end up isolated.
    """
    n = seq.n
    if n < 2:
        raise ValueError(f"need at least 2 regions to build a graph, got {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        log.warning("k=%d >= n=%d; truncating to %d", k, n, n - 1)
        k = n - 1

    F = seq.feature_matrix()
    G = F @ F.T
    np.clip(G, 0.0, 1.0, out=G)  # unit features: products in [-1, 1] up to rounding
    np.fill_diagonal(G, -1.0)  # exclude self from the top-k search

    chosen: set[tuple[int, int]] = set()
    idx = np.arange(n)
    for i in range(n):
        row = G[i]
        order = np.lexsort((idx, -row))  # value desc, then smaller index
        for j in order[:k]:
            if row[j] <= 0.0:
                continue
            chosen.add((min(i, int(j)), max(i, int(j))))

    edges = [(a, b, float(max(G[a, b], G[b, a]))) for a, b in chosen]
    return _assemble(n, k, edges)


def normalized_operator(W: sparse.spmatrix) -> sparse.csr_matrix:
    """D^{-1/2} W D^{-1/2} for a symmetric nonnegative W with zero diagonal.

    Rows and columns of isolated vertices (zero degree) stay all zero.
    """
    W = W.tocsr()
    n = W.shape[0]
    coo = sparse.triu(W, k=1).tocoo()
    edges = [(int(i), int(j), float(v)) for i, j, v in zip(coo.row, coo.col, coo.data)]
    return _assemble(n, 0, edges).operator


def dump_graph(graph: SimilarityGraph, path) -> None:
    """Write ``{"n":, "k":, "edges": [[i, j, w]...]}`` sorted by (i, j)."""
    coo = sparse.triu(graph.affinity, k=1).tocoo()
    edges = sorted(
        [int(i), int(j), float(v)] for i, j, v in zip(coo.row, coo.col, coo.data))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"n": graph.n, "k": graph.k, "edges": edges}, fh)
        fh.write("\n")


def load_graph(path) -> SimilarityGraph:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    edges = [(int(i), int(j), float(w)) for i, j, w in doc["edges"]]
    return _assemble(int(doc["n"]), int(doc.get("k", 0)), edges)
