"""Context exemplars from labeled regions and their observed link matrices.

An exemplar is an ordered pair of labeled regions asserting that the first
region's class supports the second's. Exemplars are grouped by ordered class
pair (m, n) into sparse binary N x N matrices, indexed by vertex position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import AbstractSet, Mapping

from scipy import sparse

from .regions import VideoSequence

BACKGROUND = 0


@dataclass(frozen=True)
class LabelPairIndex:
    """Ordered class pair (m, n) with its linearized position m * L + n."""

    m: int
    n: int
    num_classes: int

    def __post_init__(self):
        if not (0 <= self.m < self.num_classes and 0 <= self.n < self.num_classes):
            raise ValueError(f"class pair ({self.m}, {self.n}) out of range "
                             f"for {self.num_classes} classes")

    @property
    def linear(self) -> int:
        return self.m * self.num_classes + self.n

    @classmethod
    def from_linear(cls, index: int, num_classes: int) -> "LabelPairIndex":
        return cls(index // num_classes, index % num_classes, num_classes)


@dataclass
class ContextExemplarSet:
    """Ordered (vertex_i, vertex_j, class_m, class_n) tuples."""

    exemplars: list[tuple[int, int, int, int]]

    def __len__(self) -> int:
        return len(self.exemplars)

    def class_pairs(self) -> set[tuple[int, int]]:
        return {(m, n) for _, _, m, n in self.exemplars}


def extract_exemplars(labels: Mapping[int, int], frames: AbstractSet[int],
                      seq: VideoSequence, temporal_window: int = 0,
                      include_bg_pairs: bool = False) -> ContextExemplarSet:
    """All ordered pairs of distinct labeled regions within the frame window.

    ``labels`` maps region ids (of regions in annotated frames) to classes.
    Pairs of two background regions are skipped unless ``include_bg_pairs``.
    """
    by_frame: dict[int, list[tuple[int, int]]] = {}  # frame -> [(vertex, class)]
    for rid in sorted(labels):
        r = seq.region(rid)
        if r.frame not in frames:
            continue
        by_frame.setdefault(r.frame, []).append((seq.index_of(rid), labels[rid]))

    out: list[tuple[int, int, int, int]] = []
    frame_list = sorted(by_frame)
    for fa in frame_list:
        for fb in frame_list:
            if abs(fa - fb) > temporal_window:
                continue
            for i, ci in by_frame[fa]:
                for j, cj in by_frame[fb]:
                    if i == j:
                        continue
                    if ci == BACKGROUND and cj == BACKGROUND and not include_bg_pairs:
                        continue
                    out.append((i, j, ci, cj))
    return ContextExemplarSet(out)


def build_observed_links(ex: ContextExemplarSet, n: int,
                         num_classes: int) -> dict[tuple[int, int], sparse.csr_matrix]:
    """One sparse binary matrix per ordered class pair that has exemplars.

    Entry (i, j) is 1 when the exemplar set contains (v_i, v_j, c_m, c_n);
    repeated exemplars collapse to a single entry. Class pairs without
    exemplars are absent (implicit zero matrices).
    """
    cells: dict[tuple[int, int], set[tuple[int, int]]] = {}
    for i, j, m, n_cls in ex.exemplars:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"exemplar vertex ({i}, {j}) out of range for n={n}")
        if not (0 <= m < num_classes and 0 <= n_cls < num_classes):
            raise ValueError(f"exemplar classes ({m}, {n_cls}) out of range")
        if i == j:
            raise ValueError("exemplar must pair two distinct regions")
        cells.setdefault((m, n_cls), set()).add((i, j))

    out: dict[tuple[int, int], sparse.csr_matrix] = {}
    for pair in sorted(cells):
        ij = sorted(cells[pair])
        rows = [e[0] for e in ij]
        cols = [e[1] for e in ij]
        out[pair] = sparse.csr_matrix(([1.0] * len(ij), (rows, cols)), shape=(n, n))
    return out


def dump_links(links: Mapping[tuple[int, int], sparse.spmatrix], path) -> None:
    """One JSON line per class pair: ``{"m":, "n":, "links": [[i, j]...]}``."""
    with open(path, "w", encoding="utf-8") as fh:
        for (m, n_cls) in sorted(links):
            coo = links[(m, n_cls)].tocoo()
            ij = sorted([int(i), int(j)] for i, j in zip(coo.row, coo.col))
            fh.write(json.dumps({"m": m, "n": n_cls, "links": ij}) + "\n")


def load_links(path, n: int) -> dict[tuple[int, int], sparse.csr_matrix]:
    out: dict[tuple[int, int], sparse.csr_matrix] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            ij = rec["links"]
            rows = [int(e[0]) for e in ij]
            cols = [int(e[1]) for e in ij]
            out[(int(rec["m"]), int(rec["n"]))] = sparse.csr_matrix(
                ([1.0] * len(ij), (rows, cols)), shape=(n, n))
    return dict(sorted(out.items()))
