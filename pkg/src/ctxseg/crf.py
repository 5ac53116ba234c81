"""Gibbs-energy assembly over regions and fusion-move minimization.

Unary costs are negative log-probabilities from a linear one-vs-rest
max-margin classifier trained on the annotated regions. Pairwise costs come
from predicted link scores: a pair of regions assigned classes (m, n) costs

    lambda_pair * (exp(-S(i, m, j, n)^2 / (2 beta)) - 1)

where beta is the mean squared stored link score. The -1 shift zeroes the
no-link cost; it subtracts the same constant from every labeling for each
instantiated pair, so minimizers are unchanged relative to the unshifted
cost, and pairs without any link score can be omitted entirely.

Inference sweeps expansion proposals (every region offered one class) and
accepts each move through a QPBO fusion step, which never increases the
energy. ``brute_force_oracle`` enumerates labelings exactly on small
instances so inference quality is measurable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .propagation import LinkScoreMatrix
from .qpbo import solve_binary_pairwise
from .regions import VideoSequence

log = logging.getLogger(__name__)

P_FLOOR = 1e-6
BRUTE_FORCE_LIMIT = 10 ** 7


@dataclass
class UnaryTrainConfig:
    epochs: int = 100
    learning_rate: float = 0.5
    lambda_reg: float = 1e-4
    seed: int = 0


@dataclass
class UnaryModel:
    """One linear scorer per class; probabilities via softmax over margins."""

    weights: np.ndarray  # (L, d)
    biases: np.ndarray   # (L,)
    config: UnaryTrainConfig

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def margins(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights.T + self.biases

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        m = self.margins(features)
        m -= m.max(axis=1, keepdims=True)
        e = np.exp(m)
        return e / e.sum(axis=1, keepdims=True)


def train_unary(labeled: Mapping[int, int], seq: VideoSequence,
                cfg: Optional[UnaryTrainConfig] = None,
                num_classes: Optional[int] = None) -> UnaryModel:
    """Train one-vs-rest hinge-loss linear classifiers by seeded SGD.

    Every class in [0, num_classes) needs at least one example; missing
    classes raise ValueError. Identical seeds give bitwise-identical weights.
    """
    cfg = cfg or UnaryTrainConfig()
    ids = sorted(labeled)
    if not ids:
        raise ValueError("no labeled regions to train on")
    X = np.stack([seq.region(rid).feature for rid in ids])
    y = np.array([labeled[rid] for rid in ids])
    L = num_classes if num_classes is not None else int(y.max()) + 1

    missing = [c for c in range(L) if not np.any(y == c)]
    if missing:
        raise ValueError(f"classes without training examples: {missing}")
    if len(ids) > 1 and np.allclose(X, X[0]):
        log.warning("all training features are identical; unary model is degenerate")

    d = X.shape[1]
    weights = np.zeros((L, d))
    biases = np.zeros(L)
    for c in range(L):
        rng = np.random.default_rng([cfg.seed, c])
        t = np.where(y == c, 1.0, -1.0)
        w = np.zeros(d)
        b = 0.0
        step = 0
        for _ in range(cfg.epochs):
            for i in rng.permutation(len(ids)):
                eta = cfg.learning_rate / (1.0 + cfg.learning_rate * cfg.lambda_reg * step)
                step += 1
                decay = 1.0 - eta * cfg.lambda_reg
                if t[i] * (w @ X[i] + b) < 1.0:
                    w = decay * w + eta * t[i] * X[i]
                    b = b + eta * t[i]
                else:
                    w = decay * w
        weights[c] = w
        biases[c] = b
    return UnaryModel(weights, biases, cfg)


def unary_potentials(model: UnaryModel, seq: VideoSequence,
                     p_floor: float = P_FLOOR) -> np.ndarray:
    """Negative log-likelihood table (n, L), probabilities floored at p_floor."""
    probs = model.probabilities(seq.feature_matrix())
    return -np.log(np.maximum(probs, p_floor))


def beta_adaptive(scores: Mapping[tuple[int, int], LinkScoreMatrix]) -> float:
    """Mean squared stored link score across all class pairs; 1.0 if none."""
    chunks = [m.scores.data for m in scores.values() if m.scores.nnz]
    if not chunks:
        return 1.0
    data = np.concatenate(chunks)
    return float(np.mean(data ** 2))


def build_pairwise(scores: Mapping[tuple[int, int], LinkScoreMatrix], beta: float,
                   lambda_pair: float, num_classes: int,
                   ) -> dict[tuple[int, int], np.ndarray]:
    """Per-region-pair L x L cost tables from link scores.

    A table exists for every unordered region pair (a < b) carrying at least
    one nonzero score in some class pair; entry [m, n] reads the (a, b) score
    of class pair (m, n). Diagonal score entries (i == j) are ignored.
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    entries: dict[tuple[int, int], dict[tuple[int, int], float]] = {}
    pair_keys: set[tuple[int, int]] = set()
    for (m, n), mat in scores.items():
        coo = mat.scores.tocoo()
        cell = {}
        for i, j, v in zip(coo.row, coo.col, coo.data):
            if i == j:
                continue
            cell[(int(i), int(j))] = float(v)
            pair_keys.add((min(int(i), int(j)), max(int(i), int(j))))
        entries[(m, n)] = cell

    tables: dict[tuple[int, int], np.ndarray] = {}
    for a, b in sorted(pair_keys):
        tbl = np.zeros((num_classes, num_classes))
        for (m, n), cell in entries.items():
            s = cell.get((a, b))
            if s is not None:
                tbl[m, n] = lambda_pair * (np.exp(-(s * s) / (2.0 * beta)) - 1.0)
        tables[(a, b)] = tbl
    return tables


@dataclass
class CrfProblem:
    unary: np.ndarray                                 # (n, L) costs
    pairwise: dict[tuple[int, int], np.ndarray]       # (a, b) a < b -> (L, L)
    beta: float = 1.0
    lambda_pair: float = 1.0

    @property
    def n(self) -> int:
        return self.unary.shape[0]

    @property
    def num_classes(self) -> int:
        return self.unary.shape[1]


@dataclass
class Labeling:
    assignment: np.ndarray
    energy: float
    sweeps: int = 0
    energy_trace: list[float] = field(default_factory=list)


def energy(problem: CrfProblem, x: np.ndarray) -> float:
    """Total cost of a labeling; each stored pair counted once."""
    x = np.asarray(x)
    e = float(problem.unary[np.arange(problem.n), x].sum())
    for (a, b), tbl in problem.pairwise.items():
        e += float(tbl[x[a], x[b]])
    return e


def qpbo_fuse(problem: CrfProblem, current: np.ndarray,
              proposal: np.ndarray) -> np.ndarray:
    """Best per-region choice between two labelings via QPBO.

    Variables whose two options coincide are fixed up front; variables QPBO
    leaves undecided keep their current label, so the fused labeling never
    has higher energy than ``current``.
    """
    current = np.asarray(current)
    proposal = np.asarray(proposal)
    free = np.flatnonzero(current != proposal)
    if free.size == 0:
        return current.copy()
    pos = {int(v): k for k, v in enumerate(free)}

    unary = np.stack([problem.unary[free, current[free]],
                      problem.unary[free, proposal[free]]], axis=1)
    pairwise: dict[tuple[int, int], np.ndarray] = {}
    for (a, b), tbl in problem.pairwise.items():
        oa = (current[a], proposal[a])
        ob = (current[b], proposal[b])
        fa, fb = a in pos, b in pos
        if fa and fb:
            t = np.array([[tbl[oa[za], ob[zb]] for zb in (0, 1)] for za in (0, 1)])
            key = (pos[a], pos[b])
            if key in pairwise:
                pairwise[key] = pairwise[key] + t
            else:
                pairwise[key] = t
        elif fa:
            unary[pos[a], 0] += tbl[oa[0], ob[0]]
            unary[pos[a], 1] += tbl[oa[1], ob[0]]
        elif fb:
            unary[pos[b], 0] += tbl[oa[0], ob[0]]
            unary[pos[b], 1] += tbl[oa[0], ob[1]]

    z = solve_binary_pairwise(unary, pairwise)
    fused = current.copy()
    take = free[z == 1]
    fused[take] = proposal[take]
    return fused


def infer(problem: CrfProblem, max_sweeps: int = 10,
          seed: Optional[int] = None) -> Labeling:
    """Expansion sweeps fused by QPBO, from the unary-argmin labeling.

    Each sweep offers every class as a constant proposal in order; a fuse is
    kept only when it strictly lowers the energy, and sweeping stops after a
    full pass without improvement or ``max_sweeps``. ``seed`` is accepted for
    config plumbing; the sweep schedule is deterministic and ignores it.
    """
    x = np.argmin(problem.unary, axis=1)
    e = energy(problem, x)
    trace = [e]
    sweeps_done = 0
    for _ in range(max_sweeps):
        improved = False
        for alpha in range(problem.num_classes):
            proposal = np.full(problem.n, alpha)
            x_new = qpbo_fuse(problem, x, proposal)
            e_new = energy(problem, x_new)
            if e_new > e + 1e-9:
                raise AssertionError(
                    f"fusion increased energy: {e} -> {e_new} (alpha={alpha})")
            if e_new < e:
                x, e = x_new, e_new
                improved = True
            trace.append(e)
        sweeps_done += 1
        if not improved:
            break
    return Labeling(x, e, sweeps_done, trace)


def brute_force_oracle(problem: CrfProblem) -> Labeling:
    """Exact minimizer by chunked enumeration of all L^n labelings.

    Ties resolve to the lexicographically smallest labeling. Refuses
    instances with more than 10^7 labelings.
    """
    n, L = problem.n, problem.num_classes
    total = L ** n
    if total > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large for enumeration: {L}^{n} labelings")
    radix = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
    pairs = list(problem.pairwise.items())
    best_e = np.inf
    best_idx = -1
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        labelings = (idx[:, None] // radix[None, :]) % L
        e = problem.unary[np.arange(n)[None, :], labelings].sum(axis=1)
        for (a, b), tbl in pairs:
            e += tbl[labelings[:, a], labelings[:, b]]
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e = float(e[k])
            best_idx = int(idx[k])
    assignment = (best_idx // radix) % L
    return Labeling(assignment.astype(int), best_e)
