"""End-to-end orchestration: one config object and one function per stage.

Every stage consumes and produces the plain data types of the owning
modules, so the CLI can run the pipeline in memory or as file-chained
subcommands with identical results. All randomness derives from the single
``seed`` via stable per-stage hashes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from scipy import sparse

from . import context as ctx
from . import crf, evaluation, graph, propagation, tracking
from .regions import VideoSequence, filter_detections


def stage_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage sub-seed from the global seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PipelineConfig:
    k: int = 20
    mu: float = 0.99
    tol: float = 1e-6
    max_iters: int = 1000
    det_threshold: float = 0.5
    iou_threshold: float = 0.5
    min_instances: int = 3
    max_miss: int = 5
    rho: float = 0.5
    temporal_window: int = 0
    include_bg_pairs: bool = False
    lambda_pair: float = 1.0
    p_floor: float = 1e-6
    prune_eps: float = 1e-8
    epochs: int = 100
    learning_rate: float = 0.5
    lambda_reg: float = 1e-4
    max_sweeps: int = 10
    seed: int = 0
    threads: int = 1
    no_context: bool = False
    literal_alg1: bool = False

    def validate(self) -> None:
        """Range-check every field against its owning module's contract."""
        checks = [
            (self.k >= 1, "k must be >= 1"),
            (0.0 < self.mu < 1.0, "mu must lie in (0, 1)"),
            (self.tol > 0.0, "tol must be positive"),
            (self.max_iters >= 1, "max_iters must be >= 1"),
            (0.0 <= self.det_threshold <= 1.0, "det_threshold must lie in [0, 1]"),
            (0.0 <= self.iou_threshold <= 1.0, "iou_threshold must lie in [0, 1]"),
            (self.min_instances >= 1, "min_instances must be >= 1"),
            (self.max_miss >= 1, "max_miss must be >= 1"),
            (0.0 < self.rho <= 1.0, "rho must lie in (0, 1]"),
            (self.temporal_window >= 0, "temporal_window must be >= 0"),
            (self.lambda_pair >= 0.0, "lambda_pair must be >= 0"),
            (self.p_floor > 0.0, "p_floor must be positive"),
            (self.prune_eps >= 0.0, "prune_eps must be >= 0"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.learning_rate > 0.0, "learning_rate must be positive"),
            (self.lambda_reg >= 0.0, "lambda_reg must be >= 0"),
            (self.max_sweeps >= 1, "max_sweeps must be >= 1"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def propagation_config(self) -> propagation.PropagationConfig:
        return propagation.PropagationConfig(
            mu=self.mu, tol=self.tol, max_iters=self.max_iters,
            prune_eps=self.prune_eps, literal_update=self.literal_alg1)

    def unary_config(self) -> crf.UnaryTrainConfig:
        return crf.UnaryTrainConfig(
            epochs=self.epochs, learning_rate=self.learning_rate,
            lambda_reg=self.lambda_reg, seed=stage_seed(self.seed, "unary"))


def tracks_stage(seq: VideoSequence, cfg: PipelineConfig) -> list[tracking.TrajectoryHypothesis]:
    dets = filter_detections(seq, cfg.det_threshold)
    params = tracking.TrajectoryParams(
        frame_count=seq.frame_count, iou_threshold=cfg.iou_threshold,
        min_instances=cfg.min_instances, max_miss=cfg.max_miss)
    return tracking.associate_trajectories(dets, tracking.default_tracker(), params)


def labels_stage(seq: VideoSequence, hyps: list[tracking.TrajectoryHypothesis],
                 cfg: PipelineConfig) -> tuple[frozenset[int], dict[int, int]]:
    return tracking.annotated_frames(hyps, seq, cfg.rho)


def links_stage(seq: VideoSequence, frames: frozenset[int], labels: dict[int, int],
                cfg: PipelineConfig) -> dict[tuple[int, int], sparse.csr_matrix]:
    num_classes = max(labels.values(), default=0) + 1
    exemplars = ctx.extract_exemplars(
        labels, frames, seq, temporal_window=cfg.temporal_window,
        include_bg_pairs=cfg.include_bg_pairs)
    return ctx.build_observed_links(exemplars, seq.n, num_classes)


def graph_stage(seq: VideoSequence, cfg: PipelineConfig) -> graph.SimilarityGraph:
    return graph.build_knn_graph(seq, cfg.k)


def propagate_stage(links, g: graph.SimilarityGraph,
                    cfg: PipelineConfig) -> dict[tuple[int, int], propagation.LinkScoreMatrix]:
    return propagation.predict_all_links(links, g.operator,
                                         cfg.propagation_config(), threads=cfg.threads)


def crf_label_space(labels: dict[int, int], scores) -> int:
    """Classes the CRF can assign: those present in the annotated data."""
    classes = set(labels.values()) | {c for pair in scores for c in pair}
    return max(classes, default=0) + 1


def infer_stage(seq: VideoSequence, labels: dict[int, int], scores,
                cfg: PipelineConfig) -> tuple[dict[int, int], crf.Labeling]:
    num_classes = crf_label_space(labels, scores)
    model = crf.train_unary(labels, seq, cfg.unary_config(), num_classes=num_classes)
    unary = crf.unary_potentials(model, seq, p_floor=cfg.p_floor)
    if scores:
        beta = crf.beta_adaptive(scores)
        pairwise = crf.build_pairwise(scores, beta, cfg.lambda_pair, num_classes)
    else:
        beta, pairwise = 1.0, {}
    problem = crf.CrfProblem(unary, pairwise, beta=beta, lambda_pair=cfg.lambda_pair)
    labeling = crf.infer(problem, max_sweeps=cfg.max_sweeps,
                         seed=stage_seed(cfg.seed, "infer"))
    pred = {seq.regions[i].region_id: int(labeling.assignment[i]) for i in range(seq.n)}
    return pred, labeling


@dataclass
class PipelineResult:
    hypotheses: list[tracking.TrajectoryHypothesis]
    annotated: frozenset[int]
    labels: dict[int, int]
    graph: Optional[graph.SimilarityGraph]
    links: dict
    scores: dict
    prediction: dict[int, int]
    labeling: crf.Labeling
    report: Optional[evaluation.EvalReport] = None


def run_pipeline(seq: VideoSequence, cfg: PipelineConfig,
                 gt: Optional[dict[int, int]] = None) -> PipelineResult:
    """All stages in memory; context stages are skipped under ``no_context``."""
    hyps = tracks_stage(seq, cfg)
    frames, labels = labels_stage(seq, hyps, cfg)
    if cfg.no_context:
        g, links, scores = None, {}, {}
    else:
        g = graph_stage(seq, cfg)
        links = links_stage(seq, frames, labels, cfg)
        scores = propagate_stage(links, g, cfg)
    pred, labeling = infer_stage(seq, labels, scores, cfg)
    report = evaluation.iou_per_class(pred, gt, seq) if gt else None
    return PipelineResult(hyps, frames, labels, g, links, scores, pred,
                          labeling, report)
