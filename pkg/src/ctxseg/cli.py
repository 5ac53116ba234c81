"""Command-line entry point.

Subcommands run the pipeline stage by stage over JSON-lines files or end to
end; ``pipeline`` also writes every intermediate dump so a run is byte-for-
byte reproducible by chaining the individual stages. Config precedence is
built-in defaults, then ``--config`` JSON, then explicit flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Optional

from . import context as ctx
from . import evaluation, graph, pipeline, propagation, synthetic, tracking
from .pipeline import PipelineConfig
from .regions import (IngestConfig, load_ground_truth, load_labeling,
                      load_sequence, save_labeling, save_sequence)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with PipelineConfig fields")
    defaults = PipelineConfig()
    for f in dataclasses.fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        value = getattr(defaults, f.name)
        if isinstance(value, bool):
            parser.add_argument(flag, action="store_true", default=None,
                                help=f"(default {value})")
        else:
            parser.add_argument(flag, type=type(value), default=None,
                                help=f"(default {value})")


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data.update(json.load(fh))
    cfg = PipelineConfig.from_dict(data)
    for f in dataclasses.fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    cfg.validate()
    return cfg


def _load_seq(args, need_detections=False):
    det = getattr(args, "detections", None)
    if need_detections and det is None:
        raise ValueError("--detections is required for this stage")
    return load_sequence(args.regions, det, IngestConfig())


def _cmd_synth(args, cfg: PipelineConfig) -> int:
    if args.scenario != "ambiguity":
        raise ValueError(f"unknown scenario {args.scenario!r}")
    spec = synthetic.ambiguity_scenario(seed=pipeline.stage_seed(cfg.seed, "synth"))
    seq, gt = synthetic.generate(spec)
    os.makedirs(args.out, exist_ok=True)
    save_sequence(seq, os.path.join(args.out, "regions.jsonl"),
                  os.path.join(args.out, "detections.jsonl"))
    save_labeling(gt, os.path.join(args.out, "gt.jsonl"))
    print(f"wrote {seq.n} regions, {len(seq.detections)} detections, "
          f"{seq.frame_count} frames to {args.out}")
    return 0


def _cmd_tracks(args, cfg: PipelineConfig) -> int:
    seq = _load_seq(args, need_detections=True)
    hyps = pipeline.tracks_stage(seq, cfg)
    tracking.dump_hypotheses(hyps, args.out)
    print(f"wrote {len(hyps)} trajectory hypotheses to {args.out}")
    return 0


def _cmd_graph(args, cfg: PipelineConfig) -> int:
    seq = _load_seq(args)
    g = pipeline.graph_stage(seq, cfg)
    graph.dump_graph(g, args.out)
    print(f"wrote graph with {g.n} vertices, {g.affinity.nnz // 2} edges to {args.out}")
    return 0


def _cmd_context(args, cfg: PipelineConfig) -> int:
    seq = _load_seq(args)
    hyps = tracking.load_hypotheses(args.hypotheses)
    frames, labels = pipeline.labels_stage(seq, hyps, cfg)
    links = pipeline.links_stage(seq, frames, labels, cfg)
    ctx.dump_links(links, args.out)
    save_labeling(labels, args.labels_out)
    print(f"wrote {len(links)} class-pair link matrices to {args.out}; "
          f"{len(labels)} region labels to {args.labels_out}")
    return 0


def _cmd_propagate(args, cfg: PipelineConfig) -> int:
    g = graph.load_graph(args.graph)
    links = ctx.load_links(args.links, g.n)
    scores = propagation.predict_all_links(
        links, g.operator, cfg.propagation_config(), threads=cfg.threads)
    propagation.dump_scores(scores, args.out)
    print(f"wrote scores for {len(scores)} class pairs to {args.out}")
    return 0


def _cmd_infer(args, cfg: PipelineConfig) -> int:
    seq = _load_seq(args)
    labels = load_labeling(args.labels)
    scores = propagation.load_scores(args.scores, seq.n) if args.scores else {}
    pred, labeling = pipeline.infer_stage(seq, labels, scores, cfg)
    summary = ({"energy": float(labeling.energy), "sweeps": labeling.sweeps}
               if args.summary else None)
    save_labeling(pred, args.out, summary=summary)
    print(f"wrote labeling for {len(pred)} regions to {args.out} "
          f"(energy {labeling.energy:.6f}, {labeling.sweeps} sweeps)")
    return 0


def _cmd_eval(args, cfg: PipelineConfig) -> int:
    pred = load_labeling(args.labeling)
    # no detections here: the label space is whatever the two maps mention
    num_classes = max([*pred.values(), *load_labeling(args.gt).values()],
                      default=0) + 1
    seq = load_sequence(args.regions, None, IngestConfig(class_count=num_classes))
    gt = load_ground_truth(args.gt, seq)
    report = evaluation.iou_per_class(pred, gt, seq)
    print(report.format_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    return 0


def _cmd_pipeline(args, cfg: PipelineConfig) -> int:
    seq = _load_seq(args, need_detections=True)
    gt = load_ground_truth(args.gt, seq) if args.gt else None
    result = pipeline.run_pipeline(seq, cfg, gt=gt)
    os.makedirs(args.out, exist_ok=True)
    tracking.dump_hypotheses(result.hypotheses, os.path.join(args.out, "hypotheses.jsonl"))
    save_labeling(result.labels, os.path.join(args.out, "labels.jsonl"))
    if result.graph is not None:
        graph.dump_graph(result.graph, os.path.join(args.out, "graph.json"))
        ctx.dump_links(result.links, os.path.join(args.out, "links.jsonl"))
        propagation.dump_scores(result.scores, os.path.join(args.out, "scores.jsonl"))
    save_labeling(result.prediction, os.path.join(args.out, "labeling.jsonl"))
    if result.report is not None:
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(result.report.to_json() + "\n")
        print(result.report.format_table())
    print(f"pipeline outputs in {args.out} "
          f"(energy {result.labeling.energy:.6f}, {result.labeling.sweeps} sweeps)")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "tracks": _cmd_tracks,
    "graph": _cmd_graph,
    "context": _cmd_context,
    "propagate": _cmd_propagate,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxseg",
        description="Video region labeling with propagated context links")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--scenario", default="ambiguity")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)

    p = sub.add_parser("tracks", help="detections -> trajectory hypotheses")
    p.add_argument("--regions", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("graph", help="regions -> similarity graph dump")
    p.add_argument("--regions", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("context", help="hypotheses + regions -> link/label dumps")
    p.add_argument("--regions", required=True)
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--out", required=True, help="observed-links output")
    p.add_argument("--labels-out", required=True, help="region-labels output")
    _add_config_flags(p)

    p = sub.add_parser("propagate", help="links + graph -> score dumps")
    p.add_argument("--links", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("infer", help="scores + labels + regions -> labeling")
    p.add_argument("--regions", required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", action="store_true",
                   help="append an energy/sweeps summary record")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="labeling + ground truth -> IoU report")
    p.add_argument("--regions", required=True)
    p.add_argument("--labeling", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default=None)
    _add_config_flags(p)

    p = sub.add_parser("pipeline", help="run all stages")
    p.add_argument("--regions", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--gt", default=None)
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _COMMANDS[args.command](args, cfg)
    except Exception as exc:  # surface stage failures with a diagnostic
        print(f"ctxseg {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
