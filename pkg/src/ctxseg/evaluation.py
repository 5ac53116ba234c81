"""Region-level IoU scoring of a predicted labeling against ground truth.

Regions are the atomic units, weighted by pixel area: for a class c the
intersection is the total area of regions labeled c by both maps and the
union the total area labeled c by either. Background never enters the mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .regions import VideoSequence

BACKGROUND = 0


@dataclass
class EvalReport:
    per_class_iou: dict[int, float]
    mean_iou: float
    gt_regions: dict[int, int]
    pred_regions: dict[int, int]

    def to_json(self) -> str:
        return json.dumps({
            "per_class": {str(c): v for c, v in sorted(self.per_class_iou.items())},
            "mean": self.mean_iou,
        })

    def format_table(self) -> str:
        lines = [f"{'class':>8} {'iou':>10} {'gt_regions':>12} {'pred_regions':>13}"]
        for c in sorted(self.per_class_iou):
            lines.append(f"{c:>8d} {self.per_class_iou[c]:>10.4f} "
                         f"{self.gt_regions.get(c, 0):>12d} "
                         f"{self.pred_regions.get(c, 0):>13d}")
        lines.append(f"{'mean':>8} {self.mean_iou:>10.4f}")
        return "\n".join(lines)


def iou_per_class(pred: Mapping[int, int], gt: Mapping[int, int],
                  seq: VideoSequence) -> EvalReport:
    """Area-weighted IoU per non-background class, mean over gt classes.

    Classes appearing in neither map are skipped; the mean runs over the
    non-background classes present in the ground truth.
    """
    if not gt:
        raise ValueError("ground truth is empty")
    for rid in gt:
        seq.index_of(rid)  # raises on unknown ids

    ids = set(pred) | set(gt)
    classes = sorted(({c for c in pred.values()} | set(gt.values())) - {BACKGROUND})
    per_class: dict[int, float] = {}
    for c in classes:
        inter = 0
        union = 0
        for rid in ids:
            p = pred.get(rid) == c
            g = gt.get(rid) == c
            if not (p or g):
                continue
            area = seq.region(rid).area
            union += area
            if p and g:
                inter += area
        per_class[c] = inter / union if union > 0 else 0.0

    gt_classes = sorted(set(gt.values()) - {BACKGROUND})
    mean = (sum(per_class[c] for c in gt_classes) / len(gt_classes)
            if gt_classes else 0.0)

    gt_counts: dict[int, int] = {}
    for c in gt.values():
        gt_counts[c] = gt_counts.get(c, 0) + 1
    pred_counts: dict[int, int] = {}
    for c in pred.values():
        pred_counts[c] = pred_counts.get(c, 0) + 1
    return EvalReport(per_class, mean, gt_counts, pred_counts)
