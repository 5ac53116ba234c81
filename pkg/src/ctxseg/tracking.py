"""Greedy association of detections into class-tagged trajectory hypotheses.

Detections are consumed highest-confidence first: the top detection seeds a
tracker that runs toward both ends of the video, absorbing same-class
detections that overlap the predicted box. Hypotheses keeping fewer than
``min_instances`` detections are discarded, but the detections they consumed
stay consumed, which guarantees the loop terminates.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional, Protocol

from .regions import Box, Detection, VideoSequence

log = logging.getLogger(__name__)

SOURCE_DETECTION = "det"
SOURCE_TRACKER = "trk"


def iou_box(a: Box, b: Box) -> float:
    """Intersection-over-union of two (x, y, w, h) boxes; 0 when disjoint."""
    ix = max(a[0], b[0])
    iy = max(a[1], b[1])
    ix2 = min(a[0] + a[2], b[0] + b[2])
    iy2 = min(a[1] + a[3], b[1] + b[3])
    iw = max(0.0, ix2 - ix)
    ih = max(0.0, iy2 - iy)
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def _intersection_area(a: Box, b: Box) -> float:
    iw = max(0.0, min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1]))
    return iw * ih


@dataclass(frozen=True)
class TrajectoryEntry:
    frame: int
    bbox: Box
    source: str  # SOURCE_DETECTION or SOURCE_TRACKER


@dataclass
class TrajectoryHypothesis:
    class_id: int
    entries: list[TrajectoryEntry]
    seed_confidence: float

    @property
    def instance_count(self) -> int:
        return sum(1 for e in self.entries if e.source == SOURCE_DETECTION)

    @property
    def frames(self) -> list[int]:
        return [e.frame for e in self.entries]


class TrackerContract(Protocol):
    """Single-target tracker seam.

    ``begin`` resets all state at a seed box; ``predict`` returns the box the
    tracker expects at a frame; ``accept`` re-seeds at a matched detection.
    """

    def begin(self, frame: int, box: Box, direction: int) -> None: ...

    def predict(self, frame: int) -> Box: ...

    def accept(self, frame: int, box: Box) -> None: ...


class ConstantVelocityTracker:
    """Box predictor with velocity from the last two accepted boxes.

    Box size is held at the last accepted size. With a single accepted box
    the velocity is zero. Predictions are clipped to ``bounds`` (image width,
    height) when given, preserving a minimum 1x1 extent.
    """

    def __init__(self, bounds: Optional[tuple[float, float]] = None):
        self.bounds = bounds
        self._prev: Optional[tuple[int, Box]] = None
        self._last: Optional[tuple[int, Box]] = None

    def begin(self, frame: int, box: Box, direction: int) -> None:
        self._prev = None
        self._last = (frame, box)

    def accept(self, frame: int, box: Box) -> None:
        self._prev = self._last
        self._last = (frame, box)

    def predict(self, frame: int) -> Box:
        if self._last is None:
            raise RuntimeError("tracker used before begin()")
        f1, b1 = self._last
        if self._prev is not None:
            f0, b0 = self._prev
            vx = (b1[0] - b0[0]) / (f1 - f0)
            vy = (b1[1] - b0[1]) / (f1 - f0)
        else:
            vx = vy = 0.0
        dt = frame - f1
        box = (b1[0] + vx * dt, b1[1] + vy * dt, b1[2], b1[3])
        return self._clip(box)

    def _clip(self, box: Box) -> Box:
        if self.bounds is None:
            return box
        W, H = self.bounds
        w = max(1.0, min(box[2], W))
        h = max(1.0, min(box[3], H))
        x = min(max(box[0], 0.0), W - w)
        y = min(max(box[1], 0.0), H - h)
        return (x, y, w, h)


def default_tracker(bounds: Optional[tuple[float, float]] = None) -> ConstantVelocityTracker:
    """Constant-velocity stand-in for a learned tracker."""
    return ConstantVelocityTracker(bounds)


@dataclass
class TrajectoryParams:
    frame_count: int
    iou_threshold: float = 0.5
    min_instances: int = 3
    max_miss: int = 5


def _rank_key(d: Detection):
    # confidence desc, then frame, then smaller x / y / class for determinism
    return (-d.confidence, d.frame, d.bbox[0], d.bbox[1], d.class_id)


def associate_trajectories(dets: list[Detection], tracker: TrackerContract,
                           params: TrajectoryParams) -> list[TrajectoryHypothesis]:
    """Greedy confidence-ranked association of thresholded detections.

    Repeats until fewer than ``min_instances`` detections remain unconsumed:
    seed at the highest-confidence detection, track toward both video ends,
    and in each visited frame absorb the highest-IoU same-class detection
    whose IoU with the predicted box strictly exceeds ``iou_threshold``
    (re-seeding the tracker there); otherwise keep the predicted box. A
    direction stops at the video boundary or after ``max_miss`` consecutive
    prediction-only frames. Hypotheses with enough detection-sourced entries
    are retained; either way the consumed detections never return.
    """
    pool = sorted(dets, key=_rank_key)
    retained: list[TrajectoryHypothesis] = []
    while len(pool) >= params.min_instances:
        seed = pool.pop(0)
        entries = {seed.frame: TrajectoryEntry(seed.frame, seed.bbox, SOURCE_DETECTION)}
        count = 1
        for direction in (1, -1):
            tracker.begin(seed.frame, seed.bbox, direction)
            misses = 0
            f = seed.frame + direction
            while 0 <= f < params.frame_count and misses < params.max_miss:
                pred = tracker.predict(f)
                best = None
                best_key = None
                for d in pool:
                    if d.frame != f or d.class_id != seed.class_id:
                        continue
                    ov = iou_box(pred, d.bbox)
                    if ov <= params.iou_threshold:
                        continue
                    key = (-ov, -d.confidence, d.bbox[0], d.bbox[1])
                    if best_key is None or key < best_key:
                        best, best_key = d, key
                if best is not None:
                    entries[f] = TrajectoryEntry(f, best.bbox, SOURCE_DETECTION)
                    pool.remove(best)
                    tracker.accept(f, best.bbox)
                    count += 1
                    misses = 0
                else:
                    entries[f] = TrajectoryEntry(f, pred, SOURCE_TRACKER)
                    misses += 1
                f += direction
        hyp = TrajectoryHypothesis(
            class_id=seed.class_id,
            entries=[entries[f] for f in sorted(entries)],
            seed_confidence=seed.confidence)
        if count >= params.min_instances:
            retained.append(hyp)
    return retained


def annotated_frames(hyps: list[TrajectoryHypothesis], seq: VideoSequence,
                     rho: float = 0.5) -> tuple[frozenset[int], dict[int, int]]:
    """Frames covered by hypotheses, and the region labeling they induce.

    A region in a covered frame takes the class of the hypothesis box that
    contains at least a ``rho`` fraction of the region's bbox area (ties go
    to the hypothesis with the higher seed confidence, then the smaller
    class id). Unmatched regions in covered frames are labeled background 0.
    Regions without a bbox in a covered frame are skipped with a warning and
    stay unlabeled.
    """
    by_frame: dict[int, list[tuple[TrajectoryHypothesis, TrajectoryEntry]]] = {}
    for h in hyps:
        for e in h.entries:
            by_frame.setdefault(e.frame, []).append((h, e))
    frames = frozenset(by_frame)

    labels: dict[int, int] = {}
    for r in seq.regions:
        if r.frame not in frames:
            continue
        if r.bbox is None:
            log.warning("region %d lies in an annotated frame but has no bbox; "
                        "left unlabeled", r.region_id)
            continue
        area = r.bbox[2] * r.bbox[3]
        best = None  # (fraction, seed_confidence, -class_id)
        best_cls = 0
        for h, e in by_frame[r.frame]:
            frac = _intersection_area(r.bbox, e.bbox) / area
            key = (frac, h.seed_confidence, -h.class_id)
            if best is None or key > best:
                best, best_cls = key, h.class_id
        labels[r.region_id] = best_cls if best is not None and best[0] >= rho else 0
    return frames, labels


def dump_hypotheses(hyps: list[TrajectoryHypothesis], path) -> None:
    """One JSON line per hypothesis: class, entries, and seed confidence.

    Seed confidence is carried so that labelings rebuilt from the dump break
    ties exactly as the in-memory pipeline does.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for h in hyps:
            fh.write(json.dumps({
                "class": h.class_id,
                "seed_confidence": float(h.seed_confidence),
                "entries": [{"frame": e.frame, "bbox": [float(v) for v in e.bbox],
                             "source": e.source} for e in h.entries],
            }) + "\n")


def load_hypotheses(path) -> list[TrajectoryHypothesis]:
    out: list[TrajectoryHypothesis] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entries = [TrajectoryEntry(int(e["frame"]), tuple(float(v) for v in e["bbox"]),
                                       str(e["source"]))
                       for e in rec["entries"]]
            out.append(TrajectoryHypothesis(int(rec["class"]), entries,
                                            float(rec.get("seed_confidence", 0.0))))
    return out
