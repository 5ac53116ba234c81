"""Per-video input handling: regions with features, detections, ground truth.

File formats are JSON lines. One record per line:

* regions:    ``{"id": int, "frame": int, "feature": [float...], "area": int,
  "bbox": [x, y, w, h]}`` (bbox optional)
* detections: ``{"frame": int, "bbox": [x, y, w, h], "class": int,
  "confidence": float}``
* ground truth / labelings: ``{"id": int, "class": int}``

Floats are written with Python's shortest round-trip repr (>= 9 significant
digits), so a load -> save -> load cycle reproduces features bitwise.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

Box = tuple[float, float, float, float]

NORM_TOL = 1e-6


class IngestError(ValueError):
    """Raised for malformed or inconsistent input files."""


@dataclass(eq=False)
class Region:
    """Atomic labeling unit: one segment of one frame with a feature vector."""

    region_id: int
    frame: int
    feature: np.ndarray
    area: int
    bbox: Optional[Box] = None
    degenerate: bool = False


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: Box
    class_id: int
    confidence: float


@dataclass
class IngestConfig:
    """Optional overrides applied while loading a sequence.

    When ``frame_count`` / ``class_count`` are None they are inferred from the
    data (max frame + 1, max detection class + 1).
    """

    frame_count: Optional[int] = None
    class_count: Optional[int] = None


class VideoSequence:
    """Immutable, validated container for one video's regions and detections.

    Regions are ordered by ascending ``region_id``; the position of a region
    in that order is its vertex index for every matrix built downstream.
    """

    def __init__(self, regions: Sequence[Region], detections: Sequence[Detection],
                 frame_count: Optional[int] = None, class_count: Optional[int] = None):
        regions = sorted(regions, key=lambda r: r.region_id)
        seen: set[int] = set()
        for r in regions:
            if r.region_id in seen:
                raise IngestError(f"duplicate region id {r.region_id}")
            seen.add(r.region_id)
            if r.region_id < 0:
                raise IngestError(f"negative region id {r.region_id}")
            if r.area <= 0:
                raise IngestError(f"region {r.region_id}: area must be positive")
            if r.bbox is not None and (r.bbox[2] <= 0 or r.bbox[3] <= 0):
                raise IngestError(f"region {r.region_id}: bbox extents must be positive")

        if regions:
            d = regions[0].feature.shape[0]
            for r in regions:
                if r.feature.shape != (d,):
                    raise IngestError(
                        f"region {r.region_id}: feature dimension "
                        f"{r.feature.shape[0]} != {d}")
            self.feature_dim = d
        else:
            self.feature_dim = 0

        max_frame = max(
            [r.frame for r in regions] + [d.frame for d in detections],
            default=-1)
        if frame_count is None:
            frame_count = max_frame + 1
        if frame_count <= 0:
            raise IngestError("sequence must span at least one frame")
        if max_frame >= frame_count:
            raise IngestError(
                f"frame index {max_frame} out of range for frame_count {frame_count}")
        for obj in list(regions) + list(detections):
            if obj.frame < 0:
                raise IngestError("negative frame index")

        if class_count is None:
            class_count = max([d.class_id for d in detections], default=0) + 1
        if any(d.class_id >= class_count or d.class_id < 0 for d in detections):
            raise IngestError(f"detection class out of range [0, {class_count})")
        for det in detections:
            if not (0.0 <= det.confidence <= 1.0):
                raise IngestError(f"detection confidence {det.confidence} not in [0,1]")
            if det.bbox[2] <= 0 or det.bbox[3] <= 0:
                raise IngestError("detection bbox extents must be positive")

        self.regions: list[Region] = list(regions)
        self.detections: list[Detection] = list(detections)
        self.frame_count = frame_count
        self.class_count = class_count
        self._index = {r.region_id: i for i, r in enumerate(self.regions)}
        self.regions_by_frame: dict[int, list[Region]] = {}
        for r in self.regions:
            self.regions_by_frame.setdefault(r.frame, []).append(r)

    @property
    def n(self) -> int:
        return len(self.regions)

    def index_of(self, region_id: int) -> int:
        """Vertex index of a region id."""
        try:
            return self._index[region_id]
        except KeyError:
            raise KeyError(f"unknown region id {region_id}") from None

    def region(self, region_id: int) -> Region:
        return self.regions[self.index_of(region_id)]

    def feature_matrix(self) -> np.ndarray:
        """Stacked (n, d) feature matrix in vertex order."""
        if not self.regions:
            return np.zeros((0, 0))
        return np.stack([r.feature for r in self.regions])


def normalize_feature(raw: np.ndarray) -> tuple[np.ndarray, bool]:
    """L2-normalize a feature; all-zero vectors are kept and flagged.

    Vectors already unit within 1e-9 pass through untouched so that a
    save/load cycle is bitwise idempotent.
    """
    nrm = float(np.linalg.norm(raw))
    if nrm == 0.0:
        return raw, True
    if abs(nrm - 1.0) < 1e-9:
        return raw, False
    return raw / nrm, False


def _iter_records(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise IngestError(f"{path}:{lineno}: record is not an object")
            yield lineno, rec


def _parse_box(raw, where: str) -> Box:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise IngestError(f"{where}: bbox must be [x, y, w, h]")
    return (float(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]))


def load_sequence(regions_path, detections_path=None,
                  config: Optional[IngestConfig] = None) -> VideoSequence:
    """Load and validate a sequence from JSON-lines files.

    Features are L2-normalized in place; all-zero features are admitted but
    flagged degenerate. Raises :class:`IngestError` with the offending file
    and line number on malformed input.
    """
    config = config or IngestConfig()
    regions: list[Region] = []
    dim: Optional[int] = None
    for lineno, rec in _iter_records(regions_path):
        where = f"{regions_path}:{lineno}"
        try:
            rid = int(rec["id"])
            frame = int(rec["frame"])
            feat_raw = rec["feature"]
            area = int(rec["area"])
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"{where}: missing or invalid field ({exc})") from None
        feat = np.asarray(feat_raw, dtype=np.float64)
        if feat.ndim != 1 or feat.size == 0:
            raise IngestError(f"{where}: feature must be a non-empty flat list")
        if dim is None:
            dim = feat.size
        elif feat.size != dim:
            raise IngestError(
                f"{where}: feature dimension {feat.size} != {dim} "
                f"(set by first record)")
        bbox = _parse_box(rec["bbox"], where) if rec.get("bbox") is not None else None
        feature, degenerate = normalize_feature(feat)
        regions.append(Region(rid, frame, feature, area, bbox, degenerate))

    detections: list[Detection] = []
    if detections_path is not None:
        for lineno, rec in _iter_records(detections_path):
            where = f"{detections_path}:{lineno}"
            try:
                detections.append(Detection(
                    frame=int(rec["frame"]),
                    bbox=_parse_box(rec["bbox"], where),
                    class_id=int(rec["class"]),
                    confidence=float(rec["confidence"]),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{where}: missing or invalid field ({exc})") from None

    return VideoSequence(regions, detections,
                         frame_count=config.frame_count,
                         class_count=config.class_count)


def save_sequence(seq: VideoSequence, regions_path, detections_path=None) -> None:
    """Write a sequence back to the JSON-lines formats accepted by load."""
    with open(regions_path, "w", encoding="utf-8") as fh:
        for r in seq.regions:
            rec = {"id": r.region_id, "frame": r.frame,
                   "feature": [float(x) for x in r.feature], "area": r.area}
            if r.bbox is not None:
                rec["bbox"] = [float(v) for v in r.bbox]
            fh.write(json.dumps(rec) + "\n")
    if detections_path is not None:
        with open(detections_path, "w", encoding="utf-8") as fh:
            for d in seq.detections:
                fh.write(json.dumps({
                    "frame": d.frame, "bbox": [float(v) for v in d.bbox],
                    "class": d.class_id, "confidence": float(d.confidence)}) + "\n")


def filter_detections(seq: VideoSequence, det_threshold: float) -> list[Detection]:
    """Detections with confidence strictly exceeding the threshold, order kept."""
    if not (0.0 <= det_threshold <= 1.0):
        raise ValueError(f"det_threshold {det_threshold} not in [0,1]")
    return [d for d in seq.detections if d.confidence > det_threshold]


def load_ground_truth(path, seq: VideoSequence) -> dict[int, int]:
    """Load a region_id -> class map, validating ids and class range."""
    out: dict[int, int] = {}
    for lineno, rec in _iter_records(path):
        where = f"{path}:{lineno}"
        try:
            rid = int(rec["id"])
            cls = int(rec["class"])
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"{where}: missing or invalid field ({exc})") from None
        if rid not in seq._index:
            raise IngestError(f"{where}: unknown region id {rid}")
        if not (0 <= cls < seq.class_count):
            raise IngestError(
                f"{where}: class {cls} out of range [0, {seq.class_count})")
        out[rid] = cls
    return out


def load_labeling(path) -> dict[int, int]:
    """Load a labeling file, skipping summary records that carry no id."""
    out: dict[int, int] = {}
    for lineno, rec in _iter_records(path):
        if "id" not in rec:
            continue
        out[int(rec["id"])] = int(rec["class"])
    return out


def save_labeling(labels: Mapping[int, int], path, summary: Optional[dict] = None) -> None:
    """Write region labels as JSON lines, optionally followed by a summary record."""
    with open(path, "w", encoding="utf-8") as fh:
        for rid in sorted(labels):
            fh.write(json.dumps({"id": int(rid), "class": int(labels[rid])}) + "\n")
        if summary is not None:
            fh.write(json.dumps(summary) + "\n")
