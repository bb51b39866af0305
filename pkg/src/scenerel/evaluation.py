"""Detection and relation metrics, plus the relation-kernel benchmark.

Average precision uses greedy confidence-ordered matching (a detection is
a true positive iff its IoU with some still-unmatched same-class ground
truth reaches the threshold; the best-IoU candidate is taken, ties by
ascending ground-truth index) and all-point interpolation: the area under
the monotonized precision-recall curve.  mAP is the unweighted mean over
classes that have at least one ground-truth instance.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Aabb3, iou3d
from .pairing import PairingConfig, build_pairs
from .relations import (
    RelationThresholds,
    boxes_to_arrays,
    spatial_relations,
    spatial_relations_arrays,
)


@dataclass
class ApReport:
    thresholds: tuple[float, ...]
    per_class: dict[float, dict[int, float]]  # threshold -> class -> AP
    map_by_threshold: dict[float, float]
    n_ground_truth: int
    n_detections: int

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "per_class": {
                str(t): {str(c): ap for c, ap in sorted(cls.items())}
                for t, cls in self.per_class.items()
            },
            "map": {str(t): m for t, m in self.map_by_threshold.items()},
            "n_ground_truth": self.n_ground_truth,
            "n_detections": self.n_detections,
        }


def _all_point_ap(tp_flags: np.ndarray, n_positive: int) -> float:
    if n_positive == 0:
        raise ValueError("AP undefined for a class with no ground truth")
    if tp_flags.size == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(~tp_flags)
    recall = tp / n_positive
    precision = tp / (tp + fp)
    # precision envelope from the right, then sum over recall steps
    mrec = np.concatenate([[0.0], recall])
    mpre = np.concatenate([[0.0], precision])
    for i in range(mpre.size - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.nonzero(np.diff(mrec))[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def average_precision(
    detections_by_scene, ground_truth_by_scene, iou_threshold: float
) -> dict[int, float]:
    """Per-class AP over parallel per-scene detection / ground-truth lists.

    Classes with no ground truth are omitted (their AP is undefined).
    """
    if len(detections_by_scene) != len(ground_truth_by_scene):
        raise ValueError("detections and ground truth must cover the same scenes")
    classes = sorted({o.class_id for gts in ground_truth_by_scene for o in gts})
    out: dict[int, float] = {}
    for class_id in classes:
        entries = []  # (confidence, scene index, detection index)
        for si, dets in enumerate(detections_by_scene):
            for di, det in enumerate(dets):
                if det.class_id == class_id:
                    entries.append((det.confidence, si, di))
        entries.sort(key=lambda e: (-e[0], e[1], e[2]))

        n_positive = 0
        gt_boxes: list[list[Aabb3]] = []
        for gts in ground_truth_by_scene:
            boxes = [o.box for o in gts if o.class_id == class_id]
            n_positive += len(boxes)
            gt_boxes.append(boxes)
        matched = [set() for _ in gt_boxes]

        tp_flags = np.zeros(len(entries), dtype=bool)
        for ei, (_, si, di) in enumerate(entries):
            det = detections_by_scene[si][di]
            best_iou, best_gt = 0.0, None
            for gi, box in enumerate(gt_boxes[si]):
                if gi in matched[si]:
                    continue
                iou = iou3d(det.box, box)
                if iou > best_iou:
                    best_iou, best_gt = iou, gi
            if best_gt is not None and best_iou >= iou_threshold:
                matched[si].add(best_gt)
                tp_flags[ei] = True
        out[class_id] = _all_point_ap(tp_flags, n_positive)
    return out


def ap_report(
    detections_by_scene, ground_truth_by_scene, thresholds: tuple[float, ...] = (0.25, 0.5)
) -> ApReport:
    per_class = {}
    map_by_threshold = {}
    for t in thresholds:
        aps = average_precision(detections_by_scene, ground_truth_by_scene, t)
        per_class[t] = aps
        map_by_threshold[t] = float(np.mean(list(aps.values()))) if aps else 0.0
    return ApReport(
        thresholds=tuple(thresholds),
        per_class=per_class,
        map_by_threshold=map_by_threshold,
        n_ground_truth=sum(len(g) for g in ground_truth_by_scene),
        n_detections=sum(len(d) for d in detections_by_scene),
    )


@dataclass
class RelationMetrics:
    """Confusion-derived scores; None marks an undefined value."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    n_pairs: int


def relation_metrics(
    pair_logits: dict[str, np.ndarray], relation_targets: dict[str, np.ndarray]
) -> dict[str, RelationMetrics]:
    """Per-relation accuracy/precision/recall, thresholding logits at 0.

    A logit of exactly 0 predicts false.  Empty inputs yield all-None
    metrics for that relation.
    """
    out = {}
    for name, logits in pair_logits.items():
        logits = np.asarray(logits, dtype=np.float64).ravel()
        targets = np.asarray(relation_targets[name], dtype=bool).ravel()
        if logits.shape != targets.shape:
            raise ValueError(f"{name}: logits/targets length mismatch")
        n = logits.size
        if n == 0:
            out[name] = RelationMetrics(None, None, None, 0)
            continue
        pred = logits > 0.0
        tp = int(np.sum(pred & targets))
        accuracy = float(np.mean(pred == targets))
        precision = tp / int(pred.sum()) if pred.any() else None
        recall = tp / int(targets.sum()) if targets.any() else None
        out[name] = RelationMetrics(accuracy, precision, recall, n)
    return out


@dataclass
class BenchReport:
    implementation: str  # "scalar" | "batched"
    pair_count: int
    wall_time_s: float
    per_pair_s: float
    reps: int = 1

    def to_dict(self) -> dict:
        return {
            "implementation": self.implementation,
            "pair_count": self.pair_count,
            "wall_time_s": self.wall_time_s,
            "per_pair_s": self.per_pair_s,
            "reps": self.reps,
        }


def _random_boxes(n: int, rng: np.random.Generator) -> list[Aabb3]:
    centers = rng.uniform(0.5, 7.5, size=(n, 3))
    extents = rng.uniform(0.1, 2.0, size=(n, 3))
    mins = centers - extents / 2
    maxs = centers + extents / 2
    return [Aabb3(tuple(mins[i]), tuple(maxs[i])) for i in range(n)]


def bench_relations(
    n_objects: int,
    k: int = 8,
    reps: int = 5,
    seed: int = 0,
    thresholds: RelationThresholds | None = None,
) -> list[BenchReport]:
    """Time spatial relation labeling over n_objects * k random pairs.

    The batched path is checked for equality against the scalar loop
    before any timing; reported times are medians over ``reps`` runs.
    """
    if n_objects < 2:
        raise ValueError("n_objects must be >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    t = thresholds or RelationThresholds()
    rng = np.random.default_rng(seed)
    boxes = _random_boxes(n_objects, rng)
    mins, maxs = boxes_to_arrays(boxes)
    centers = (mins + maxs) / 2.0
    pairs = build_pairs(n_objects, centers, PairingConfig(k=k, mode="random", seed=seed))
    anchors, partners = pairs.index_arrays()
    n_pairs = anchors.size

    def run_scalar():
        return [spatial_relations(boxes[a], boxes[b], t) for a, b in pairs.pairs]

    def run_batched():
        return spatial_relations_arrays(mins[anchors], maxs[anchors], mins[partners], maxs[partners], t)

    scalar_out = run_scalar()
    support, hang = run_batched()
    for i, (s, h) in enumerate(scalar_out):
        if bool(support[i]) != s or bool(hang[i]) != h:
            raise AssertionError(f"batched relation kernel diverges from scalar at pair {i}")

    scalar_times, batched_times = [], []
    for _ in range(reps):
        t0 = time.perf_counter()
        run_scalar()
        scalar_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        run_batched()
        batched_times.append(time.perf_counter() - t0)

    reports = []
    for name, times in (("scalar", scalar_times), ("batched", batched_times)):
        wall = statistics.median(times)
        reports.append(
            BenchReport(
                implementation=name,
                pair_count=n_pairs,
                wall_time_s=wall,
                per_pair_s=wall / n_pairs,
                reps=reps,
            )
        )
    return reports
