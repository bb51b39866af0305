"""Axis-aligned 3D box geometry.

Everything downstream (relation labels, detection matching, NMS) is built
on the exact arithmetic defined here, so all functions work in float64
and keep their formulas in the plain closed form that the batched kernels
in :mod:`scenerel.relations` replicate operation-for-operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Vec3 = tuple[float, float, float]

_AXES = {"x": 0, "y": 1, "z": 2}
_PLANES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


@dataclass(frozen=True)
class Aabb3:
    """Axis-aligned box given by its min/max corners, in meters."""

    min: Vec3
    max: Vec3

    def __post_init__(self):
        mn = tuple(float(v) for v in self.min)
        mx = tuple(float(v) for v in self.max)
        if len(mn) != 3 or len(mx) != 3:
            raise ValueError("Aabb3 corners must have 3 coordinates")
        for a in range(3):
            if not (math.isfinite(mn[a]) and math.isfinite(mx[a])):
                raise ValueError(f"Aabb3 coordinates must be finite, got {mn} / {mx}")
            if mn[a] > mx[a]:
                raise ValueError(f"Aabb3 min > max on axis {a}: {mn[a]} > {mx[a]}")
        object.__setattr__(self, "min", mn)
        object.__setattr__(self, "max", mx)

    def center(self) -> Vec3:
        return tuple((self.min[a] + self.max[a]) / 2.0 for a in range(3))

    def extent(self) -> Vec3:
        return tuple(self.max[a] - self.min[a] for a in range(3))

    def volume(self) -> float:
        dx, dy, dz = self.extent()
        return dx * dy * dz

    def translated(self, offset) -> "Aabb3":
        ox, oy, oz = (float(v) for v in offset)
        return Aabb3(
            (self.min[0] + ox, self.min[1] + oy, self.min[2] + oz),
            (self.max[0] + ox, self.max[1] + oy, self.max[2] + oz),
        )


@dataclass(frozen=True)
class PlaneOverlap:
    """Projection overlap on one coordinate plane.

    ``ratio`` is the larger of the two intersection-over-own-area terms,
    not a symmetric IoU; containment of either footprint gives 1.0.
    """

    plane: str
    ratio: float

    def __post_init__(self):
        if self.plane not in _PLANES:
            raise ValueError(f"unknown plane {self.plane!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"overlap ratio out of [0, 1]: {self.ratio}")


@dataclass(frozen=True)
class ScoredBox:
    """NMS input: a box with a confidence score and a class id."""

    box: Aabb3
    score: float
    class_id: int

    def __post_init__(self):
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of [0, 1]: {self.score}")


def axis_distance(a: Aabb3, b: Aabb3, axis: str) -> float:
    """Minimum face-to-face distance along one axis.

    Defined as min(|max_ax(a) - min_ax(b)|, |max_ax(b) - min_ax(a)|): the
    smaller gap between the top face of one box and the bottom face of the
    other.  Symmetric; zero for touching boxes; a box against itself gives
    its own extent.
    """
    i = _AXES[axis]
    return min(abs(a.max[i] - b.min[i]), abs(b.max[i] - a.min[i]))


def _interval_overlap(amin: float, amax: float, bmin: float, bmax: float) -> float:
    return max(min(amax, bmax) - max(amin, bmin), 0.0)


def plane_overlap(a: Aabb3, b: Aabb3, plane: str) -> PlaneOverlap:
    """Overlap of the two boxes' footprints on a coordinate plane.

    ratio = max(inter/area(a), inter/area(b)).  A degenerate (zero-area)
    footprint contributes 0 for its own term, so the function stays total
    over flat boxes.
    """
    u, v = _PLANES[plane]
    ou = _interval_overlap(a.min[u], a.max[u], b.min[u], b.max[u])
    ov = _interval_overlap(a.min[v], a.max[v], b.min[v], b.max[v])
    inter = ou * ov
    area_a = (a.max[u] - a.min[u]) * (a.max[v] - a.min[v])
    area_b = (b.max[u] - b.min[u]) * (b.max[v] - b.min[v])
    ratio_a = inter / area_a if area_a > 0.0 else 0.0
    ratio_b = inter / area_b if area_b > 0.0 else 0.0
    return PlaneOverlap(plane, max(ratio_a, ratio_b))


def iou3d(a: Aabb3, b: Aabb3) -> float:
    """Intersection volume over union volume; 0 for a pair of empty boxes."""
    inter = 1.0
    for i in range(3):
        inter *= _interval_overlap(a.min[i], a.max[i], b.min[i], b.max[i])
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def center_distance(a: Aabb3, b: Aabb3) -> float:
    """Euclidean distance between box centers."""
    ca = a.center()
    cb = b.center()
    dx = ca[0] - cb[0]
    dy = ca[1] - cb[1]
    dz = ca[2] - cb[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def nms3d(boxes: list[ScoredBox], iou_threshold: float) -> list[int]:
    """Greedy class-aware non-maximum suppression.

    Candidates are visited by descending score (ties broken by ascending
    input index); a candidate is kept iff its IoU with every previously
    kept box of the same class is below ``iou_threshold``.  Returns kept
    input indices in keep order.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    kept: list[int] = []
    for i in order:
        suppressed = False
        for j in kept:
            if boxes[j].class_id != boxes[i].class_id:
                continue
            if iou3d(boxes[j].box, boxes[i].box) >= iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(i)
    return kept
