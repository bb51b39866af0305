"""Relation labels for object pairs.

Four undirected boolean relations per pair:

* ``group``    — same semantic class,
* ``same_as``  — same physical instance (e.g. two fragments of one table),
* ``support``  — small vertical gap and large footprint overlap,
* ``hang_on``  — small horizontal gap and large vertical-plane overlap,
  evaluated only when ``support`` does not hold (the two are mutually
  exclusive by construction).

The spatial predicates compare axis distances against length thresholds
(non-strict) and plane overlaps against ratio thresholds (strict).  The
batched implementation repeats the scalar arithmetic operation-for-
operation on float64 arrays, so scalar and batched results are bit-exact
equal, which the test suite asserts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Aabb3, axis_distance, plane_overlap

# instance/class id marking "no underlying object"; never groups with anything
BACKGROUND_ID = -1


@dataclass(frozen=True)
class RelationThresholds:
    """Decision thresholds for the spatial relations.

    ``tau_x/y/z`` are gap limits in meters, ``tau_xy/xz/yz`` are overlap
    ratio limits in (0, 1).
    """

    tau_x: float = 0.1
    tau_y: float = 0.1
    tau_z: float = 0.1
    tau_xy: float = 0.5
    tau_xz: float = 0.5
    tau_yz: float = 0.5

    def __post_init__(self):
        for name in ("tau_x", "tau_y", "tau_z"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("tau_xy", "tau_xz", "tau_yz"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")


@dataclass(frozen=True)
class RelationLabels:
    group: bool
    same_as: bool
    support: bool
    hang_on: bool

    def __post_init__(self):
        if self.support and self.hang_on:
            raise ValueError("support and hang_on are mutually exclusive")


@dataclass(frozen=True)
class AnnotatedObject:
    """A ground-truth object: box plus semantic identity.

    ``instance_id`` is shared by fragments of one physical object.  The
    sentinel :data:`BACKGROUND_ID` is allowed on both ids and never
    produces a true ``group``/``same_as``.
    """

    box: Aabb3
    class_id: int
    instance_id: int

    def __post_init__(self):
        if self.class_id < BACKGROUND_ID or self.instance_id < BACKGROUND_ID:
            raise ValueError("ids must be >= 0, or the background sentinel")


def spatial_relations(a: Aabb3, b: Aabb3, t: RelationThresholds) -> tuple[bool, bool]:
    """(support, hang_on) for one box pair.

    support: gap_z <= tau_z and overlap_xy > tau_xy.  Otherwise hang_on:
    (gap_y <= tau_y and overlap_xz > tau_xz) or (gap_x <= tau_x and
    overlap_yz > tau_yz).  At most one of the two is true.
    """
    if axis_distance(a, b, "z") <= t.tau_z and plane_overlap(a, b, "xy").ratio > t.tau_xy:
        return True, False
    hang = (
        axis_distance(a, b, "y") <= t.tau_y and plane_overlap(a, b, "xz").ratio > t.tau_xz
    ) or (
        axis_distance(a, b, "x") <= t.tau_x and plane_overlap(a, b, "yz").ratio > t.tau_yz
    )
    return False, hang


def semantic_relations(a: AnnotatedObject, b: AnnotatedObject) -> tuple[bool, bool]:
    """(group, same_as); background-sentinel ids never relate to anything."""
    group = a.class_id == b.class_id and a.class_id != BACKGROUND_ID
    same_as = a.instance_id == b.instance_id and a.instance_id != BACKGROUND_ID
    return group, same_as


def relation_labels(a: AnnotatedObject, b: AnnotatedObject, t: RelationThresholds) -> RelationLabels:
    """All four relation labels for one annotated pair."""
    group, same_as = semantic_relations(a, b)
    support, hang_on = spatial_relations(a.box, b.box, t)
    return RelationLabels(group=group, same_as=same_as, support=support, hang_on=hang_on)


def boxes_to_arrays(boxes) -> tuple[np.ndarray, np.ndarray]:
    """Stack a sequence of Aabb3 into (n, 3) float64 min/max arrays."""
    mins = np.array([b.min for b in boxes], dtype=np.float64).reshape(-1, 3)
    maxs = np.array([b.max for b in boxes], dtype=np.float64).reshape(-1, 3)
    return mins, maxs


def _axis_gap(amin, amax, bmin, bmax):
    return np.minimum(np.abs(amax - bmin), np.abs(bmax - amin))


def _overlap_ratio(inter, area_a, area_b):
    ratio_a = np.divide(inter, area_a, out=np.zeros_like(inter), where=area_a > 0.0)
    ratio_b = np.divide(inter, area_b, out=np.zeros_like(inter), where=area_b > 0.0)
    return np.maximum(ratio_a, ratio_b)


def spatial_relations_arrays(
    amin: np.ndarray,
    amax: np.ndarray,
    bmin: np.ndarray,
    bmax: np.ndarray,
    t: RelationThresholds,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (support, hang_on) over aligned (n, 3) corner arrays.

    Bit-exact equal to looping :func:`spatial_relations` over the rows;
    the per-axis interval overlaps and extents are computed once and
    shared by the three projection planes.
    """
    o = [
        np.maximum(
            np.minimum(amax[:, ax], bmax[:, ax]) - np.maximum(amin[:, ax], bmin[:, ax]),
            0.0,
        )
        for ax in range(3)
    ]
    ea = [amax[:, ax] - amin[:, ax] for ax in range(3)]
    eb = [bmax[:, ax] - bmin[:, ax] for ax in range(3)]

    gap_z = _axis_gap(amin[:, 2], amax[:, 2], bmin[:, 2], bmax[:, 2])
    support = (gap_z <= t.tau_z) & (
        _overlap_ratio(o[0] * o[1], ea[0] * ea[1], eb[0] * eb[1]) > t.tau_xy
    )

    gap_y = _axis_gap(amin[:, 1], amax[:, 1], bmin[:, 1], bmax[:, 1])
    gap_x = _axis_gap(amin[:, 0], amax[:, 0], bmin[:, 0], bmax[:, 0])
    hang = (gap_y <= t.tau_y) & (
        _overlap_ratio(o[0] * o[2], ea[0] * ea[2], eb[0] * eb[2]) > t.tau_xz
    )
    hang |= (gap_x <= t.tau_x) & (
        _overlap_ratio(o[1] * o[2], ea[1] * ea[2], eb[1] * eb[2]) > t.tau_yz
    )
    hang &= ~support
    return support, hang


def relation_labels_arrays(
    mins: np.ndarray,
    maxs: np.ndarray,
    class_ids: np.ndarray,
    instance_ids: np.ndarray,
    pair_a: np.ndarray,
    pair_b: np.ndarray,
    t: RelationThresholds,
) -> dict[str, np.ndarray]:
    """Batched labels as a name -> bool array dict over index pairs.

    ``mins``/``maxs`` are (n, 3) box corners, ``class_ids``/``instance_ids``
    length-n int arrays (background sentinel allowed), ``pair_a``/``pair_b``
    aligned index arrays selecting the pairs.
    """
    n = mins.shape[0]
    pair_a = np.asarray(pair_a, dtype=np.intp)
    pair_b = np.asarray(pair_b, dtype=np.intp)
    if pair_a.size and (pair_a.min() < 0 or pair_a.max() >= n or pair_b.min() < 0 or pair_b.max() >= n):
        raise ValueError("pair index out of range")
    ca, cb = class_ids[pair_a], class_ids[pair_b]
    ia, ib = instance_ids[pair_a], instance_ids[pair_b]
    group = (ca == cb) & (ca != BACKGROUND_ID)
    same_as = (ia == ib) & (ia != BACKGROUND_ID)
    support, hang_on = spatial_relations_arrays(
        mins[pair_a], maxs[pair_a], mins[pair_b], maxs[pair_b], t
    )
    return {"group": group, "same_as": same_as, "support": support, "hang_on": hang_on}


def relation_labels_batch(
    objects: list[AnnotatedObject],
    pairs: list[tuple[int, int]],
    t: RelationThresholds,
) -> list[RelationLabels]:
    """Batched equivalent of calling :func:`relation_labels` per pair."""
    if not pairs:
        return []
    mins, maxs = boxes_to_arrays([o.box for o in objects])
    class_ids = np.array([o.class_id for o in objects], dtype=np.int64)
    instance_ids = np.array([o.instance_id for o in objects], dtype=np.int64)
    pair_a = np.array([p[0] for p in pairs], dtype=np.intp)
    pair_b = np.array([p[1] for p in pairs], dtype=np.intp)
    cols = relation_labels_arrays(mins, maxs, class_ids, instance_ids, pair_a, pair_b, t)
    return [
        RelationLabels(
            group=bool(cols["group"][i]),
            same_as=bool(cols["same_as"][i]),
            support=bool(cols["support"][i]),
            hang_on=bool(cols["hang_on"][i]),
        )
        for i in range(len(pairs))
    ]
