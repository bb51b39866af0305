"""Synthetic indoor scenes.

Rooms are axis-aligned shells (z up, meters, room min corner at the
origin) populated so that every relation type has ground-truth carriers:

* four perimeter walls (``hang_on`` anchors, ``group`` among themselves),
* tables with seats tucked at their edges,
* cups standing on the tables (``support`` is guaranteed by placing the
  cup footprint inside the table footprint with a <= 2 cm vertical gap),
* boards mounted just off a wall face (``hang_on`` guaranteed),
* fragments of one physical object are produced later, at proposal time.

Seats carry the deliberate class ambiguity: every seat box is drawn from
one size distribution and placed by one rule (tucked against a table
side), then a random subset is labeled ``stool`` and the rest ``chair``.
The two classes are indistinguishable object-by-object and can only be
separated through context: a chair has same-class partners somewhere in
the scene, a lone stool does not.

Generation is deterministic per seed and total: if a sampled object
cannot be placed after a bounded number of rejection draws it is dropped,
never replaced by a fallback layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .geometry import Aabb3
from .relations import AnnotatedObject

CLASS_NAMES = ("wall", "table", "chair", "board", "cup", "stool")
N_CLASSES = len(CLASS_NAMES)
BACKGROUND_CLASS = N_CLASSES
WALL, TABLE, CHAIR, BOARD, CUP, STOOL = range(N_CLASSES)

# chair and stool share one appearance signature; every other class gets
# its own well-separated value (see detection.extract_features)
WALL_THICKNESS = 0.1
_PLACEMENT_TRIES = 200


class SceneFormatError(ValueError):
    """A scene file that does not parse or fails validation."""


@dataclass
class Scene:
    id: int
    room: Aabb3
    objects: list[AnnotatedObject]

    def class_ids(self) -> np.ndarray:
        return np.array([o.class_id for o in self.objects], dtype=np.int64)

    def instance_ids(self) -> np.ndarray:
        return np.array([o.instance_id for o in self.objects], dtype=np.int64)


def _footprints_overlap(a: Aabb3, b: Aabb3, margin: float = 0.0) -> bool:
    return (
        a.min[0] - margin < b.max[0]
        and b.min[0] - margin < a.max[0]
        and a.min[1] - margin < b.max[1]
        and b.min[1] - margin < a.max[1]
    )


def _box_from_center(cx, cy, z0, dx, dy, dz) -> Aabb3:
    return Aabb3((cx - dx / 2, cy - dy / 2, z0), (cx + dx / 2, cy + dy / 2, z0 + dz))


def generate_scene(seed, cfg: RunConfig) -> Scene:
    """Build one deterministic scene; ``seed`` may be an int or int list."""
    rng = np.random.default_rng(seed)

    lx = rng.uniform(cfg.room_min_side, cfg.room_max_side)
    ly = rng.uniform(cfg.room_min_side, cfg.room_max_side)
    h = rng.uniform(cfg.room_min_height, cfg.room_max_height)
    room = Aabb3((0.0, 0.0, 0.0), (lx, ly, h))
    w = WALL_THICKNESS

    boxes: list[Aabb3] = []
    classes: list[int] = []

    def add(box: Aabb3, class_id: int) -> int:
        boxes.append(box)
        classes.append(class_id)
        return len(boxes) - 1

    # perimeter walls: the two x-facing walls span full y, the y-facing
    # walls are inset so corners are not double covered
    add(Aabb3((0.0, 0.0, 0.0), (w, ly, h)), WALL)
    add(Aabb3((lx - w, 0.0, 0.0), (lx, ly, h)), WALL)
    add(Aabb3((w, 0.0, 0.0), (lx - w, w, h)), WALL)
    add(Aabb3((w, ly - w, 0.0), (lx - w, ly, h)), WALL)

    # tables: the room is cut into one strip per table along its longer
    # axis, and each table keeps a seat ring inside its own strip, so the
    # requested table count always fits or the config is rejected
    n_tables = int(rng.integers(cfg.tables_min, cfg.tables_max + 1))
    table_ids: list[int] = []
    ring = 0.6  # max seat depth + tuck gap beyond the table edge
    table_max_side = 1.5
    long_axis = 0 if lx >= ly else 1
    long_len = max(lx, ly)
    strip = (long_len - 2 * w) / max(n_tables, 1)
    if n_tables and strip < table_max_side + 2 * ring:
        raise ValueError(
            f"room side {long_len:.2f} too small for {n_tables} tables with seat rings"
        )
    for ti in range(n_tables):
        tdx = rng.uniform(1.1, table_max_side)
        tdy = rng.uniform(1.1, table_max_side)
        tdz = rng.uniform(0.65, 0.78)
        half = (tdx if long_axis == 0 else tdy) / 2
        lo = w + ti * strip + ring + half
        hi = w + (ti + 1) * strip - ring - half
        along = rng.uniform(lo, hi)
        other_len = ly if long_axis == 0 else lx
        other_half = (tdy if long_axis == 0 else tdx) / 2
        across = rng.uniform(w + ring + other_half, other_len - w - ring - other_half)
        cx, cy = (along, across) if long_axis == 0 else (across, along)
        box = _box_from_center(cx, cy, 0.0, tdx, tdy, tdz)
        table_ids.append(add(box, TABLE))

    # chairs tucked close against distinct table sides: the small gap plus
    # the tall shared vertical projection makes chair/table a guaranteed
    # hang-on pair, so every chair has relational context
    def _seat_size():
        return rng.uniform(0.38, 0.52), rng.uniform(0.38, 0.52), rng.uniform(0.40, 0.50)

    seat_ids: list[int] = []
    for ti in table_ids:
        table = boxes[ti]
        n_seats = int(rng.integers(cfg.seats_per_table_min, cfg.seats_per_table_max + 1))
        sides = rng.permutation(4)[:n_seats]
        for side in sides:
            for _try in range(20):
                sdx, sdy, sdz = _seat_size()
                gap = rng.uniform(0.02, 0.08)
                if side == 0:  # -x side
                    cx = table.min[0] - gap - sdx / 2
                    cy = rng.uniform(table.min[1] + 0.3, table.max[1] - 0.3)
                elif side == 1:  # +x side
                    cx = table.max[0] + gap + sdx / 2
                    cy = rng.uniform(table.min[1] + 0.3, table.max[1] - 0.3)
                elif side == 2:  # -y side
                    cy = table.min[1] - gap - sdy / 2
                    cx = rng.uniform(table.min[0] + 0.3, table.max[0] - 0.3)
                else:  # +y side
                    cy = table.max[1] + gap + sdy / 2
                    cx = rng.uniform(table.min[0] + 0.3, table.max[0] - 0.3)
                box = _box_from_center(cx, cy, 0.0, sdx, sdy, sdz)
                if box.min[0] < w or box.max[0] > lx - w or box.min[1] < w or box.max[1] > ly - w:
                    continue
                if any(
                    _footprints_overlap(box, boxes[i], margin=0.02)
                    for i in seat_ids + table_ids
                ):
                    continue
                seat_ids.append(add(box, CHAIR))
                break

    # stools are seats relabeled after placement: same size distribution,
    # same table-side slots, so a single object carries no class evidence
    # and only group context (a stool has no same-class sibling) separates
    # the two seat classes; at least two chairs always remain
    n_stools = min(cfg.stools_per_scene, max(len(seat_ids) - 2, 0))
    if n_stools > 0:
        for si in rng.choice(np.array(seat_ids), size=n_stools, replace=False):
            classes[int(si)] = STOOL

    # cups standing on table tops
    for ti in table_ids:
        table = boxes[ti]
        placed: list[Aabb3] = []
        n_cups = int(rng.integers(cfg.cups_per_table_min, cfg.cups_per_table_max + 1))
        for _ in range(n_cups):
            for _try in range(50):
                cdx = rng.uniform(0.08, 0.15)
                cdy = rng.uniform(0.08, 0.15)
                cdz = rng.uniform(0.10, 0.20)
                cx = rng.uniform(table.min[0] + cdx / 2 + 0.02, table.max[0] - cdx / 2 - 0.02)
                cy = rng.uniform(table.min[1] + cdy / 2 + 0.02, table.max[1] - cdy / 2 - 0.02)
                z0 = table.max[2] + rng.uniform(0.0, 0.02)
                box = _box_from_center(cx, cy, z0, cdx, cdy, cdz)
                if any(_footprints_overlap(box, c, margin=0.01) for c in placed):
                    continue
                placed.append(box)
                add(box, CUP)
                break

    # boards floating just off a wall face
    n_boards = int(rng.integers(cfg.boards_min, cfg.boards_max + 1))
    board_spans: dict[int, list[tuple[float, float]]] = {0: [], 1: [], 2: [], 3: []}
    for _ in range(n_boards):
        for _try in range(40):
            side = int(rng.integers(0, 4))
            length = rng.uniform(0.6, 1.2)
            thick = 0.05
            bh = rng.uniform(0.5, 0.9)
            z0 = rng.uniform(0.9, h - bh - 0.1)
            gap = rng.uniform(0.0, 0.04)
            span_max = (ly if side < 2 else lx) - 0.3
            lo = rng.uniform(0.3, span_max - length)
            if any(lo < e and s < lo + length for s, e in board_spans[side]):
                continue
            if side == 0:
                box = Aabb3((w + gap, lo, z0), (w + gap + thick, lo + length, z0 + bh))
            elif side == 1:
                box = Aabb3((lx - w - gap - thick, lo, z0), (lx - w - gap, lo + length, z0 + bh))
            elif side == 2:
                box = Aabb3((lo, w + gap, z0), (lo + length, w + gap + thick, z0 + bh))
            else:
                box = Aabb3((lo, ly - w - gap - thick, z0), (lo + length, ly - w - gap, z0 + bh))
            board_spans[side].append((lo, lo + length))
            add(box, BOARD)
            break

    objects = [
        AnnotatedObject(box=b, class_id=c, instance_id=i)
        for i, (b, c) in enumerate(zip(boxes, classes))
    ]
    return Scene(id=0, room=room, objects=objects)


def generate_scenes(cfg: RunConfig, n: int | None = None) -> list[Scene]:
    """n seeded scenes derived from cfg.seed; scene i gets id i."""
    n = cfg.n_scenes if n is None else n
    scenes = []
    for i in range(n):
        scene = generate_scene([cfg.seed, 11, i], cfg)
        scene.id = i
        scenes.append(scene)
    return scenes


def scene_to_dict(scene: Scene) -> dict:
    return {
        "id": scene.id,
        "room": {"min": list(scene.room.min), "max": list(scene.room.max)},
        "objects": [
            {
                "id": i,
                "class_id": o.class_id,
                "instance_id": o.instance_id,
                "box": {"min": list(o.box.min), "max": list(o.box.max)},
            }
            for i, o in enumerate(scene.objects)
        ],
    }


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True) + "\n")


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}:{e.lineno}: invalid scene file: {e.msg}") from e
    try:
        room = Aabb3(tuple(data["room"]["min"]), tuple(data["room"]["max"]))
        objects = [
            AnnotatedObject(
                box=Aabb3(tuple(entry["box"]["min"]), tuple(entry["box"]["max"])),
                class_id=int(entry["class_id"]),
                instance_id=int(entry["instance_id"]),
            )
            for entry in data["objects"]
        ]
        scene = Scene(id=int(data["id"]), room=room, objects=objects)
    except (KeyError, TypeError, ValueError) as e:
        raise SceneFormatError(f"{path}: bad scene record: {e}") from e
    return scene


def load_scene_dir(path) -> list[Scene]:
    path = Path(path)
    files = sorted(path.glob("*.json"))
    if not files:
        raise SceneFormatError(f"{path}: no scene files (*.json) found")
    return [load_scene(f) for f in files]
