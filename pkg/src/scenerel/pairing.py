"""Partner selection: k partners per object, random or nearest-center.

Random mode samples partners uniformly from the other objects, without
replacement while enough distinct partners exist and with replacement
otherwise.  Nearest mode takes the k smallest center distances (ties by
ascending index), cycling through the sorted candidates when fewer than
k other objects exist.  Both modes are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PairingConfig:
    k: int = 8
    mode: str = "random"  # "random" | "nearest"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.mode not in ("random", "nearest"):
            raise ValueError(f"unknown pairing mode {self.mode!r}")


@dataclass
class PairSet:
    """Selected (anchor, partner) pairs for one scene.

    ``per_anchor[i]`` lists anchor i's partners in selection order;
    anchors with no possible partner (single-object scene) get an empty
    list and appear in ``degenerate``.
    """

    pairs: list[tuple[int, int]] = field(default_factory=list)
    per_anchor: dict[int, list[int]] = field(default_factory=dict)
    degenerate: list[int] = field(default_factory=list)

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        anchors = np.array([a for a, _ in self.pairs], dtype=np.intp)
        partners = np.array([b for _, b in self.pairs], dtype=np.intp)
        return anchors, partners


def build_pairs(n_objects: int, centers, cfg: PairingConfig) -> PairSet:
    """Select cfg.k partners for each of n_objects anchors.

    ``centers`` is an (n_objects, 3) array of box centers; it is only
    consulted in nearest mode.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    centers = np.asarray(centers, dtype=np.float64).reshape(n_objects, 3)

    out = PairSet()
    if cfg.mode == "random":
        rng = np.random.default_rng(cfg.seed)
        for i in range(n_objects):
            others = np.concatenate([np.arange(i), np.arange(i + 1, n_objects)])
            if others.size == 0:
                out.per_anchor[i] = []
                out.degenerate.append(i)
                continue
            replace = others.size < cfg.k
            chosen = rng.choice(others, size=cfg.k, replace=replace)
            out.per_anchor[i] = [int(j) for j in chosen]
    else:
        for i in range(n_objects):
            others = np.concatenate([np.arange(i), np.arange(i + 1, n_objects)])
            if others.size == 0:
                out.per_anchor[i] = []
                out.degenerate.append(i)
                continue
            diff = centers[others] - centers[i]
            dist = np.sqrt(np.sum(diff * diff, axis=1))
            order = others[np.lexsort((others, dist))]
            out.per_anchor[i] = [int(order[j % order.size]) for j in range(cfg.k)]

    for i in range(n_objects):
        for j in out.per_anchor[i]:
            out.pairs.append((i, j))
    return out
