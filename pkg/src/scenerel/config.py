"""Run configuration: one flat record of every tunable knob.

A config file is a flat JSON object whose keys are RunConfig field names;
unknown keys are rejected so typos fail loudly.  All randomness in a run
flows from ``seed`` through :func:`rng_for` with small integer domain
tags, which keeps scene generation, proposal jitter, pairing and
parameter init independently reproducible.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def rng_for(*key: int) -> np.random.Generator:
    """Deterministic generator for a (seed, domain, index...) key."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


@dataclass
class RunConfig:
    seed: int = 0

    # relation-label thresholds: axis gaps (meters) and overlap ratios
    tau_x: float = 0.1
    tau_y: float = 0.1
    tau_z: float = 0.1
    tau_xy: float = 0.5
    tau_xz: float = 0.5
    tau_yz: float = 0.5

    # pair selection
    k: int = 8
    pair_mode: str = "random"  # "random" | "nearest"

    # relation module
    feature_dim: int = 32
    encoder_dims: tuple[int, ...] = (64, 64, 64, 64)
    fusion_dims: tuple[int, ...] = (64, 32)
    relation_head_hidden: int = 64
    aggregate: str = "sum"  # "sum" | "mean"

    # detection heads
    detection_hidden: int = 64

    # synthetic scenes
    n_scenes: int = 200
    holdout_fraction: float = 0.2
    room_min_side: float = 6.0
    room_max_side: float = 7.0
    room_min_height: float = 2.5
    room_max_height: float = 3.0
    tables_min: int = 2
    tables_max: int = 2
    seats_per_table_min: int = 3
    seats_per_table_max: int = 4
    cups_per_table_min: int = 1
    cups_per_table_max: int = 2
    boards_min: int = 1
    boards_max: int = 2
    stools_per_scene: int = 1

    # proposal generation; center sigma is relative to each box extent
    jitter_copies: int = 2
    jitter_center_sigma: float = 0.03
    jitter_size_sigma: float = 0.05
    fragment_prob: float = 0.3
    n_negatives: int = 4

    # training; base learning rate steps down by lr_decay_factor at 60%
    # and 85% of the schedule (1.0 disables the decay)
    epochs: int = 60
    learning_rate: float = 0.001
    lr_decay_factor: float = 0.1
    use_rm: bool = True
    predict_relations: bool = True
    loss_style: str = "proposal"  # "proposal" | "voting"
    lambda1: float = 1.0
    lambda2: float = 10.0
    lambda3: float = 0.5
    lambda4: float = 0.1

    # inference
    nms_iou: float = 0.5

    def validate(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name in ("tau_x", "tau_y", "tau_z"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("tau_xy", "tau_xz", "tau_yz"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.pair_mode not in ("random", "nearest"):
            raise ValueError(f"unknown pair_mode {self.pair_mode!r}")
        if self.aggregate not in ("sum", "mean"):
            raise ValueError(f"unknown aggregate {self.aggregate!r}")
        if self.loss_style not in ("proposal", "voting"):
            raise ValueError(f"unknown loss_style {self.loss_style!r}")
        if self.feature_dim < 28:
            raise ValueError("feature_dim must be >= 28 (descriptor channel count)")
        if not self.encoder_dims or not self.fusion_dims:
            raise ValueError("encoder_dims and fusion_dims must be non-empty")
        if self.n_scenes < 2:
            raise ValueError("n_scenes must be >= 2")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must be in (0, 1)")
        if not 3.0 <= self.room_min_side <= self.room_max_side:
            raise ValueError("room sides must satisfy 3 <= min <= max")
        if not 2.0 <= self.room_min_height <= self.room_max_height:
            raise ValueError("room heights must satisfy 2 <= min <= max")
        for lo, hi in (
            ("tables_min", "tables_max"),
            ("seats_per_table_min", "seats_per_table_max"),
            ("cups_per_table_min", "cups_per_table_max"),
            ("boards_min", "boards_max"),
        ):
            if not 0 <= getattr(self, lo) <= getattr(self, hi):
                raise ValueError(f"need 0 <= {lo} <= {hi}")
        if self.tables_min < 1:
            raise ValueError("tables_min must be >= 1")
        if self.seats_per_table_min < 1:
            raise ValueError("seats_per_table_min must be >= 1")
        if self.stools_per_scene < 0:
            raise ValueError("stools_per_scene must be >= 0")
        if self.jitter_copies < 1:
            raise ValueError("jitter_copies must be >= 1")
        if self.jitter_center_sigma < 0 or self.jitter_size_sigma < 0:
            raise ValueError("jitter sigmas must be >= 0")
        if not 0.0 <= self.fragment_prob <= 1.0:
            raise ValueError("fragment_prob must be in [0, 1]")
        if self.n_negatives < 0:
            raise ValueError("n_negatives must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must be in (0, 1]")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError("nms_iou must be in (0, 1]")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["encoder_dims"] = list(self.encoder_dims)
        out["fusion_dims"] = list(self.fusion_dims)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for name, value in data.items():
            if name in ("encoder_dims", "fusion_dims"):
                kwargs[name] = tuple(int(v) for v in value)
            else:
                kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def load_config(path) -> RunConfig:
    """Read a flat JSON key-value config file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}:{e.lineno}: invalid config file: {e.msg}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object of key-value pairs")
    return RunConfig.from_dict(data)


def config_help_lines() -> list[str]:
    """One ``name = default`` line per RunConfig key, for --help output."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        lines.append(f"  {f.name} = {default!r}")
    return lines
