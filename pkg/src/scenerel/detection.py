"""Toy end-to-end detection pipeline over synthetic scenes.

The stand-in for a learned proposal stage is ground-truth jitter: each
annotated object yields a few noisy box copies, tables are optionally
split into two fragments (exercising the same-instance relation), and
random background boxes are added as negatives.  Each proposal inherits
the class/instance identity of its best-IoU ground-truth object when
that IoU is at least 0.25, otherwise it carries the background sentinel.

Object features are a handcrafted geometric descriptor plus an
"appearance" signature channel looked up from the matched object's
class.  The two ambiguous classes share one signature value, so nothing
in a single proposal's feature vector can separate them; only relation
context can.  Per-wall distances are included so that the spatial
relation predicates of a pair are decodable from the two feature
vectors alone.

Training runs whole-scene batches through (optionally) the relation
module and the two detection heads, with a weighted multi-task loss:
classification, box regression on matched proposals, and binary
cross-entropy on the four relation logits.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, rng_for
from .geometry import Aabb3, ScoredBox, iou3d, nms3d
from .mlp import (
    MlpParams,
    adam_step,
    AdamState,
    bce_loss,
    init_mlp,
    mlp_backward,
    mlp_forward,
    smooth_l1_loss,
    softmax,
    softmax_cross_entropy,
    superclass_cross_entropy,
)
from .pairing import PairingConfig, PairSet, build_pairs
from .relations import (
    BACKGROUND_ID,
    RelationThresholds,
    relation_labels_arrays,
)
from .relnet import (
    RELATION_NAMES,
    RelationModuleParams,
    init_relation_module,
    relation_backward,
    relation_forward,
)
from .scenes import BACKGROUND_CLASS, CLASS_NAMES, N_CLASSES, TABLE, Scene

# seed-domain tags for rng_for
_D_PROPOSALS = 12
_D_FEATURES = 13
_D_PAIRS = 14
_D_INIT = 15
_D_EVAL_PAIRS = 16

# appearance signature per class; chair (2) and stool (5) are identical
# on purpose, background gets its own value
CLASS_SIGNATURES = (-1.5, -0.9, 0.3, -0.3, 0.9, 0.3)
BACKGROUND_SIGNATURE = 1.5
SIGNATURE_NOISE = 0.05
DISTRACTOR_NOISE = 0.1

N_BASE_CHANNELS = 27
# channels that depend on where the box sits relative to the room shell
WALL_DISTANCE_CHANNELS = tuple(range(11, 20))
SIGNATURE_CHANNEL = 26

# per-channel scale factors keeping all values in [-5, 5] over generated rooms
_EXTENT_SCALE = 0.5
_LOG_RATIO_SCALE = 0.5
_DISTANCE_SCALE = 0.5

FEATURE_NORMALIZATION = {
    "extent_scale": _EXTENT_SCALE,
    "log_ratio_scale": _LOG_RATIO_SCALE,
    "distance_scale": _DISTANCE_SCALE,
    "signature_noise": SIGNATURE_NOISE,
    "distractor_noise": DISTRACTOR_NOISE,
}

MIN_EXTENT = 0.02


class NumericError(RuntimeError):
    """Training or inference produced a non-finite value."""


@dataclass
class Proposal:
    """A candidate box with its ground-truth match metadata."""

    box: Aabb3
    matched_gt: int | None
    best_iou: float


@dataclass
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 10.0
    lambda3: float = 0.5
    lambda4: float = 0.1

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class DetectionResult:
    class_id: int
    box: Aabb3
    confidence: float


def thresholds_from_config(cfg: RunConfig) -> RelationThresholds:
    return RelationThresholds(
        tau_x=cfg.tau_x,
        tau_y=cfg.tau_y,
        tau_z=cfg.tau_z,
        tau_xy=cfg.tau_xy,
        tau_xz=cfg.tau_xz,
        tau_yz=cfg.tau_yz,
    )


def loss_weights_from_config(cfg: RunConfig) -> LossWeights:
    return LossWeights(cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda4)


def _jittered(box: Aabb3, rng: np.random.Generator, cfg: RunConfig) -> Aabb3:
    center = np.array(box.center())
    extent = np.array(box.extent())
    # center noise is relative to the extent so thin boxes stay well matched
    center = center + extent * rng.normal(0.0, cfg.jitter_center_sigma, size=3)
    extent = np.maximum(extent * np.exp(rng.normal(0.0, cfg.jitter_size_sigma, size=3)), MIN_EXTENT)
    return Aabb3(tuple(center - extent / 2), tuple(center + extent / 2))


def _split_longest_horizontal(box: Aabb3) -> tuple[Aabb3, Aabb3]:
    axis = 0 if box.max[0] - box.min[0] >= box.max[1] - box.min[1] else 1
    mid = (box.min[axis] + box.max[axis]) / 2.0
    lo_max = list(box.max)
    lo_max[axis] = mid
    hi_min = list(box.min)
    hi_min[axis] = mid
    return Aabb3(box.min, tuple(lo_max)), Aabb3(tuple(hi_min), box.max)


def generate_proposals(scene: Scene, seed, cfg: RunConfig) -> list[Proposal]:
    """Jittered GT copies + optional table fragments + background negatives."""
    rng = np.random.default_rng(seed)
    raw: list[Aabb3] = []
    for obj in scene.objects:
        for _ in range(cfg.jitter_copies):
            raw.append(_jittered(obj.box, rng, cfg))
    for obj in scene.objects:
        if obj.class_id == TABLE and rng.random() < cfg.fragment_prob:
            raw.extend(_split_longest_horizontal(obj.box))

    room = scene.room
    for _ in range(cfg.n_negatives):
        for _try in range(100):
            ext = rng.uniform(0.2, 0.8, size=3)
            cx = rng.uniform(room.min[0] + ext[0] / 2, room.max[0] - ext[0] / 2)
            cy = rng.uniform(room.min[1] + ext[1] / 2, room.max[1] - ext[1] / 2)
            z0 = rng.uniform(0.0, room.max[2] - ext[2])
            box = Aabb3((cx - ext[0] / 2, cy - ext[1] / 2, z0), (cx + ext[0] / 2, cy + ext[1] / 2, z0 + ext[2]))
            if all(iou3d(box, o.box) < 0.25 for o in scene.objects):
                raw.append(box)
                break

    proposals = []
    for box in raw:
        ious = [iou3d(box, o.box) for o in scene.objects]
        best = int(np.argmax(ious)) if ious else 0
        best_iou = ious[best] if ious else 0.0
        matched = best if best_iou >= 0.25 else None
        proposals.append(Proposal(box=box, matched_gt=matched, best_iou=best_iou))
    return proposals


def extract_features(scene: Scene, proposals: list[Proposal], cfg: RunConfig) -> np.ndarray:
    """(n, feature_dim) descriptor matrix for the proposals of one scene.

    Channels: 0-2 extents, 3-5 log extent ratios, 6-8 z min/max/center,
    9-10 log volume/footprint, 11-19 per-wall and nearest-wall distances,
    20-25 matched-object offset and log size ratio (the stand-in for the
    crop appearance a point backbone would provide; zero when unmatched),
    26 class-appearance signature, the rest low-amplitude distractor
    noise.
    """
    n = len(proposals)
    d = cfg.feature_dim
    rng = rng_for(cfg.seed, _D_FEATURES, scene.id)
    feats = np.zeros((n, d))
    room = scene.room
    room_extent = np.array(room.extent())
    for i, prop in enumerate(proposals):
        box = prop.box
        cx, cy, cz = box.center()
        dx, dy, dz = (max(e, 1e-9) for e in box.extent())
        feats[i, 0:3] = np.array([dx, dy, dz]) * _EXTENT_SCALE
        feats[i, 3] = math.log(dx / dy) * _LOG_RATIO_SCALE
        feats[i, 4] = math.log(dy / dz) * _LOG_RATIO_SCALE
        feats[i, 5] = math.log(dz / dx) * _LOG_RATIO_SCALE
        feats[i, 6] = box.min[2]
        feats[i, 7] = box.max[2]
        feats[i, 8] = cz
        feats[i, 9] = math.log(dx * dy * dz) / 3.0
        feats[i, 10] = math.log(dx * dy) / 2.0
        side = (
            cx - room.min[0],
            room.max[0] - cx,
            cy - room.min[1],
            room.max[1] - cy,
        )
        feats[i, 11:15] = np.array(side) * _DISTANCE_SCALE
        face = (
            box.min[0] - room.min[0],
            room.max[0] - box.max[0],
            box.min[1] - room.min[1],
            room.max[1] - box.max[1],
        )
        feats[i, 15:19] = np.array(face) * _DISTANCE_SCALE
        feats[i, 19] = min(side) * _DISTANCE_SCALE
        if prop.matched_gt is not None:
            gt_box = scene.objects[prop.matched_gt].box
            gcenter = np.array(gt_box.center())
            gextent = np.maximum(np.array(gt_box.extent()), 1e-9)
            sig = CLASS_SIGNATURES[scene.objects[prop.matched_gt].class_id]
        else:
            gcenter = np.array([cx, cy, cz])
            gextent = np.array([dx, dy, dz])
            sig = BACKGROUND_SIGNATURE
        # extent-relative, matching the box-regression parametrization
        feats[i, 20:23] = (gcenter - np.array([cx, cy, cz])) / np.array([dx, dy, dz])
        feats[i, 23:26] = np.log(gextent / np.array([dx, dy, dz]))
        feats[i, SIGNATURE_CHANNEL] = sig
    feats[:, SIGNATURE_CHANNEL] += rng.normal(0.0, SIGNATURE_NOISE, size=n)
    if d > N_BASE_CHANNELS:
        feats[:, N_BASE_CHANNELS:] = rng.normal(0.0, DISTRACTOR_NOISE, size=(n, d - N_BASE_CHANNELS))
    return feats


def encode_box(gt: Aabb3, prop: Aabb3) -> np.ndarray:
    """6-vector residual: extent-normalized center offset + log extent ratio.

    Offsets are relative to the proposal's own extents, so the regression
    error budget scales with object size instead of room size.
    """
    gc = np.array(gt.center())
    pc = np.array(prop.center())
    ge = np.maximum(np.array(gt.extent()), 1e-9)
    pe = np.maximum(np.array(prop.extent()), 1e-9)
    return np.concatenate([(gc - pc) / pe, np.log(ge / pe)])


def decode_box(residual, prop: Aabb3) -> Aabb3:
    residual = np.asarray(residual, dtype=np.float64)
    pc = np.array(prop.center())
    pe = np.maximum(np.array(prop.extent()), 1e-9)
    center = pc + residual[:3] * pe
    extent = pe * np.exp(residual[3:])
    return Aabb3(tuple(center - extent / 2), tuple(center + extent / 2))


@dataclass
class DetectionHeadParams:
    classifier: MlpParams  # combined features -> C+1 logits
    box_regressor: MlpParams  # combined features -> 6 residuals

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = self.classifier.named_arrays("classifier")
        out.update(self.box_regressor.named_arrays("box_regressor"))
        return out

    def zeros_like(self) -> "DetectionHeadParams":
        return DetectionHeadParams(self.classifier.zeros_like(), self.box_regressor.zeros_like())


def init_detection_heads(input_dim: int, hidden: int, rng: np.random.Generator) -> DetectionHeadParams:
    return DetectionHeadParams(
        classifier=init_mlp(input_dim, (hidden, N_CLASSES + 1), rng),
        box_regressor=init_mlp(input_dim, (hidden, 6), rng),
    )


def detection_heads_forward(params: DetectionHeadParams, combined: np.ndarray):
    class_logits, cls_cache = mlp_forward(params.classifier, combined)
    residuals, box_cache = mlp_forward(params.box_regressor, combined)
    return class_logits, residuals, (cls_cache, box_cache)


def detection_heads_backward(params, caches, d_class_logits, d_residuals):
    cls_cache, box_cache = caches
    cls_grads, d_in_cls = mlp_backward(params.classifier, cls_cache, d_class_logits)
    box_grads, d_in_box = mlp_backward(params.box_regressor, box_cache, d_residuals)
    return DetectionHeadParams(cls_grads, box_grads), d_in_cls + d_in_box


def total_loss(
    class_logits: np.ndarray,
    box_residuals: np.ndarray,
    class_targets: np.ndarray,
    box_targets: np.ndarray,
    reg_mask: np.ndarray,
    relation_logits: dict[str, np.ndarray] | None,
    relation_targets: dict[str, np.ndarray] | None,
    w: LossWeights,
    style: str = "proposal",
):
    """Weighted multi-task loss.

    Returns (total, components, d_class_logits, d_box_residuals,
    d_relation_logits).  ``style`` picks the weight profile: "proposal"
    uses lambda1*cls + lambda2*reg + lambda3*rn; "voting" adds a
    foreground-vs-background objectness term and uses lambda1*obj +
    lambda2*reg + lambda3*cls + lambda4*rn.
    """
    if style not in ("proposal", "voting"):
        raise ValueError(f"unknown loss style {style!r}")

    loss_cls, d_cls = softmax_cross_entropy(class_logits, class_targets)
    loss_reg, d_box = smooth_l1_loss(box_residuals, box_targets, reg_mask)

    loss_rn = 0.0
    d_rel: dict[str, np.ndarray] = {}
    if relation_logits:
        assert relation_targets is not None
        per = []
        for name in relation_logits:
            li, gi = bce_loss(relation_logits[name], relation_targets[name])
            per.append(li)
            d_rel[name] = gi
        loss_rn = float(np.mean(per))
        for name in d_rel:
            d_rel[name] = d_rel[name] / len(per)

    components = {"cls": loss_cls, "reg": loss_reg, "rn": loss_rn}
    if style == "proposal":
        total = w.lambda1 * loss_cls + w.lambda2 * loss_reg + w.lambda3 * loss_rn
        d_class = w.lambda1 * d_cls
        d_box = w.lambda2 * d_box
        rn_w = w.lambda3
    else:
        fg = np.ones((class_logits.shape[0], N_CLASSES + 1), dtype=bool)
        fg[:, BACKGROUND_CLASS] = False
        target_is_fg = np.asarray(class_targets) != BACKGROUND_CLASS
        in_super = np.where(target_is_fg[:, None], fg, ~fg)
        loss_obj, d_obj = superclass_cross_entropy(class_logits, in_super)
        components["obj"] = loss_obj
        total = (
            w.lambda1 * loss_obj
            + w.lambda2 * loss_reg
            + w.lambda3 * loss_cls
            + w.lambda4 * loss_rn
        )
        d_class = w.lambda1 * d_obj + w.lambda3 * d_cls
        d_box = w.lambda2 * d_box
        rn_w = w.lambda4
    d_rel = {name: rn_w * g for name, g in d_rel.items()}
    components["total"] = total
    return total, components, d_class, d_box, d_rel


@dataclass
class SceneBatch:
    """Precomputed per-scene training data (everything but the pairs)."""

    scene: Scene
    proposals: list[Proposal]
    features: np.ndarray
    class_targets: np.ndarray
    box_targets: np.ndarray
    reg_mask: np.ndarray
    prop_mins: np.ndarray
    prop_maxs: np.ndarray
    prop_class_ids: np.ndarray
    prop_instance_ids: np.ndarray
    centers: np.ndarray


def build_scene_batch(scene: Scene, cfg: RunConfig) -> SceneBatch:
    proposals = generate_proposals(scene, rng_for(cfg.seed, _D_PROPOSALS, scene.id), cfg)
    features = extract_features(scene, proposals, cfg)
    n = len(proposals)

    class_targets = np.full(n, BACKGROUND_CLASS, dtype=np.int64)
    box_targets = np.zeros((n, 6))
    reg_mask = np.zeros(n, dtype=bool)
    prop_class = np.full(n, BACKGROUND_ID, dtype=np.int64)
    prop_inst = np.full(n, BACKGROUND_ID, dtype=np.int64)
    for i, p in enumerate(proposals):
        if p.matched_gt is not None:
            gt = scene.objects[p.matched_gt]
            prop_class[i] = gt.class_id
            prop_inst[i] = gt.instance_id
            reg_mask[i] = True
            box_targets[i] = encode_box(gt.box, p.box)
            if p.best_iou >= 0.5:
                class_targets[i] = gt.class_id

    mins = np.array([p.box.min for p in proposals]).reshape(n, 3)
    maxs = np.array([p.box.max for p in proposals]).reshape(n, 3)
    centers = (mins + maxs) / 2.0
    return SceneBatch(
        scene=scene,
        proposals=proposals,
        features=features,
        class_targets=class_targets,
        box_targets=box_targets,
        reg_mask=reg_mask,
        prop_mins=mins,
        prop_maxs=maxs,
        prop_class_ids=prop_class,
        prop_instance_ids=prop_inst,
        centers=centers,
    )


def batch_relation_targets(batch: SceneBatch, pairs: PairSet, t: RelationThresholds):
    anchors, partners = pairs.index_arrays()
    return relation_labels_arrays(
        batch.prop_mins,
        batch.prop_maxs,
        batch.prop_class_ids,
        batch.prop_instance_ids,
        anchors,
        partners,
        t,
    )


@dataclass
class DetectionModel:
    cfg: RunConfig
    heads: DetectionHeadParams
    relation_module: RelationModuleParams | None

    def named_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        if self.relation_module is not None:
            out.update(self.relation_module.named_arrays())
        out.update(self.heads.named_arrays())
        return out

    @property
    def combined_dim(self) -> int:
        extra = self.relation_module.relation_dim if self.relation_module else 0
        return self.cfg.feature_dim + extra


def init_model(cfg: RunConfig) -> DetectionModel:
    rng = rng_for(cfg.seed, _D_INIT)
    relmod = None
    input_dim = cfg.feature_dim
    if cfg.use_rm:
        relmod = init_relation_module(
            cfg.feature_dim,
            cfg.encoder_dims,
            cfg.fusion_dims,
            cfg.relation_head_hidden,
            rng,
            aggregate=cfg.aggregate,
        )
        input_dim += relmod.relation_dim
    heads = init_detection_heads(input_dim, cfg.detection_hidden, rng)
    return DetectionModel(cfg=cfg, heads=heads, relation_module=relmod)


def _pairs_for_batch(batch: SceneBatch, cfg: RunConfig, epoch: int | None) -> PairSet:
    """Training pairs are resampled per epoch in random mode; nearest mode
    and evaluation (epoch None) use a fixed per-scene seed."""
    n = len(batch.proposals)
    if cfg.pair_mode == "random":
        key = (
            rng_for(cfg.seed, _D_EVAL_PAIRS, batch.scene.id)
            if epoch is None
            else rng_for(cfg.seed, _D_PAIRS, batch.scene.id, epoch)
        )
        seed = int(key.integers(0, 2**63 - 1))
        pcfg = PairingConfig(k=cfg.k, mode="random", seed=seed)
    else:
        pcfg = PairingConfig(k=cfg.k, mode="nearest", seed=0)
    return build_pairs(n, batch.centers, pcfg)


def _forward_scene(model: DetectionModel, batch: SceneBatch, pairs: PairSet):
    if model.relation_module is not None:
        rel_feats, rel_logits, rel_cache = relation_forward(
            model.relation_module, batch.features, pairs
        )
        combined = np.concatenate([batch.features, rel_feats], axis=1)
    else:
        rel_logits, rel_cache = {}, None
        combined = batch.features
    class_logits, residuals, head_caches = detection_heads_forward(model.heads, combined)
    return combined, class_logits, residuals, rel_logits, rel_cache, head_caches


@dataclass
class TrainResult:
    model: DetectionModel
    metrics: list[dict]
    train_scenes: list[Scene]
    holdout_scenes: list[Scene]


def _holdout_relation_accuracy(model, batches, t: RelationThresholds):
    counts = {name: [0, 0] for name in RELATION_NAMES}
    for batch in batches:
        pairs = _pairs_for_batch(batch, model.cfg, epoch=None)
        if not pairs.pairs:
            continue
        _, _, _, rel_logits, _, _ = _forward_scene(model, batch, pairs)
        targets = batch_relation_targets(batch, pairs, t)
        for name in RELATION_NAMES:
            pred = rel_logits[name] > 0.0
            counts[name][0] += int((pred == targets[name]).sum())
            counts[name][1] += targets[name].size
    return {
        name: (hit / tot if tot else None) for name, (hit, tot) in counts.items()
    }


def split_scenes(scenes: list[Scene], holdout_fraction: float):
    n_hold = max(1, round(len(scenes) * holdout_fraction))
    if n_hold >= len(scenes):
        raise ValueError("holdout fraction leaves no training scenes")
    return scenes[:-n_hold], scenes[-n_hold:]


def train(cfg: RunConfig, scenes: list[Scene] | None = None) -> TrainResult:
    """Full training run; deterministic for a fixed config."""
    cfg.validate()
    from .scenes import generate_scenes  # local import to avoid cycle at module load

    if scenes is None:
        scenes = generate_scenes(cfg)
    train_scenes, holdout_scenes = split_scenes(scenes, cfg.holdout_fraction)
    t = thresholds_from_config(cfg)
    weights = loss_weights_from_config(cfg)

    train_batches = [build_scene_batch(s, cfg) for s in train_scenes]
    holdout_batches = [build_scene_batch(s, cfg) for s in holdout_scenes]

    model = init_model(cfg)
    params = model.named_arrays()
    state = AdamState(learning_rate=cfg.learning_rate)

    nearest_pairs = None
    if cfg.pair_mode == "nearest":
        nearest_pairs = [_pairs_for_batch(b, cfg, epoch=0) for b in train_batches]

    decay_epochs = {int(cfg.epochs * 0.6), int(cfg.epochs * 0.85)}
    metrics: list[dict] = []
    for epoch in range(cfg.epochs):
        if epoch > 0 and epoch in decay_epochs:
            state.learning_rate *= cfg.lr_decay_factor
        sums = {"total": 0.0, "cls": 0.0, "reg": 0.0, "rn": 0.0, "obj": 0.0}
        for bi, batch in enumerate(train_batches):
            pairs = (
                nearest_pairs[bi]
                if nearest_pairs is not None
                else _pairs_for_batch(batch, cfg, epoch)
            )
            combined, class_logits, residuals, rel_logits, rel_cache, head_caches = (
                _forward_scene(model, batch, pairs)
            )
            use_rel_loss = bool(rel_logits) and cfg.predict_relations and pairs.pairs
            rel_targets = (
                batch_relation_targets(batch, pairs, t) if use_rel_loss else None
            )
            total, comps, d_cls, d_box, d_rel = total_loss(
                class_logits,
                residuals,
                batch.class_targets,
                batch.box_targets,
                batch.reg_mask,
                rel_logits if use_rel_loss else None,
                rel_targets,
                weights,
                style=cfg.loss_style,
            )
            if not math.isfinite(total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, scene {batch.scene.id}"
                )
            head_grads, d_combined = detection_heads_backward(
                model.heads, head_caches, d_cls, d_box
            )
            grads = head_grads.named_arrays()
            if model.relation_module is not None:
                d_rel_feats = d_combined[:, cfg.feature_dim :]
                rel_grads, _ = relation_backward(
                    model.relation_module, rel_cache, d_rel_feats, d_rel or None
                )
                grads.update(rel_grads.named_arrays())
            adam_step(state, params, grads)
            for key in sums:
                sums[key] += comps.get(key, 0.0)

        record = {
            "epoch": epoch,
            "loss_total": sums["total"] / len(train_batches),
            "loss_cls": sums["cls"] / len(train_batches),
            "loss_reg": sums["reg"] / len(train_batches),
            "loss_rn": sums["rn"] / len(train_batches),
        }
        if cfg.loss_style == "voting":
            record["loss_obj"] = sums["obj"] / len(train_batches)
        if model.relation_module is not None:
            record["holdout_relation_accuracy"] = _holdout_relation_accuracy(
                model, holdout_batches, t
            )
        metrics.append(record)

    return TrainResult(
        model=model,
        metrics=metrics,
        train_scenes=train_scenes,
        holdout_scenes=holdout_scenes,
    )


def save_model(model: DetectionModel, path) -> None:
    config = model.cfg.to_dict()
    config["n_classes"] = N_CLASSES
    config["class_names"] = list(CLASS_NAMES)
    config["feature_normalization"] = FEATURE_NORMALIZATION
    save_checkpoint(path, model.named_arrays(), config)


def load_model(path) -> DetectionModel:
    tensors, config = load_checkpoint(path)
    config = {
        k: v
        for k, v in config.items()
        if k not in ("n_classes", "class_names", "feature_normalization")
    }
    cfg = RunConfig.from_dict(config)
    model = init_model(cfg)
    params = model.named_arrays()
    if set(params) != set(tensors):
        missing = sorted(set(params) ^ set(tensors))
        raise ValueError(f"checkpoint does not match config, differing tensors: {missing}")
    for name, arr in params.items():
        if arr.shape != tensors[name].shape:
            raise ValueError(
                f"checkpoint tensor {name} has shape {tensors[name].shape}, expected {arr.shape}"
            )
        arr[...] = tensors[name]
    return model


def infer(model: DetectionModel, scene: Scene) -> list[DetectionResult]:
    """Proposals -> features -> heads -> decode -> class-aware NMS."""
    cfg = model.cfg
    batch = build_scene_batch(scene, cfg)
    if not batch.proposals:
        return []
    pairs = _pairs_for_batch(batch, cfg, epoch=None)
    _, class_logits, residuals, _, _, _ = _forward_scene(model, batch, pairs)
    if not np.all(np.isfinite(class_logits)) or not np.all(np.isfinite(residuals)):
        raise NumericError("non-finite model output during inference")
    probs = softmax(class_logits)

    scored: list[ScoredBox] = []
    for i, prop in enumerate(batch.proposals):
        class_id = int(np.argmax(probs[i]))
        if class_id == BACKGROUND_CLASS:
            continue
        box = decode_box(residuals[i], prop.box)
        scored.append(ScoredBox(box=box, score=float(probs[i, class_id]), class_id=class_id))
    keep = nms3d(scored, cfg.nms_iou)
    results = [
        DetectionResult(class_id=scored[i].class_id, box=scored[i].box, confidence=scored[i].score)
        for i in keep
    ]
    results.sort(key=lambda r: -r.confidence)
    return results


ABLATION_VARIANTS = ("baseline", "rm_minus", "rm_random", "rm_nearest")


def variant_config(cfg: RunConfig, variant: str) -> RunConfig:
    if variant == "baseline":
        return dataclasses.replace(cfg, use_rm=False, predict_relations=False)
    if variant == "rm_minus":
        return dataclasses.replace(cfg, use_rm=True, predict_relations=False)
    if variant == "rm_random":
        return dataclasses.replace(cfg, use_rm=True, predict_relations=True, pair_mode="random")
    if variant == "rm_nearest":
        return dataclasses.replace(cfg, use_rm=True, predict_relations=True, pair_mode="nearest")
    raise ValueError(f"unknown ablation variant {variant!r}")


def run_ablation(cfg: RunConfig, variants=ABLATION_VARIANTS) -> list[dict]:
    """Train every variant on one scene set and report holdout mAP."""
    from .evaluation import ap_report
    from .scenes import generate_scenes

    scenes = generate_scenes(cfg)
    rows = []
    for variant in variants:
        vcfg = variant_config(cfg, variant)
        result = train(vcfg, scenes=scenes)
        detections = [infer(result.model, s) for s in result.holdout_scenes]
        gts = [s.objects for s in result.holdout_scenes]
        report = ap_report(detections, gts)
        rows.append(
            {
                "variant": variant,
                "map_0.25": report.map_by_threshold[0.25],
                "map_0.5": report.map_by_threshold[0.5],
            }
        )
    return rows
