"""Trainable pairwise relation module.

For each selected pair (i, j) the concatenated object features go through
a shared pair encoder MLP.  Per anchor, the encoded pair vectors are
aggregated (sum by default, mean optionally) and fused by a second MLP
into that object's relation feature.  The encoded pair vectors also feed
four small classifier heads, one logit per relation per pair.

Anchors that have no pairs get an all-zero relation feature, so "no
context" is represented as exactly no signal rather than the fusion
network's response to a zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import MlpCache, MlpParams, init_mlp, mlp_backward, mlp_forward
from .pairing import PairSet

RELATION_NAMES = ("group", "same_as", "support", "hang_on")


@dataclass
class RelationModuleParams:
    pair_encoder: MlpParams  # input 2*D
    fusion: MlpParams  # input = encoder output, output = relation feature
    heads: dict[str, MlpParams]  # encoder output -> 1 logit each
    aggregate: str = "sum"  # "sum" | "mean"

    def __post_init__(self):
        if self.aggregate not in ("sum", "mean"):
            raise ValueError(f"unknown aggregate {self.aggregate!r}")
        enc_out = self.pair_encoder.output_dim
        if self.fusion.input_dim != enc_out:
            raise ValueError("fusion input dim must equal encoder output dim")
        for name, head in self.heads.items():
            if head.input_dim != enc_out:
                raise ValueError(f"head {name!r} input dim must equal encoder output dim")
            if head.output_dim != 1:
                raise ValueError(f"head {name!r} must emit a single logit")

    @property
    def feature_dim(self) -> int:
        return self.pair_encoder.input_dim // 2

    @property
    def relation_dim(self) -> int:
        return self.fusion.output_dim

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = self.pair_encoder.named_arrays("pair_encoder")
        out.update(self.fusion.named_arrays("fusion"))
        for name, head in self.heads.items():
            out.update(head.named_arrays(f"head.{name}"))
        return out

    def zeros_like(self) -> "RelationModuleParams":
        return RelationModuleParams(
            pair_encoder=self.pair_encoder.zeros_like(),
            fusion=self.fusion.zeros_like(),
            heads={name: head.zeros_like() for name, head in self.heads.items()},
            aggregate=self.aggregate,
        )


def init_relation_module(
    feature_dim: int,
    encoder_dims,
    fusion_dims,
    head_hidden: int,
    rng: np.random.Generator,
    aggregate: str = "sum",
) -> RelationModuleParams:
    encoder = init_mlp(2 * feature_dim, encoder_dims, rng)
    fusion = init_mlp(encoder.output_dim, fusion_dims, rng)
    heads = {
        name: init_mlp(encoder.output_dim, (head_hidden, 1), rng) for name in RELATION_NAMES
    }
    return RelationModuleParams(encoder, fusion, heads, aggregate)


@dataclass
class RelationForwardCache:
    anchors: np.ndarray
    partners: np.ndarray
    counts: np.ndarray  # pairs per anchor
    encoder_cache: MlpCache
    fusion_cache: MlpCache
    head_caches: dict[str, MlpCache]
    n_objects: int


def relation_forward(
    p: RelationModuleParams, features: np.ndarray, pairs: PairSet
) -> tuple[np.ndarray, dict[str, np.ndarray], RelationForwardCache]:
    """Relation features (n, relation_dim) and per-pair logits per relation.

    ``features`` is the (n, D) object feature matrix; ``pairs`` indexes into
    its rows.  Pair order in the logits follows ``pairs.pairs``.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if features.ndim != 2 or features.shape[1] != p.feature_dim:
        raise ValueError(f"features shape {features.shape} does not match dim {p.feature_dim}")
    anchors, partners = pairs.index_arrays()
    if anchors.size and max(anchors.max(), partners.max()) >= n:
        raise ValueError("pair index out of range")

    x = np.concatenate([features[anchors], features[partners]], axis=1)
    encoded, encoder_cache = mlp_forward(p.pair_encoder, x)

    counts = np.bincount(anchors, minlength=n).astype(np.float64)
    pooled = np.zeros((n, encoded.shape[1]))
    np.add.at(pooled, anchors, encoded)
    if p.aggregate == "mean":
        pooled /= np.maximum(counts, 1.0)[:, None]

    fused, fusion_cache = mlp_forward(p.fusion, pooled)
    has_pairs = counts > 0
    relation_features = np.where(has_pairs[:, None], fused, 0.0)

    pair_logits = {}
    head_caches = {}
    for name, head in p.heads.items():
        z, cache = mlp_forward(head, encoded)
        pair_logits[name] = z[:, 0]
        head_caches[name] = cache

    cache = RelationForwardCache(
        anchors=anchors,
        partners=partners,
        counts=counts,
        encoder_cache=encoder_cache,
        fusion_cache=fusion_cache,
        head_caches=head_caches,
        n_objects=n,
    )
    return relation_features, pair_logits, cache


def relation_backward(
    p: RelationModuleParams,
    cache: RelationForwardCache,
    d_relation_features: np.ndarray,
    d_pair_logits: dict[str, np.ndarray] | None = None,
) -> tuple[RelationModuleParams, np.ndarray]:
    """Reverse-mode gradients of a scalar loss through the whole module.

    Takes the loss gradients w.r.t. the relation features and (optionally)
    the pair logits from the matching forward call; returns gradients with
    the parameter structure of ``p`` plus the gradient w.r.t. the input
    feature matrix.
    """
    grads = p.zeros_like()
    n_pairs = cache.anchors.size

    d_fused = np.asarray(d_relation_features, dtype=np.float64)
    if d_fused.shape != (cache.n_objects, p.relation_dim):
        raise ValueError("relation feature gradient shape mismatch")
    # anchors without pairs emitted a hard zero, not the fusion output
    d_fused = np.where((cache.counts > 0)[:, None], d_fused, 0.0)
    fusion_grads, d_pooled = mlp_backward(p.fusion, cache.fusion_cache, d_fused)
    grads.fusion = fusion_grads
    if p.aggregate == "mean":
        d_pooled = d_pooled / np.maximum(cache.counts, 1.0)[:, None]
    d_encoded = d_pooled[cache.anchors]

    if d_pair_logits:
        for name, dz in d_pair_logits.items():
            dz = np.asarray(dz, dtype=np.float64).reshape(n_pairs, 1)
            head_grads, d_enc_head = mlp_backward(p.heads[name], cache.head_caches[name], dz)
            grads.heads[name] = head_grads
            d_encoded = d_encoded + d_enc_head

    encoder_grads, dx = mlp_backward(p.pair_encoder, cache.encoder_cache, d_encoded)
    grads.pair_encoder = encoder_grads

    d_features = np.zeros((cache.n_objects, p.feature_dim))
    np.add.at(d_features, cache.anchors, dx[:, : p.feature_dim])
    np.add.at(d_features, cache.partners, dx[:, p.feature_dim :])
    return grads, d_features
