import dataclasses

import numpy as np
import pytest

from scenerel.config import RunConfig
from scenerel.detection import (
    N_BASE_CHANNELS,
    SIGNATURE_CHANNEL,
    WALL_DISTANCE_CHANNELS,
    DetectionModel,
    LossWeights,
    build_scene_batch,
    decode_box,
    detection_heads_forward,
    encode_box,
    extract_features,
    generate_proposals,
    infer,
    init_detection_heads,
    init_model,
    load_model,
    save_model,
    total_loss,
    train,
)
from scenerel.geometry import Aabb3, iou3d
from scenerel.relations import RelationThresholds, relation_labels
from scenerel.scenes import (
    BACKGROUND_CLASS,
    CHAIR,
    STOOL,
    TABLE,
    N_CLASSES,
    Scene,
    generate_scene,
)

CFG = RunConfig(n_scenes=6, epochs=2)
T = RelationThresholds()


def tiny_config(**overrides):
    base = dict(n_scenes=6, epochs=3, seed=0)
    base.update(overrides)
    return RunConfig(**base)


class TestProposals:
    def test_zero_jitter_reproduces_ground_truth(self):
        cfg = dataclasses.replace(
            CFG, jitter_center_sigma=0.0, jitter_size_sigma=0.0, n_negatives=0,
            fragment_prob=0.0, jitter_copies=1,
        )
        scene = generate_scene(3, cfg)
        proposals = generate_proposals(scene, 7, cfg)
        assert len(proposals) == len(scene.objects)
        for p, o in zip(proposals, scene.objects):
            assert p.best_iou == pytest.approx(1.0, abs=1e-12)
            assert p.matched_gt is not None
            assert scene.objects[p.matched_gt] == o

    def test_negatives_are_background(self):
        scene = generate_scene(4, CFG)
        proposals = generate_proposals(scene, 8, CFG)
        negatives = [p for p in proposals if p.matched_gt is None]
        assert negatives, "expected at least one background negative"
        for p in negatives:
            assert all(iou3d(p.box, o.box) < 0.25 for o in scene.objects)

    def test_fragments_share_instance_and_relate_as_same(self):
        cfg = dataclasses.replace(CFG, fragment_prob=1.0)
        scene = generate_scene(5, cfg)
        proposals = generate_proposals(scene, 9, cfg)
        # fragments are the half-extent proposals matched to a table
        frags = [
            p
            for p in proposals
            if p.matched_gt is not None
            and scene.objects[p.matched_gt].class_id == TABLE
            and p.best_iou == pytest.approx(0.5, abs=1e-9)
        ]
        n_tables = sum(1 for o in scene.objects if o.class_id == TABLE)
        assert len(frags) == 2 * n_tables
        a, b = frags[0], frags[1]
        assert a.matched_gt == b.matched_gt
        gt = scene.objects[a.matched_gt]
        labels = relation_labels(
            dataclasses.replace(gt, box=a.box),
            dataclasses.replace(gt, box=b.box),
            T,
        )
        assert labels.same_as and labels.group

    def test_deterministic_given_seed(self):
        scene = generate_scene(6, CFG)
        a = generate_proposals(scene, 11, CFG)
        b = generate_proposals(scene, 11, CFG)
        assert [p.box for p in a] == [p.box for p in b]


class TestFeatures:
    def test_ambiguous_classes_identical_up_to_noise(self):
        cfg = dataclasses.replace(
            CFG, jitter_center_sigma=0.0, jitter_size_sigma=0.0, n_negatives=0,
            fragment_prob=0.0, jitter_copies=1,
        )
        scene = generate_scene(3, cfg)
        box = Aabb3((2.0, 2.0, 0.0), (2.5, 2.5, 0.45))
        chair = dataclasses.replace(scene.objects[0], box=box, class_id=CHAIR)
        stool = dataclasses.replace(scene.objects[0], box=box, class_id=STOOL)
        sa = Scene(id=scene.id, room=scene.room, objects=[chair])
        sb = Scene(id=scene.id, room=scene.room, objects=[stool])
        fa = extract_features(sa, generate_proposals(sa, 1, cfg), cfg)
        fb = extract_features(sb, generate_proposals(sb, 1, cfg), cfg)
        # identical boxes, shared signature, same seeded noise
        assert np.allclose(fa, fb, atol=1e-12)

    def test_translation_changes_only_wall_channels(self):
        scene = generate_scene(7, CFG)
        proposals = generate_proposals(scene, 2, CFG)
        feats = extract_features(scene, proposals, CFG)

        offset = (0.37, -0.21, 0.0)
        moved = Scene(
            id=scene.id,
            room=scene.room,
            objects=[dataclasses.replace(o, box=o.box.translated(offset)) for o in scene.objects],
        )
        moved_props = [dataclasses.replace(p, box=p.box.translated(offset)) for p in proposals]
        feats_moved = extract_features(moved, moved_props, CFG)

        wall = list(WALL_DISTANCE_CHANNELS)
        keep = [c for c in range(CFG.feature_dim) if c not in wall]
        assert np.allclose(feats[:, keep], feats_moved[:, keep], atol=1e-9)
        assert not np.allclose(feats[:, wall], feats_moved[:, wall], atol=1e-6)

    def test_channels_bounded_over_many_scenes(self):
        cfg = dataclasses.replace(CFG)
        lo, hi = 0.0, 0.0
        for seed in range(1000):
            scene = generate_scene(seed, cfg)
            scene.id = seed
            feats = extract_features(scene, generate_proposals(scene, seed, cfg), cfg)
            lo = min(lo, feats.min())
            hi = max(hi, feats.max())
        assert -5.0 <= lo and hi <= 5.0, (lo, hi)

    def test_signature_channel_shared_by_ambiguous_pair(self):
        from scenerel.detection import CLASS_SIGNATURES

        assert CLASS_SIGNATURES[CHAIR] == CLASS_SIGNATURES[STOOL]
        others = [s for c, s in enumerate(CLASS_SIGNATURES) if c != STOOL]
        assert len(set(others)) == len(others)


class TestBoxCoding:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            c1 = rng.uniform(-3, 3, 3)
            e1 = rng.uniform(0.05, 2.0, 3)
            c2 = c1 + rng.normal(0, 0.2, 3)
            e2 = e1 * np.exp(rng.normal(0, 0.2, 3))
            gt = Aabb3(tuple(c1 - e1 / 2), tuple(c1 + e1 / 2))
            prop = Aabb3(tuple(c2 - e2 / 2), tuple(c2 + e2 / 2))
            back = decode_box(encode_box(gt, prop), prop)
            assert np.allclose(back.min, gt.min, atol=1e-9)
            assert np.allclose(back.max, gt.max, atol=1e-9)

    def test_zero_residual_decodes_to_proposal(self):
        prop = Aabb3((0, 0, 0), (1, 2, 3))
        out = decode_box(np.zeros(6), prop)
        assert out == prop


class TestHeads:
    def test_zero_parameters_give_uniform_classes_and_identity_boxes(self):
        rng = np.random.default_rng(1)
        heads = init_detection_heads(10, 8, rng)
        zero = heads.zeros_like()
        x = rng.normal(size=(5, 10))
        logits, residuals, _ = detection_heads_forward(zero, x)
        assert np.all(logits == 0.0)  # softmax of zeros is uniform
        assert np.all(residuals == 0.0)  # decoded box = proposal box

    def test_baseline_heads_consume_feature_dim_only(self):
        cfg = tiny_config(use_rm=False, predict_relations=False)
        model = init_model(cfg)
        assert model.relation_module is None
        assert model.heads.classifier.input_dim == cfg.feature_dim

    def test_rm_heads_consume_concatenated_dim(self):
        cfg = tiny_config(use_rm=True)
        model = init_model(cfg)
        assert model.heads.classifier.input_dim == cfg.feature_dim + cfg.fusion_dims[-1]


class TestTotalLoss:
    def _random_inputs(self, rng, n=12, n_pairs=20):
        logits = rng.normal(size=(n, N_CLASSES + 1))
        residuals = rng.normal(scale=0.3, size=(n, 6))
        class_targets = rng.integers(0, N_CLASSES + 1, size=n)
        box_targets = rng.normal(scale=0.3, size=(n, 6))
        reg_mask = rng.random(n) > 0.3
        rel_logits = {k: rng.normal(size=n_pairs) for k in ("group", "same_as")}
        rel_targets = {k: rng.random(n_pairs) > 0.7 for k in ("group", "same_as")}
        return logits, residuals, class_targets, box_targets, reg_mask, rel_logits, rel_targets

    def test_weighted_decomposition(self):
        rng = np.random.default_rng(2)
        logits, residuals, ct, bt, mask, rl, rt = self._random_inputs(rng)
        w = LossWeights(1.0, 10.0, 0.5, 0.1)
        total, comps, _, _, _ = total_loss(logits, residuals, ct, bt, mask, rl, rt, w)
        manual = w.lambda1 * comps["cls"] + w.lambda2 * comps["reg"] + w.lambda3 * comps["rn"]
        assert total == pytest.approx(manual, abs=1e-12)

    def test_zero_relation_weight_reduces_to_baseline(self):
        rng = np.random.default_rng(3)
        logits, residuals, ct, bt, mask, rl, rt = self._random_inputs(rng)
        w0 = LossWeights(1.0, 10.0, 0.0, 0.0)
        total_with, _, dc1, db1, _ = total_loss(logits, residuals, ct, bt, mask, rl, rt, w0)
        total_none, _, dc2, db2, _ = total_loss(
            logits, residuals, ct, bt, mask, None, None, w0
        )
        assert total_with == pytest.approx(total_none, abs=1e-12)
        assert np.array_equal(dc1, dc2) and np.array_equal(db1, db2)

    def test_perfect_predictions_give_negligible_loss(self):
        n = 8
        class_targets = np.arange(n) % (N_CLASSES + 1)
        logits = np.full((n, N_CLASSES + 1), -20.0)
        logits[np.arange(n), class_targets] = 20.0
        box_targets = np.random.default_rng(4).normal(scale=0.2, size=(n, 6))
        residuals = box_targets.copy()
        mask = np.ones(n, dtype=bool)
        rel_targets = {"group": np.array([True, False])}
        rel_logits = {"group": np.array([20.0, -20.0])}
        total, _, _, _, _ = total_loss(
            logits, residuals, class_targets, box_targets, mask,
            rel_logits, rel_targets, LossWeights(),
        )
        assert total < 1e-6

    def test_no_positive_proposals_zero_regression(self):
        rng = np.random.default_rng(5)
        logits, residuals, ct, bt, _, rl, rt = self._random_inputs(rng)
        _, comps, _, d_box, _ = total_loss(
            logits, residuals, ct, bt, np.zeros(len(ct), bool), rl, rt, LossWeights()
        )
        assert comps["reg"] == 0.0 and np.all(d_box == 0)

    @pytest.mark.parametrize("style", ["proposal", "voting"])
    def test_gradients_match_finite_differences(self, style):
        rng = np.random.default_rng(6)
        logits, residuals, ct, bt, mask, rl, rt = self._random_inputs(rng, n=6, n_pairs=8)
        w = LossWeights(0.5, 1.0, 0.1, 0.1)

        def loss_fn():
            return total_loss(logits, residuals, ct, bt, mask, rl, rt, w, style=style)[0]

        _, _, d_cls, d_box, d_rel = total_loss(
            logits, residuals, ct, bt, mask, rl, rt, w, style=style
        )
        h = 1e-6
        for arr, grad in ((logits, d_cls), (residuals, d_box), (rl["group"], d_rel["group"])):
            flat, gflat = arr.ravel(), np.asarray(grad).ravel()
            for idx in range(flat.size):
                old = flat[idx]
                flat[idx] = old + h
                lp = loss_fn()
                flat[idx] = old - h
                lm = loss_fn()
                flat[idx] = old
                fd = (lp - lm) / (2 * h)
                assert abs(fd - gflat[idx]) <= 1e-5 * max(1.0, abs(fd))

    def test_voting_style_adds_objectness_component(self):
        rng = np.random.default_rng(7)
        logits, residuals, ct, bt, mask, rl, rt = self._random_inputs(rng)
        w = LossWeights(0.5, 1.0, 0.1, 0.1)
        total, comps, _, _, _ = total_loss(
            logits, residuals, ct, bt, mask, rl, rt, w, style="voting"
        )
        assert "obj" in comps
        manual = (
            w.lambda1 * comps["obj"]
            + w.lambda2 * comps["reg"]
            + w.lambda3 * comps["cls"]
            + w.lambda4 * comps["rn"]
        )
        assert total == pytest.approx(manual, abs=1e-12)

    def test_unknown_style_rejected(self):
        rng = np.random.default_rng(8)
        logits, residuals, ct, bt, mask, rl, rt = self._random_inputs(rng)
        with pytest.raises(ValueError):
            total_loss(logits, residuals, ct, bt, mask, rl, rt, LossWeights(), style="fancy")


class TestTraining:
    def test_deterministic_checkpoints(self, tmp_path):
        cfg = tiny_config()
        a = train(cfg)
        b = train(cfg)
        ta = a.model.named_arrays()
        tb = b.model.named_arrays()
        assert set(ta) == set(tb)
        for name in ta:
            assert np.array_equal(ta[name], tb[name]), name
        assert a.metrics == b.metrics

    def test_invalid_config_rejected_before_work(self):
        cfg = tiny_config()
        cfg.epochs = 0
        with pytest.raises(ValueError):
            train(cfg)

    def test_rm_minus_variant_trains(self):
        cfg = tiny_config(use_rm=True, predict_relations=False)
        result = train(cfg)
        assert result.metrics[-1]["loss_rn"] == 0.0
        # relation classifier heads stay at their initialization
        init = init_model(cfg)
        for name, arr in result.model.relation_module.named_arrays().items():
            if name.startswith("head."):
                assert np.array_equal(arr, init.relation_module.named_arrays()[name])

    def test_metrics_log_has_all_components(self):
        cfg = tiny_config()
        result = train(cfg)
        assert len(result.metrics) == cfg.epochs
        rec = result.metrics[-1]
        for key in ("epoch", "loss_total", "loss_cls", "loss_reg", "loss_rn"):
            assert key in rec
        assert set(rec["holdout_relation_accuracy"]) == {
            "group", "same_as", "support", "hang_on",
        }

    def test_voting_style_logs_objectness(self):
        cfg = tiny_config(loss_style="voting", lambda1=0.5, lambda2=1.0, lambda3=0.1, lambda4=0.1)
        result = train(cfg)
        assert "loss_obj" in result.metrics[-1]

    def test_checkpoint_round_trip(self, tmp_path):
        cfg = tiny_config()
        result = train(cfg)
        path = tmp_path / "model.bin"
        save_model(result.model, path)
        loaded = load_model(path)
        assert isinstance(loaded, DetectionModel)
        assert loaded.cfg == cfg
        got = loaded.named_arrays()
        for name, arr in result.model.named_arrays().items():
            assert np.array_equal(arr, got[name]), name

    def test_checkpoint_dim_mismatch_rejected(self, tmp_path):
        cfg = tiny_config()
        result = train(cfg)
        path = tmp_path / "model.bin"
        save_model(result.model, path)
        from scenerel.checkpoint import load_checkpoint, save_checkpoint

        tensors, config = load_checkpoint(path)
        config["feature_dim"] = 40
        save_checkpoint(path, tensors, config)
        with pytest.raises(ValueError):
            load_model(path)


class TestInference:
    def test_empty_scene_gives_empty_result(self):
        cfg = tiny_config(n_negatives=0)
        model = init_model(cfg)
        empty = Scene(id=0, room=Aabb3((0, 0, 0), (6, 6, 2.7)), objects=[])
        assert infer(model, empty) == []

    def test_detections_sorted_and_foreground_only(self):
        cfg = tiny_config()
        result = train(cfg)
        dets = infer(result.model, result.holdout_scenes[0])
        confs = [d.confidence for d in dets]
        assert confs == sorted(confs, reverse=True)
        for d in dets:
            assert 0 <= d.class_id < BACKGROUND_CLASS
