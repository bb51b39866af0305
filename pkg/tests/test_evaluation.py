import numpy as np
import pytest

from scenerel.detection import DetectionResult
from scenerel.evaluation import (
    BenchReport,
    ap_report,
    average_precision,
    bench_relations,
    relation_metrics,
)
from scenerel.geometry import Aabb3
from scenerel.relations import AnnotatedObject


def det(box, conf, class_id=0):
    return DetectionResult(class_id=class_id, box=box, confidence=conf)


def gt(box, class_id=0, instance_id=0):
    return AnnotatedObject(box=box, class_id=class_id, instance_id=instance_id)


UNIT = Aabb3((0, 0, 0), (1, 1, 1))


def shifted(frac):
    """Box with IoU = (1-frac)/(1+frac) against UNIT along x."""
    return Aabb3((frac, 0, 0), (1 + frac, 1, 1))


class TestAveragePrecision:
    def test_single_perfect_match(self):
        # IoU 0.6 >= 0.5 threshold
        aps = average_precision([[det(shifted(0.25), 0.9)]], [[gt(UNIT)]], 0.5)
        assert aps[0] == 1.0

    def test_false_positive_then_true_positive(self):
        dets = [det(shifted(0.82), 0.9), det(shifted(0.05), 0.8)]
        aps = average_precision([dets], [[gt(UNIT)]], 0.5)
        assert aps[0] == pytest.approx(0.5, abs=1e-12)

    def test_no_detections(self):
        aps = average_precision([[]], [[gt(UNIT)]], 0.5)
        assert aps[0] == 0.0

    def test_class_without_ground_truth_is_excluded(self):
        dets = [det(UNIT, 0.9, class_id=3)]
        aps = average_precision([dets], [[gt(UNIT, class_id=0)]], 0.5)
        assert set(aps) == {0}

    def test_each_gt_matched_once(self):
        # two identical detections on one object: one TP, one FP
        dets = [det(UNIT, 0.9), det(UNIT, 0.8)]
        aps = average_precision([dets], [[gt(UNIT)]], 0.5)
        assert aps[0] == 1.0  # TP ranks first, so AP unaffected by the dup

    def test_detection_order_invariance(self):
        rng = np.random.default_rng(0)
        gts = [[gt(UNIT), gt(Aabb3((3, 3, 3), (4, 4, 4)))]]
        dets = [
            det(shifted(0.1), 0.9),
            det(Aabb3((3.05, 3, 3), (4.05, 4, 4)), 0.7),
            det(shifted(0.9), 0.4),
        ]
        base = average_precision([dets], gts, 0.5)[0]
        for _ in range(5):
            perm = list(rng.permutation(len(dets)))
            shuffled = [dets[i] for i in perm]
            assert average_precision([shuffled], gts, 0.5)[0] == base

    def test_zero_confidence_false_positive_never_helps(self):
        gts = [[gt(UNIT)]]
        dets = [det(shifted(0.2), 0.9)]
        base = average_precision([dets], gts, 0.5)[0]
        worse = average_precision([dets + [det(shifted(0.95), 0.0)]], gts, 0.5)[0]
        assert worse <= base

    def test_matching_is_per_scene(self):
        # a detection in scene 0 cannot match ground truth in scene 1
        dets = [[det(UNIT, 0.9)], []]
        gts = [[], [gt(UNIT)]]
        assert average_precision(dets, gts, 0.5)[0] == 0.0

    def test_scene_count_mismatch(self):
        with pytest.raises(ValueError):
            average_precision([[]], [[], []], 0.5)


class TestApReport:
    def _random_setup(self, rng, n_scenes=6):
        gts, dets = [], []
        for _ in range(n_scenes):
            scene_gts, scene_dets = [], []
            for _ in range(int(rng.integers(1, 6))):
                c = rng.uniform(0, 8, 3)
                e = rng.uniform(0.3, 1.5, 3)
                box = Aabb3(tuple(c - e / 2), tuple(c + e / 2))
                cls = int(rng.integers(0, 3))
                scene_gts.append(gt(box, cls, 0))
                if rng.random() < 0.8:
                    off = rng.normal(0, 0.15, 3)
                    dbox = Aabb3(tuple(c - e / 2 + off), tuple(c + e / 2 + off))
                    pred_cls = cls if rng.random() < 0.8 else int(rng.integers(0, 3))
                    scene_dets.append(det(dbox, float(rng.random()), pred_cls))
            gts.append(scene_gts)
            dets.append(scene_dets)
        return dets, gts

    def test_lower_threshold_never_hurts(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            dets, gts = self._random_setup(rng)
            report = ap_report(dets, gts)
            assert report.map_by_threshold[0.25] >= report.map_by_threshold[0.5] - 1e-12

    def test_counts(self):
        rng = np.random.default_rng(2)
        dets, gts = self._random_setup(rng)
        report = ap_report(dets, gts)
        assert report.n_ground_truth == sum(len(g) for g in gts)
        assert report.n_detections == sum(len(d) for d in dets)

    def test_to_dict_is_json_friendly(self):
        import json

        rng = np.random.default_rng(3)
        dets, gts = self._random_setup(rng)
        payload = ap_report(dets, gts).to_dict()
        json.dumps(payload)


class TestRelationMetrics:
    def test_perfect_logits(self):
        targets = {"group": np.array([True, False, True])}
        logits = {"group": np.array([20.0, -20.0, 20.0])}
        m = relation_metrics(logits, targets)["group"]
        assert m.accuracy == 1.0 and m.precision == 1.0 and m.recall == 1.0

    def test_zero_logits_predict_false(self):
        targets = {"group": np.array([True, False, False, False])}
        logits = {"group": np.zeros(4)}
        m = relation_metrics(logits, targets)["group"]
        assert m.accuracy == 0.75  # the negative-class rate
        assert m.precision is None  # no positive predictions
        assert m.recall == 0.0

    def test_empty_input_flagged_undefined(self):
        m = relation_metrics({"group": np.zeros(0)}, {"group": np.zeros(0, bool)})["group"]
        assert m.accuracy is None and m.precision is None and m.recall is None
        assert m.n_pairs == 0

    def test_matches_manual_confusion_recount(self):
        rng = np.random.default_rng(4)
        logits = {"x": rng.normal(size=200)}
        targets = {"x": rng.random(200) > 0.6}
        m = relation_metrics(logits, targets)["x"]
        pred = logits["x"] > 0
        tp = int(np.sum(pred & targets["x"]))
        fp = int(np.sum(pred & ~targets["x"]))
        fn = int(np.sum(~pred & targets["x"]))
        tn = int(np.sum(~pred & ~targets["x"]))
        assert m.accuracy == (tp + tn) / 200
        assert m.precision == tp / (tp + fp)
        assert m.recall == tp / (tp + fn)


class TestBench:
    def test_reports_scalar_and_batched(self):
        reports = bench_relations(n_objects=64, k=4, reps=3, seed=0)
        assert [r.implementation for r in reports] == ["scalar", "batched"]
        for r in reports:
            assert isinstance(r, BenchReport)
            assert r.pair_count == 64 * 4
            assert r.wall_time_s > 0
            assert r.per_pair_s == pytest.approx(r.wall_time_s / r.pair_count)
            assert r.reps == 3

    def test_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            bench_relations(1)
        with pytest.raises(ValueError):
            bench_relations(8, reps=0)
