import numpy as np
import pytest

from scenerel.pairing import PairingConfig, build_pairs


def random_centers(rng, n):
    return rng.uniform(-3, 3, size=(n, 3))


class TestConfig:
    def test_defaults(self):
        cfg = PairingConfig()
        assert cfg.k == 8 and cfg.mode == "random"

    def test_validation(self):
        with pytest.raises(ValueError):
            PairingConfig(k=0)
        with pytest.raises(ValueError):
            PairingConfig(mode="closest")


class TestRandomMode:
    def test_determinism(self):
        rng = np.random.default_rng(0)
        centers = random_centers(rng, 12)
        cfg = PairingConfig(k=4, mode="random", seed=99)
        a = build_pairs(12, centers, cfg)
        b = build_pairs(12, centers, cfg)
        assert a.pairs == b.pairs
        assert a.per_anchor == b.per_anchor

    def test_different_seeds_differ(self):
        rng = np.random.default_rng(0)
        centers = random_centers(rng, 30)
        a = build_pairs(30, centers, PairingConfig(k=8, mode="random", seed=1))
        b = build_pairs(30, centers, PairingConfig(k=8, mode="random", seed=2))
        assert a.pairs != b.pairs

    def test_no_self_pairs_and_cardinality(self):
        rng = np.random.default_rng(1)
        for n in (2, 3, 9, 40):
            centers = random_centers(rng, n)
            ps = build_pairs(n, centers, PairingConfig(k=8, mode="random", seed=5))
            for i, j in ps.pairs:
                assert i != j
            for i in range(n):
                assert len(ps.per_anchor[i]) == 8
            assert len(ps.pairs) == 8 * n

    def test_without_replacement_when_possible(self):
        rng = np.random.default_rng(2)
        centers = random_centers(rng, 20)
        ps = build_pairs(20, centers, PairingConfig(k=8, mode="random", seed=3))
        for i in range(20):
            partners = ps.per_anchor[i]
            assert len(set(partners)) == len(partners)

    def test_replacement_for_tiny_scenes(self):
        centers = np.zeros((3, 3))
        ps = build_pairs(3, centers, PairingConfig(k=8, mode="random", seed=7))
        for i in range(3):
            partners = ps.per_anchor[i]
            assert len(partners) == 8
            assert set(partners) <= {j for j in range(3) if j != i}

    def test_single_object_scene_degenerates(self):
        ps = build_pairs(1, np.zeros((1, 3)), PairingConfig(k=8, mode="random", seed=0))
        assert ps.pairs == []
        assert ps.per_anchor[0] == []
        assert ps.degenerate == [0]

    def test_zero_objects_rejected(self):
        with pytest.raises(ValueError):
            build_pairs(0, np.zeros((0, 3)), PairingConfig())


class TestNearestMode:
    def test_line_of_objects(self):
        centers = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        ps = build_pairs(4, centers, PairingConfig(k=2, mode="nearest", seed=0))
        assert ps.per_anchor[0] == [1, 2]
        assert ps.per_anchor[3] == [2, 1]

    def test_tie_break_by_index(self):
        centers = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [5, 0, 0]], dtype=float)
        ps = build_pairs(4, centers, PairingConfig(k=2, mode="nearest", seed=0))
        assert ps.per_anchor[0] == [1, 2]  # equal distance, lower index first

    def test_cycling_when_few_objects(self):
        centers = np.array([[0, 0, 0], [1, 0, 0], [3, 0, 0]], dtype=float)
        ps = build_pairs(3, centers, PairingConfig(k=5, mode="nearest", seed=0))
        assert ps.per_anchor[0] == [1, 2, 1, 2, 1]

    def test_matches_brute_force_k_smallest(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 50))
            k = int(rng.integers(1, 6))
            centers = random_centers(rng, n)
            ps = build_pairs(n, centers, PairingConfig(k=k, mode="nearest", seed=0))
            for i in range(n):
                dists = [
                    (float(np.linalg.norm(centers[i] - centers[j])), j)
                    for j in range(n)
                    if j != i
                ]
                dists.sort()
                want = [j for _, j in dists[: min(k, len(dists))]]
                want = [want[x % len(want)] for x in range(k)]
                assert ps.per_anchor[i] == want

    def test_seed_does_not_matter_in_nearest_mode(self):
        rng = np.random.default_rng(4)
        centers = random_centers(rng, 15)
        a = build_pairs(15, centers, PairingConfig(k=3, mode="nearest", seed=1))
        b = build_pairs(15, centers, PairingConfig(k=3, mode="nearest", seed=2))
        assert a.pairs == b.pairs


def test_index_arrays_alignment():
    centers = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
    ps = build_pairs(3, centers, PairingConfig(k=2, mode="nearest", seed=0))
    anchors, partners = ps.index_arrays()
    assert list(zip(anchors.tolist(), partners.tolist())) == ps.pairs
