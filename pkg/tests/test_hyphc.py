import itertools
import warnings

import numpy as np
import pytest

from oracles import (all_binary_trees, dasgupta_optimum_dp, dasgupta_table, naive_single_linkage,
                     nested_dasgupta, nested_from_binary, random_binary_tree, split_cost)
from interhyp.errors import DegenerateData
from interhyp.features import FeatureMatrix
from interhyp.hyphc import (BallEmbedding, BinaryTree, DenseWeights, HypHCConfig, KernelWeights,
                            SimilarityConfig, continuous_cost, dasgupta_cost, decode_tree, export_embedding,
                            median_heuristic_sigma, optimize, optimize_weights, pairwise_lca_depth,
                            sample_triplets, similarity)

SMALL = HypHCConfig(dim=2, epochs=10, triplets_per_epoch=300, batch_size=32, lr=1e-2, init_radius=1e-3)


def sym_weights(rng, n):
    w = rng.random((n, n))
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0)
    return w


def test_similarity_kernel():
    assert similarity([1, 2], [1, 2], 0.7) == 1.0
    sigma = 1.3
    row = np.array([sigma * np.sqrt(2), 0.0])
    assert similarity(row, [0, 0], sigma) == pytest.approx(np.exp(-1), abs=1e-15)
    a, b = np.array([0.1, 3.0]), np.array([-2.0, 0.5])
    assert similarity(a, b, 2.0) == similarity(b, a, 2.0)


def test_median_heuristic(rng):
    assert median_heuristic_sigma([[0, 0], [3, 4]]) == 5.0
    with pytest.raises(DegenerateData):
        median_heuristic_sigma(np.ones((5, 3)))
    x = rng.normal(size=(100, 4))
    d = [np.linalg.norm(x[i] - x[j]) for i, j in itertools.combinations(range(100), 2)]
    assert median_heuristic_sigma(x, sample_size=10_000) == pytest.approx(np.median(d), rel=1e-12)
    sampled = median_heuristic_sigma(x, sample_size=2000, seed=3)
    assert sampled == pytest.approx(np.median(d), rel=0.05)


def test_kernel_weights_match_dense(rng):
    x = rng.normal(size=(12, 3))
    kw = KernelWeights(x, 1.5)
    dense = np.array([[similarity(a, b, 1.5) for b in x] for a in x])
    assert np.allclose(kw.block(np.arange(12), np.arange(12)), dense, atol=1e-12)
    assert np.allclose(kw.pair(np.array([0, 3]), np.array([5, 7])), [dense[0, 5], dense[3, 7]])


def test_continuous_cost_permutation_symmetry():
    pts = np.array([[0.5, 0.0], [-0.25, 0.433], [-0.25, -0.433]])
    w = np.ones((3, 3)) - np.eye(3)
    costs = {continuous_cost(pts, [perm], w, 0.1) for perm in itertools.permutations(range(3))}
    assert max(costs) - min(costs) < 1e-12


def test_continuous_cost_hard_max_limit():
    pts = np.array([[0.8, 0.0], [0.79, 0.05], [-0.6, 0.1]])  # (0, 1) is the deepest pair
    w = np.array([[0, 0.9, 0.2], [0.9, 0, 0.4], [0.2, 0.4, 0]])
    cost = continuous_cost(pts, [[0, 1, 2]], w, 1e-4, include_constant=False)
    assert cost == pytest.approx(0.9 + 0.2 + 0.4 - 0.9, abs=1e-9)


def test_continuous_cost_gradient(rng):
    for _ in range(10):
        pts = rng.normal(size=(5, 2))
        pts *= (0.9 * rng.random(5) / np.linalg.norm(pts, axis=1))[:, None]
        w = sym_weights(rng, 5)
        trip = np.array(list(itertools.combinations(range(5), 3)))
        _, grad = continuous_cost(pts, trip, w, 0.3, return_grad=True)
        num = np.zeros_like(pts)
        h = 1e-5
        for i in range(5):
            for d in range(2):
                e = np.zeros_like(pts)
                e[i, d] = h
                num[i, d] = (continuous_cost(pts + e, trip, w, 0.3) - continuous_cost(pts - e, trip, w, 0.3)) / (2 * h)
        rel = np.linalg.norm(grad - num) / max(np.linalg.norm(num), 1e-12)
        assert rel <= 1e-4


def test_relaxation_matches_discrete_cost_at_zero_temperature(rng):
    # leaves on a circle at equal radius: depth order = angular proximity
    n = 6
    ang = np.sort(rng.random(n)) * 2 * np.pi
    pts = 0.9 * np.column_stack([np.cos(ang), np.sin(ang)])
    w = sym_weights(rng, n)
    trip = np.array(list(itertools.combinations(range(n), 3)))
    relaxed = continuous_cost(pts, trip, w, 1e-6)
    assert relaxed == pytest.approx(dasgupta_cost(decode_tree(pts), w), rel=1e-6)


def test_scaling_weights_scales_costs(rng):
    w = sym_weights(rng, 6)
    pts = rng.normal(size=(6, 2)) * 0.2
    trip = sample_triplets(rng, 6, 20)
    tree = decode_tree(pts)
    assert continuous_cost(pts, trip, 3.0 * w, 0.1) == pytest.approx(3.0 * continuous_cost(pts, trip, w, 0.1))
    assert dasgupta_cost(tree, 3.0 * w) == pytest.approx(3.0 * dasgupta_cost(tree, w))


def test_dasgupta_examples():
    tree = BinaryTree.from_merges(3, [(0, 1), (2, 3)])
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    assert dasgupta_cost(tree, w) == 2.0
    assert dasgupta_cost(tree, np.zeros((3, 3))) == 0.0


def test_dasgupta_matches_pairwise_oracle(rng):
    for _ in range(10):
        w = sym_weights(rng, 5)
        pts = rng.normal(size=(5, 2)) * 0.3
        tree = decode_tree(pts)
        assert dasgupta_cost(tree, w) == pytest.approx(nested_dasgupta(nested_from_binary(tree), w), rel=1e-12)


def test_exhaustive_enumeration_counts_and_dp():
    assert [len(all_binary_trees(range(n))) for n in range(2, 8)] == [1, 3, 15, 105, 945, 10395]
    rng = np.random.default_rng(7)
    for n in (4, 5, 6):
        w = sym_weights(rng, n)
        table = dasgupta_table(w)
        assert table.min() == pytest.approx(dasgupta_optimum_dp(w), rel=1e-12)
        t = all_binary_trees(range(n))[3]
        assert split_cost(t, w)[0] == pytest.approx(nested_dasgupta(t, w))


def test_decode_tree_small_cases():
    two = decode_tree(np.array([[0.1, 0.0], [0.0, 0.2]]))
    assert two.n_leaves == 2 and two.leaf_count[two.root] == 2
    pts = np.array([[0.8, 0.0], [0.78, 0.1], [-0.7, 0.0]])
    tree = decode_tree(pts)
    assert tree.canonical() == frozenset((frozenset((0, 1)), 2))


def test_decode_tree_matches_naive_single_linkage(rng):
    for _ in range(10):
        pts = rng.normal(size=(6, 3))
        pts *= (0.95 * rng.random(6) / np.linalg.norm(pts, axis=1))[:, None]
        depth = pairwise_lca_depth(pts)
        tree = decode_tree(pts)
        members = tree.members()
        got = [frozenset((frozenset(members[a]), frozenset(members[b]))) for a, b in tree.children]
        assert got == naive_single_linkage(depth)
        # full binary: every internal node has two children, root covers all
        assert tree.leaf_count[tree.root] == 6
        assert len(tree.children) == 5


def test_decode_tree_invariant_to_input_order(rng):
    pts = rng.normal(size=(8, 2))
    pts *= (0.9 * rng.random(8) / np.linalg.norm(pts, axis=1))[:, None]
    perm = rng.permutation(8)
    a = decode_tree(pts)
    b = decode_tree(pts[perm])

    def relabel(node):
        if isinstance(node, frozenset):
            return frozenset(relabel(c) for c in node)
        return int(perm[node])
    assert relabel(b.canonical()) == a.canonical()


def test_three_leaves_pair_strongest_first():
    w = np.array([[0, 10.0, 0.1], [10.0, 0, 0.1], [0.1, 0.1, 0]])
    emb = optimize_weights(w, HypHCConfig(dim=2, epochs=20, triplets_per_epoch=30, batch_size=5, lr=1e-2,
                                          init_radius=1e-3, seed=1))
    tree = decode_tree(emb)
    assert tree.canonical() == frozenset((frozenset((0, 1)), 2))
    costs = {nested_from_binary(tree): None}
    best = min(all_binary_trees(range(3)), key=lambda t: nested_dasgupta(t, w))
    assert nested_dasgupta(nested_from_binary(tree), w) == nested_dasgupta(best, w)
    assert costs


def test_planted_clusters_are_deeper_within(rng):
    x = np.vstack([rng.normal(0, 0.3, size=(10, 4)), rng.normal(3, 0.3, size=(10, 4))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        emb = optimize(x, SimilarityConfig(), HypHCConfig(dim=2, epochs=20, seed=2))
    depth = pairwise_lca_depth(emb.points)
    same = np.zeros((20, 20), dtype=bool)
    same[:10, :10] = same[10:, 10:] = True
    np.fill_diagonal(same, False)
    cross = ~same
    np.fill_diagonal(cross, False)
    assert depth[same].mean() > depth[cross].mean()


def test_optimize_deterministic_and_inside_ball(rng):
    x = rng.normal(size=(30, 5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = optimize(x, SimilarityConfig(), SMALL)
        b = optimize(x, SimilarityConfig(), SMALL)
        c = optimize(x, SimilarityConfig(), HypHCConfig(**{**SMALL.__dict__, "threads": 3}))
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.points, c.points)
    assert a.losses == c.losses
    assert np.all(np.linalg.norm(a.points, axis=1) < 1)
    assert len(a.losses) == SMALL.epochs and np.isfinite(a.final_loss)


def test_sgd_variant_runs(rng):
    x = rng.normal(size=(15, 3))
    cfg = HypHCConfig(dim=2, epochs=5, optimizer="sgd", lr=5e-2, init_radius=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        emb = optimize(x, SimilarityConfig(), cfg)
    assert np.all(np.linalg.norm(emb.points, axis=1) < 1)


def test_config_validation():
    for bad in (dict(dim=1), dict(tau=0), dict(epochs=0), dict(optimizer="lbfgs"), dict(restarts=0)):
        with pytest.raises(ValueError):
            HypHCConfig(**bad)
    with pytest.raises(DegenerateData):
        optimize(np.ones((5, 2)))


def test_export_roundtrip(tmp_path, rng):
    emb = BallEmbedding(("a", "b", "c"), rng.random((3, 4)) * 0.2)
    m = export_embedding(emb)
    assert m.columns == ("e_001", "e_002", "e_003", "e_004")
    m.to_csv(tmp_path / "e.csv")
    back = BallEmbedding.from_matrix(FeatureMatrix.from_csv(tmp_path / "e.csv"))
    assert np.array_equal(back.points, emb.points)


def test_training_log(tmp_path):
    emb = BallEmbedding(("a",), np.zeros((1, 2)), [1.5, 1.25], [0.05, 0.025])
    emb.write_log(tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text() == "epoch,loss,tau\n1,1.5,0.05\n2,1.25,0.025\n"


def test_random_tree_oracle_is_uniform():
    rng = np.random.default_rng(0)
    counts = {}
    for _ in range(3000):
        t = random_binary_tree(range(4), rng)
        key = frozenset(map(frozenset, _clusters(t)))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 15
    assert max(counts.values()) / min(counts.values()) < 1.6


def _clusters(t):
    if not isinstance(t, tuple):
        return [frozenset([t])]
    left, right = _clusters(t[0]), _clusters(t[1])
    return left + right + [left[-1] | right[-1]]
