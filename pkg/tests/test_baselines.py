import warnings

import numpy as np
import pytest

from oracles import dense_spectral, naive_ward, pca_svd
from interhyp.baselines import (ReducerSpec, feature_agglomeration, knn_affinity, pca_reduce, reduce,
                                spectral_embedding, ward_merges)
from interhyp.errors import DisconnectedGraphWarning, RankDeficientWarning


def match_up_to_sign(a, b, tol):
    for k in range(a.shape[1]):
        s = np.sign(a[:, k] @ b[:, k]) or 1.0
        assert np.max(np.abs(a[:, k] - s * b[:, k])) <= tol


def test_pca_matches_svd_oracle(rng):
    for _ in range(5):
        x = rng.normal(size=(80, 10)) @ rng.normal(size=(10, 10))
        match_up_to_sign(pca_reduce(x, 4), pca_svd(x, 4), 1e-8)


def test_pca_sign_convention_and_rank_padding(rng):
    x = rng.normal(size=(30, 5))
    a = pca_reduce(x, 3)
    b = pca_reduce(-x, 3)
    assert np.allclose(a, -b) or np.allclose(np.abs(a), np.abs(b))
    low = rng.normal(size=(30, 2)) @ rng.normal(size=(2, 6))
    with pytest.warns(RankDeficientWarning):
        out = pca_reduce(low, 4)
    assert np.all(out[:, 2:] == 0)


def test_ward_matches_naive_oracle(rng):
    for trial in range(10):
        x = rng.normal(size=(25, 9))
        got = ward_merges(x, 2 + trial % 3)
        assert got == naive_ward(x, 2 + trial % 3)


def test_feature_agglomeration_averages_groups(rng):
    base = rng.normal(size=(40, 2))
    x = np.column_stack([base[:, 0], base[:, 0] + 1e-3, base[:, 1], base[:, 1] - 1e-3])
    out = feature_agglomeration(x, 2)
    assert np.allclose(out, [[(r[0] + r[1]) / 2, (r[2] + r[3]) / 2] for r in x])
    with pytest.raises(ValueError):
        ward_merges(x, 5)


def test_spectral_matches_dense_oracle(rng):
    x = np.vstack([rng.normal(0, 1, size=(60, 3)), rng.normal(0.5, 1, size=(60, 3))])
    sigma = 1.2
    got = spectral_embedding(x, 3, k=8, sigma=sigma)
    evals, want = dense_spectral(x, 3, 8, sigma)
    assert evals[3] - evals[2] > 1e-6  # oracle eigenvectors well defined
    match_up_to_sign(got, want, 1e-6)


def test_spectral_sparse_path_agrees_with_dense(rng, monkeypatch):
    import interhyp.baselines as b
    x = rng.normal(size=(150, 4))
    dense = spectral_embedding(x, 2, k=10, sigma=1.0)
    monkeypatch.setattr(b, "DENSE_EIGEN_LIMIT", 10)
    sparse_out = spectral_embedding(x, 2, k=10, sigma=1.0)
    match_up_to_sign(sparse_out, dense, 1e-6)


def test_spectral_disconnected_graph_separates_components(rng):
    x = np.vstack([rng.normal(0, 0.1, size=(20, 2)), rng.normal(50, 0.1, size=(20, 2))])
    with pytest.warns(DisconnectedGraphWarning):
        emb = spectral_embedding(x, 2, k=3, sigma=1.0)
    first = emb[:, 0]
    assert np.all(np.sign(first[:20]) == np.sign(first[0]))
    assert np.all(np.sign(first[20:]) == -np.sign(first[0]))


def test_knn_affinity_symmetric_without_self_loops(rng):
    x = rng.normal(size=(30, 3))
    x[5] = x[6]  # duplicate rows
    a = knn_affinity(x, 4, 1.0).toarray()
    assert np.allclose(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert np.all((a > 0).sum(axis=1) >= 4)


def test_reducer_spec_dispatch(rng):
    x = rng.normal(size=(40, 6))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in ("pca", "fa", "se"):
            assert reduce(x, ReducerSpec(method, 2)).shape == (40, 2)
    for bad in (("tsne", 2), ("pca", 0)):
        with pytest.raises(ValueError):
            ReducerSpec(*bad)
