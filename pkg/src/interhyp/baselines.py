"""Comparison reducers: PCA, Ward feature agglomeration and spectral embedding."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh
from scipy.spatial import cKDTree

from .errors import DisconnectedGraphWarning, RankDeficientWarning
from .hyphc import median_heuristic_sigma

DENSE_EIGEN_LIMIT = 3000


@dataclass(frozen=True)
class ReducerSpec:
    method: str
    dim: int
    se_neighbors: int = 10

    def __post_init__(self):
        if self.method not in ("pca", "fa", "se"):
            raise ValueError(f"unknown reducer {self.method!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.method == "se" and self.se_neighbors < 1:
            raise ValueError("se_neighbors must be >= 1")


def _fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca_reduce(m, dim: int, rank_tol: float = 1e-10):
    x = np.asarray(m, dtype=np.float64)
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / max(len(x) - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    rank = int(np.sum(evals > rank_tol * max(evals[0], rank_tol)))
    keep = min(dim, rank)
    if dim > rank:
        warnings.warn(f"PCA: requested {dim} components but rank is {rank}; padding with zeros",
                      RankDeficientWarning, stacklevel=2)
    comps = _fix_signs(evecs[:, :keep])
    out = np.zeros((len(x), dim))
    out[:, :keep] = xc @ comps
    return out


def ward_merges(m, n_clusters: int):
    """Ward agglomeration of the columns of ``m``.

    Returns ``(merges, groups)``: the merge sequence as pairs of cluster
    labels (a merged cluster keeps the smaller label) and the final column
    groups ordered by their smallest member. Ties go to the lexicographically
    smallest label pair.
    """
    x = np.asarray(m, dtype=np.float64)
    n_cols = x.shape[1]
    if not 1 <= n_clusters <= n_cols:
        raise ValueError(f"n_clusters must be in [1, {n_cols}]")
    sq = np.sum(x * x, axis=0)
    # merge cost |A||B|/(|A|+|B|) |mu_A - mu_B|^2, singletons: half the squared distance
    cost = 0.5 * np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x.T @ x), 0.0)
    size = np.ones(n_cols)
    active = np.ones(n_cols, dtype=bool)
    groups = {k: [k] for k in range(n_cols)}
    upper = np.triu(np.ones((n_cols, n_cols), dtype=bool), k=1)
    merges = []
    for _ in range(n_cols - n_clusters):
        masked = np.where(upper & active[:, None] & active[None, :], cost, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n_cols)
        merges.append((i, j))
        ni, nj = size[i], size[j]
        nk = size
        # Lance-Williams update for the Ward criterion
        new = ((ni + nk) * cost[i] + (nj + nk) * cost[j] - nk * cost[i, j]) / (ni + nj + nk)
        cost[i, :] = new
        cost[:, i] = new
        cost[i, i] = 0.0
        size[i] = ni + nj
        active[j] = False
        groups[i] = groups[i] + groups.pop(j)
    return merges, [sorted(groups[k]) for k in sorted(groups)]


def feature_agglomeration(m, dim: int):
    x = np.asarray(m, dtype=np.float64)
    _, groups = ward_merges(x, dim)
    return np.column_stack([x[:, g].mean(axis=1) for g in groups])


def knn_affinity(x, k: int, sigma: float | None = None, seed: int = 0):
    """Symmetric k-NN graph (union of directed edges) with Gaussian weights."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    k = min(k, n - 1)
    if sigma is None:
        sigma = median_heuristic_sigma(x, seed=seed)
    dist, idx = cKDTree(x).query(x, k=k + 1)
    rows = np.repeat(np.arange(n), k)
    # drop self matches; with duplicate rows the self index may not come first
    cols = np.empty(n * k, dtype=np.int64)
    dd = np.empty(n * k)
    for r in range(n):
        nb = [(d, c) for d, c in zip(dist[r], idx[r]) if c != r][:k]
        cols[r * k:(r + 1) * k] = [c for _, c in nb]
        dd[r * k:(r + 1) * k] = [d for d, _ in nb]
    w = np.exp(-dd ** 2 / (2.0 * sigma ** 2))
    a = sparse.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    a = a.maximum(a.T)
    a.setdiag(0.0)
    a.eliminate_zeros()
    return a


def _zero_space_basis(deg_sqrt, labels, n_comp):
    """Orthonormal basis of the Laplacian null space, trivial vector first."""
    basis = [deg_sqrt / np.linalg.norm(deg_sqrt)]
    for c in range(n_comp - 1):
        v = np.where(labels == c, deg_sqrt, 0.0)
        for b in basis:
            v = v - (b @ v) * b
        basis.append(v / np.linalg.norm(v))
    return np.column_stack(basis)


def spectral_embedding(m, dim: int, k: int = 10, sigma: float | None = None, seed: int = 0):
    """Eigenvectors of the symmetric normalized k-NN Laplacian.

    Columns are the eigenvectors for the ``dim`` smallest eigenvalues after
    the trivial one. On a disconnected graph the null space is spanned
    explicitly by degree-weighted component indicators (orthogonalised
    against the trivial vector), so separate components come first.
    """
    x = np.asarray(m, dtype=np.float64)
    n = len(x)
    if n <= dim + 1:
        raise ValueError(f"spectral embedding needs n > dim + 1 (n={n}, dim={dim})")
    a = knn_affinity(x, k, sigma, seed)
    deg = np.asarray(a.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    norm_adj = sparse.diags(dinv) @ a @ sparse.diags(dinv)
    n_comp, labels = connected_components(a, directed=False)
    if n_comp > 1:
        warnings.warn(f"k-NN graph has {n_comp} connected components", DisconnectedGraphWarning,
                      stacklevel=2)
    want = dim + n_comp
    if n <= DENSE_EIGEN_LIMIT:
        lap = np.eye(n) - norm_adj.toarray()
        evals, evecs = np.linalg.eigh((lap + lap.T) / 2.0)
    else:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        mu, vecs = eigsh(norm_adj, k=min(want + 1, n - 1), which="LA", v0=v0, tol=1e-10)
        evals, evecs = 1.0 - mu, vecs
    order = np.argsort(evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    null = _zero_space_basis(np.sqrt(deg), labels, n_comp)
    rest = evecs[:, n_comp:]
    # keep the non-null eigenvectors orthogonal to the explicit null basis
    rest = rest - null @ (null.T @ rest)
    rest /= np.linalg.norm(rest, axis=0, keepdims=True)
    cols = np.column_stack([null[:, 1:], rest])[:, :dim]
    if cols.shape[1] < dim:
        raise ValueError("not enough eigenvectors computed")
    return _fix_signs(cols)


def reduce(m, spec: ReducerSpec, seed: int = 0):
    if spec.method == "pca":
        return pca_reduce(m, spec.dim)
    if spec.method == "fa":
        return feature_agglomeration(m, spec.dim)
    return spectral_embedding(m, spec.dim, spec.se_neighbors, seed=seed)
