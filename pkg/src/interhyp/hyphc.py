"""Hyperbolic hierarchical clustering of feature rows.

Leaves are embedded in the Poincaré ball and trained to minimise a
triplet-softmax relaxation of Dasgupta's cost. A binary tree is recovered
afterwards by single-linkage agglomeration on pairwise LCA depth.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, DegenerateData
from .features import FeatureMatrix
from .hyperbolic import EPS_BALL, lca_depth_batch, project

log = logging.getLogger(__name__)

_CHUNK = 4096  # fixed gradient chunk size; keeps results independent of thread count


# --------------------------------------------------------------------------
# similarities

def similarity(row_i, row_j, sigma: float) -> float:
    diff = np.asarray(row_i, dtype=np.float64) - np.asarray(row_j, dtype=np.float64)
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)))


def median_heuristic_sigma(matrix, sample_size: int = 10_000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance between rows.

    Uses every pair when there are at most ``sample_size`` of them, otherwise
    a seeded uniform sample of ``sample_size`` distinct-row pairs.
    """
    x = np.asarray(matrix, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise DegenerateData("median heuristic needs at least two rows")
    if n * (n - 1) // 2 <= sample_size:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=sample_size)
        j = (i + rng.integers(1, n, size=sample_size)) % n
    dist = np.sqrt(np.sum((x[i] - x[j]) ** 2, axis=1))
    sigma = float(np.median(dist))
    if not sigma > 0.0:
        raise DegenerateData("median pairwise distance is zero (rows identical)")
    return sigma


class DenseWeights:
    """Pairwise similarities from an explicit symmetric matrix."""

    def __init__(self, w):
        self.w = np.asarray(w, dtype=np.float64)
        self.n = self.w.shape[0]

    def pair(self, i, j):
        return self.w[i, j]

    def block(self, rows, cols):
        return self.w[np.ix_(rows, cols)]

    def scaled(self, c):
        return DenseWeights(self.w * c)


class KernelWeights:
    """Gaussian-kernel similarities evaluated on demand from feature rows."""

    def __init__(self, x, sigma: float):
        self.x = np.asarray(x, dtype=np.float64)
        self.sigma = float(sigma)
        self.n = self.x.shape[0]

    def pair(self, i, j):
        diff = self.x[i] - self.x[j]
        return np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * self.sigma ** 2))

    def block(self, rows, cols):
        a = self.x[rows]
        b = self.x[cols]
        sq = (np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T)
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * self.sigma ** 2))


def as_weights(weights):
    if isinstance(weights, (DenseWeights, KernelWeights)):
        return weights
    return DenseWeights(weights)


# --------------------------------------------------------------------------
# configs and results

@dataclass(frozen=True)
class SimilarityConfig:
    sigma: float | None = None  # None: median heuristic
    sample_size: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class HypHCConfig:
    dim: int = 60
    tau: float = 0.05
    anneal_factor: float = 0.5
    epochs: int = 50
    triplets_per_epoch: int | None = None  # None: 50 * n
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    eps_ball: float = EPS_BALL
    init_radius: float = 1e-3
    leaf_radius: float | None = None  # None: free radius; else leaves kept on this sphere
    restarts: int = 1
    optimizer: str = "adam"  # "adam" (Riemannian Adam) or "sgd" (plain Riemannian steps)
    threads: int = 1

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class BallEmbedding:
    user_ids: tuple[str, ...]
    points: np.ndarray
    losses: list[float] = field(default_factory=list)
    taus: list[float] = field(default_factory=list)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else float("nan")

    def write_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss,tau\n")
            for e, (loss, tau) in enumerate(zip(self.losses, self.taus), start=1):
                fh.write(f"{e},{loss!r},{tau!r}\n")

    @classmethod
    def from_matrix(cls, m: FeatureMatrix) -> "BallEmbedding":
        return cls(m.user_ids, m.values.copy())


@dataclass(frozen=True)
class BinaryTree:
    """Full binary tree; leaves are 0..n-1, internal nodes n..2n-2, root last."""

    n_leaves: int
    children: np.ndarray   # (n-1, 2) child ids of internal node n+k
    parent: np.ndarray     # (2n-1,), root has -1
    leaf_count: np.ndarray  # (2n-1,)

    @property
    def root(self):
        return 2 * self.n_leaves - 2

    def members(self):
        """Leaf lists per node id."""
        n = self.n_leaves
        out = [[i] for i in range(n)]
        for k, (a, b) in enumerate(self.children):
            out.append(out[a] + out[b])
        return out

    def lca(self, i, j):
        seen = set()
        while i != -1:
            seen.add(i)
            i = self.parent[i]
        while j not in seen:
            j = self.parent[j]
        return int(j)

    def canonical(self):
        """Hashable form independent of internal-node numbering."""
        def rec(node):
            if node < self.n_leaves:
                return node
            a, b = self.children[node - self.n_leaves]
            return frozenset((rec(int(a)), rec(int(b))))
        return rec(self.root)

    @classmethod
    def from_merges(cls, n, merges):
        children = np.asarray(merges, dtype=np.int64).reshape(-1, 2)
        parent = np.full(2 * n - 1, -1, dtype=np.int64)
        count = np.ones(2 * n - 1, dtype=np.int64)
        for k, (a, b) in enumerate(children):
            parent[a] = parent[b] = n + k
            count[n + k] = count[a] + count[b]
        return cls(n, children, parent, count)


# --------------------------------------------------------------------------
# relaxed cost

def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _triplet_terms(points, trip, w3, tau, need_grad=True):
    """Per-triplet relaxed cost and its gradient wrt the three leaf points."""
    xi, xj, xk = points[trip[:, 0]], points[trip[:, 1]], points[trip[:, 2]]
    firsts = np.concatenate([xi, xi, xj])
    seconds = np.concatenate([xj, xk, xk])
    m = len(trip)
    if need_grad:
        depth, g1, g2 = lca_depth_batch(firsts, seconds, return_grad=True)
    else:
        depth = lca_depth_batch(firsts, seconds)
    depth = depth.reshape(3, m).T
    sig = _softmax_rows(depth / tau)
    expected = np.sum(w3 * sig, axis=1)
    loss = w3.sum(axis=1) - expected
    if not need_grad:
        return loss, None
    dl_dd = -sig * (w3 - expected[:, None]) / tau  # (m, 3) for pairs ij, ik, jk
    c = dl_dd.T.reshape(-1)[:, None]
    g1 = c * g1
    g2 = c * g2
    gi = g1[:m] + g1[m:2 * m]
    gj = g2[:m] + g1[2 * m:]
    gk = g2[m:2 * m] + g2[2 * m:]
    return loss, (gi, gj, gk)


def _covered_pair_weight(trip, weights):
    pairs = np.concatenate([trip[:, [0, 1]], trip[:, [0, 2]], trip[:, [1, 2]]])
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    return float(np.sum(weights.pair(pairs[:, 0], pairs[:, 1])))


def _triplet_weights(trip, weights):
    return np.stack([weights.pair(trip[:, 0], trip[:, 1]),
                     weights.pair(trip[:, 0], trip[:, 2]),
                     weights.pair(trip[:, 1], trip[:, 2])], axis=1)


def continuous_cost(points, triplets, weights, tau: float, return_grad: bool = False,
                    include_constant: bool = True):
    """Triplet-softmax relaxation of Dasgupta's cost.

    For each triplet (i, j, k) the term is w_ij + w_ik + w_jk minus the
    weights averaged under softmax(LCA depths / tau). With
    ``include_constant`` the sum gains 2 * (sum of w over the distinct pairs
    the triplets touch); over all triplets with tau -> 0 that equals the
    discrete cost of a tree realising the depth order.
    """
    points = np.asarray(points, dtype=np.float64)
    trip = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    weights = as_weights(weights)
    w3 = _triplet_weights(trip, weights)
    loss, grads = _triplet_terms(points, trip, w3, tau, need_grad=return_grad)
    total = float(np.sum(loss))
    if include_constant:
        total += 2.0 * _covered_pair_weight(trip, weights)
    if not return_grad:
        return total
    grad = np.zeros_like(points)
    for col, g in zip(range(3), grads):
        np.add.at(grad, trip[:, col], g)
    return total, grad


# --------------------------------------------------------------------------
# optimisation

def sample_triplets(rng, n, m):
    """``m`` uniformly drawn triplets of distinct leaf indices."""
    if n < 3:
        raise ValueError("need at least 3 leaves")
    trip = rng.integers(0, n, size=(m, 3))
    bad = (trip[:, 0] == trip[:, 1]) | (trip[:, 0] == trip[:, 2]) | (trip[:, 1] == trip[:, 2])
    while bad.any():
        trip[bad] = rng.integers(0, n, size=(int(bad.sum()), 3))
        bad = (trip[:, 0] == trip[:, 1]) | (trip[:, 0] == trip[:, 2]) | (trip[:, 1] == trip[:, 2])
    return trip


def init_points(rng, n, dim, radius):
    """Uniform draws from the Euclidean ball of the given radius."""
    direction = rng.standard_normal((n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return direction * r[:, None]


def _batch_gradient(points, trip, weights, tau, pool):
    chunks = [trip[s:s + _CHUNK] for s in range(0, len(trip), _CHUNK)]

    def work(chunk):
        w3 = _triplet_weights(chunk, weights)
        return _triplet_terms(points, chunk, w3, tau)

    results = list(pool.map(work, chunks)) if pool is not None else [work(c) for c in chunks]
    grad = np.zeros_like(points)
    loss = 0.0
    for chunk, (lc, (gi, gj, gk)) in zip(chunks, results):
        loss += float(np.sum(lc))
        np.add.at(grad, chunk[:, 0], gi)
        np.add.at(grad, chunk[:, 1], gj)
        np.add.at(grad, chunk[:, 2], gk)
    return loss, grad


def _constrain(x, cfg):
    if cfg.leaf_radius is None:
        return project(x, cfg.eps_ball)
    norm = np.linalg.norm(x, axis=1, keepdims=True)
    return x * (min(cfg.leaf_radius, 1.0 - cfg.eps_ball) / np.where(norm > 0, norm, 1.0))


def _tau_schedule(cfg: HypHCConfig):
    third = max(1, math.ceil(cfg.epochs / 3))
    return [cfg.tau * cfg.anneal_factor ** (e // third) for e in range(cfg.epochs)]


def _check_moving_average(losses, window=10, rtol=1e-3):
    if len(losses) < window + 1:
        return True
    ma = np.convolve(losses, np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(ma) <= rtol * np.abs(ma[:-1])))


def _train(weights, cfg: HypHCConfig, seed, pool, betas=(0.9, 0.999), adam_eps=1e-8):
    n = weights.n
    rng = np.random.default_rng(seed)
    points = _constrain(init_points(rng, n, cfg.dim, cfg.init_radius), cfg)
    per_epoch = cfg.triplets_per_epoch or 50 * n
    taus = _tau_schedule(cfg)
    b1, b2 = betas
    m1 = np.zeros_like(points)
    m2 = np.zeros_like(points)
    step = 0
    losses = []
    for epoch, tau in enumerate(taus):
        trip_all = sample_triplets(rng, n, per_epoch)
        total = 0.0
        for s in range(0, per_epoch, cfg.batch_size):
            trip = trip_all[s:s + cfg.batch_size]
            loss, grad = _batch_gradient(points, trip, weights, tau, pool)
            total += loss
            if cfg.optimizer == "sgd":
                touched = np.unique(trip)
                x = points[touched]
                factor = ((1.0 - np.sum(x * x, axis=1)) / 2.0) ** 2
                points[touched] = _constrain(x - cfg.lr * factor[:, None] * grad[touched], cfg)
                continue
            # Adam on the Riemannian gradient, moments kept in ambient coordinates
            factor = ((1.0 - np.sum(points * points, axis=1)) / 2.0) ** 2
            g = factor[:, None] * grad
            step += 1
            m1 = b1 * m1 + (1.0 - b1) * g
            m2 = b2 * m2 + (1.0 - b2) * g * g
            m1_hat = m1 / (1.0 - b1 ** step)
            m2_hat = m2 / (1.0 - b2 ** step)
            points = _constrain(points - cfg.lr * m1_hat / (np.sqrt(m2_hat) + adam_eps), cfg)
        losses.append(total / per_epoch)
        log.debug("epoch %d loss %.6f tau %.4g", epoch + 1, losses[-1], tau)
    return points, losses, taus


def optimize_weights(weights, config: HypHCConfig = HypHCConfig(), user_ids=None) -> BallEmbedding:
    """Train leaf embeddings for an arbitrary similarity source.

    With ``restarts > 1`` independent runs are seeded from ``config.seed``
    and the one whose decoded tree has the lowest Dasgupta cost is kept
    (an O(n^2) check per run).
    """
    weights = as_weights(weights)
    n = weights.n
    if n < 3:
        raise DegenerateData("need at least 3 leaves")
    cfg = config
    seeds = [cfg.seed] + [int(s.generate_state(1)[0]) for s in
                          np.random.SeedSequence(cfg.seed).spawn(cfg.restarts - 1)]
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    best = None
    try:
        for seed in seeds:
            points, losses, taus = _train(weights, cfg, seed, pool)
            if cfg.restarts > 1:
                score = dasgupta_cost(decode_tree(points), weights)
                log.info("restart seed=%d dasgupta=%.6g", seed, score)
            else:
                score = 0.0
            if best is None or score < best[0]:
                best = (score, points, losses, taus)
    finally:
        if pool is not None:
            pool.shutdown()
    _, points, losses, taus = best
    if not _check_moving_average(losses):
        warnings.warn("training loss moving average increased during optimisation", ConvergenceWarning,
                      stacklevel=2)
    ids = tuple(user_ids) if user_ids is not None else tuple(str(i) for i in range(n))
    return BallEmbedding(ids, points, losses, taus)


def optimize(features, sim_config: SimilarityConfig = SimilarityConfig(),
             config: HypHCConfig = HypHCConfig()) -> BallEmbedding:
    """Embed standardized feature rows using Gaussian-kernel similarities."""
    if isinstance(features, FeatureMatrix):
        ids, x = features.user_ids, features.values
    else:
        x = np.asarray(features, dtype=np.float64)
        ids = None
    if x.shape[0] < 3:
        raise DegenerateData("need at least 3 rows")
    sigma = sim_config.sigma or median_heuristic_sigma(x, sim_config.sample_size, sim_config.seed)
    log.info("hyphc: n=%d dim=%d sigma=%.6g", x.shape[0], config.dim, sigma)
    return optimize_weights(KernelWeights(x, sigma), config, user_ids=ids)


# --------------------------------------------------------------------------
# decoding and discrete cost

def pairwise_lca_depth(points):
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    out = np.empty((n, n))
    for i in range(n):
        out[i] = lca_depth_batch(np.broadcast_to(points[i], points.shape), points)
    return out


def decode_tree(embedding) -> BinaryTree:
    """Single-linkage agglomeration on LCA depth (deepest pair merges first).

    Built from a maximum spanning tree (Prim, O(n^2) time, O(n) memory),
    whose edges merged in decreasing depth order reproduce single linkage.
    """
    points = embedding.points if isinstance(embedding, BallEmbedding) else np.asarray(embedding, float)
    n = len(points)
    if n < 2:
        raise ValueError("need at least two points")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = lca_depth_batch(np.broadcast_to(points[0], points.shape), points)
    link = np.zeros(n, dtype=np.int64)
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, -np.inf, best)
        v = int(np.argmax(cand))
        edges.append((float(best[v]), min(v, int(link[v])), max(v, int(link[v]))))
        in_tree[v] = True
        d = lca_depth_batch(np.broadcast_to(points[v], points.shape), points)
        upd = (~in_tree) & (d > best)
        best = np.where(upd, d, best)
        link = np.where(upd, v, link)
    edges.sort(key=lambda e: (-e[0], e[1], e[2]))

    root_of = list(range(n))  # union-find over leaves, payload = current node id
    uf = list(range(n))

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    merges = []
    for _, i, j in edges:
        ri, rj = find(i), find(j)
        a, b = sorted((root_of[ri], root_of[rj]))
        merges.append((a, b))
        uf[rj] = ri
        root_of[ri] = n + len(merges) - 1
    return BinaryTree.from_merges(n, merges)


def dasgupta_cost(tree: BinaryTree, weights) -> float:
    """Sum over leaf pairs of w_ij times the leaf count under their LCA."""
    weights = as_weights(weights)
    members = tree.members()
    n = tree.n_leaves
    total = 0.0
    for k, (a, b) in enumerate(tree.children):
        cross = weights.block(members[a], members[b]).sum()
        total += tree.leaf_count[n + k] * cross
    return float(total)


def export_embedding(embedding: BallEmbedding) -> FeatureMatrix:
    cols = tuple(f"e_{k:03d}" for k in range(1, embedding.dim + 1))
    return FeatureMatrix(embedding.user_ids, cols, embedding.points.copy())
