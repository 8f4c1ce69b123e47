"""Class balancing, splitting, random forests and the separation experiments."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree
from sklearn.tree import DecisionTreeClassifier

from . import CLASSES
from .errors import InsufficientMinority, RowMismatch, UnknownFeatureSet
from .features import FeatureMatrix

FEATURE_SETS = ("U", "U+F", "HypHC", "SE", "FA")

ONE_VS_TWO = (("deleted",), ("suspended",), ("regular",))
SEPARATIONS = (
    ("one_vs_two", "deleted", None),
    ("one_vs_two", "suspended", None),
    ("one_vs_two", "regular", None),
    ("one_vs_one", "deleted", "suspended"),
    ("one_vs_one", "suspended", "regular"),
    ("one_vs_one", "regular", "deleted"),
)


@dataclass(frozen=True)
class SeparationSpec:
    mode: str
    positive: str
    negative: str | None = None

    def __post_init__(self):
        if self.mode not in ("one_vs_two", "one_vs_one"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.positive not in CLASSES:
            raise ValueError(f"unknown class {self.positive!r}")
        if self.mode == "one_vs_one":
            if self.negative not in CLASSES or self.negative == self.positive:
                raise ValueError("one_vs_one needs a distinct negative class")
        elif self.negative is not None:
            raise ValueError("one_vs_two takes no negative class")

    @property
    def name(self):
        if self.mode == "one_vs_two":
            rest = " + ".join(c for c in CLASSES if c != self.positive)
            return f"{self.positive} vs ({rest})"
        return f"{self.positive} vs {self.negative}"


def all_separations():
    return [SeparationSpec(*s) for s in SEPARATIONS]


@dataclass(frozen=True)
class ForestConfig:
    trees: int = 200
    max_depth: int | None = None
    min_samples_leaf: int = 2
    max_features: str | int | float = "sqrt"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("trees must be >= 1")


# ----------------------------------------------------------------- SMOTE

def smote(x, y, k: int = 5, seed: int = 0):
    """Upsample every class to the majority count with SMOTE interpolation.

    Each synthetic row is ``a + lam * (b - a)`` for a random member ``a`` of
    the class, ``b`` one of its ``k`` nearest same-class neighbours and
    ``lam`` uniform on [0, 1]. Original rows come first, unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(y, return_counts=True)
    target = counts.max()
    new_x, new_y = [x], [y]
    for cls, cnt in zip(classes, counts):
        need = target - cnt
        if need == 0:
            continue
        if cnt <= k:
            raise InsufficientMinority(f"class {cls!r} has {cnt} samples, SMOTE needs more than k={k}")
        members = x[y == cls]
        _, nbrs = cKDTree(members).query(members, k=k + 1)
        nbrs = nbrs[:, 1:]
        base = rng.integers(0, cnt, size=need)
        pick = nbrs[base, rng.integers(0, k, size=need)]
        lam = rng.random(need)[:, None]
        a = members[base]
        new_x.append(a + lam * (members[pick] - a))
        new_y.append(np.full(need, cls, dtype=y.dtype))
    return np.vstack(new_x), np.concatenate(new_y)


# ----------------------------------------------------------------- splits

def stratified_split(y, test_fraction: float = 0.2, seed: int = 0):
    """Train/test index arrays with per-class proportions preserved."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(len(idx) * test_fraction))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_folds(y, n_folds: int = 5, seed: int = 0):
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = np.arange(len(idx)) % n_folds
    for f in range(n_folds):
        yield np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)


# ----------------------------------------------------------------- forest

class RandomForest:
    """Bagged CART trees (Gini) with a plain majority vote.

    Vote ties go to the lexicographically smallest class label.
    """

    def __init__(self, config: ForestConfig = ForestConfig()):
        self.config = config
        self.trees_: list[DecisionTreeClassifier] = []
        self.classes_ = None

    def fit(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)  # sorted, so argmax ties pick the smallest label
        y_idx = np.searchsorted(self.classes_, y)
        cfg = self.config
        states = [s.generate_state(2) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.trees)]
        n = len(x)

        def grow(state):
            rng = np.random.default_rng(state[0])
            boot = rng.integers(0, n, size=n)
            tree = DecisionTreeClassifier(criterion="gini", max_depth=cfg.max_depth,
                                          min_samples_leaf=cfg.min_samples_leaf,
                                          max_features=cfg.max_features,
                                          random_state=int(state[1] % (2 ** 31)))
            tree.fit(x[boot], y_idx[boot])
            return tree

        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as pool:
                self.trees_ = list(pool.map(grow, states))
        else:
            self.trees_ = [grow(s) for s in states]
        return self

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        votes = np.zeros((len(x), len(self.classes_)), dtype=np.int64)
        rows = np.arange(len(x))
        for tree in self.trees_:
            # trees were fit on class indices, so predictions index self.classes_
            np.add.at(votes, (rows, tree.predict(x).astype(np.int64)), 1)
        return self.classes_[np.argmax(votes, axis=1)]


def train_forest(x, y, config: ForestConfig = ForestConfig()) -> RandomForest:
    return RandomForest(config).fit(x, y)


def predict(model: RandomForest, x):
    return model.predict(x)


# ----------------------------------------------------------------- scoring

def f1(y_true, y_pred, positive) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_pred == positive) & (y_true == positive)))
    fp = int(np.sum((y_pred == positive) & (y_true != positive)))
    fn = int(np.sum((y_pred != positive) & (y_true == positive)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


# ----------------------------------------------------------------- experiments

@dataclass(frozen=True)
class SeparationResult:
    feature_set: str
    separation: str
    f1: float
    n_train: int
    n_test: int


def binary_task(user_ids: Sequence[str], labels: Mapping[str, str], spec: SeparationSpec):
    """Rows kept and their binary labels ('positive' / 'negative')."""
    keep, y = [], []
    for k, u in enumerate(user_ids):
        cls = labels.get(u)
        if cls is None:
            continue
        if cls == spec.positive:
            keep.append(k)
            y.append("positive")
        elif spec.mode == "one_vs_two" or cls == spec.negative:
            keep.append(k)
            y.append("negative")
    return np.asarray(keep, dtype=np.int64), np.asarray(y)


def run_separation(features_by_name: Mapping[str, FeatureMatrix], labels: Mapping[str, str],
                   feature_set: str, spec: SeparationSpec, forest: ForestConfig = ForestConfig(),
                   seed: int = 0, test_fraction: float = 0.2, smote_k: int = 5,
                   cv_folds: int | None = None) -> SeparationResult:
    """Positive-class F1 for one feature set on one separation.

    The split depends only on ``seed`` and the label vector, so feature sets
    covering the same users are compared on identical folds. SMOTE touches
    the training fold only.
    """
    if feature_set not in features_by_name:
        raise UnknownFeatureSet(f"unknown feature set {feature_set!r}; have {sorted(features_by_name)}")
    m = features_by_name[feature_set]
    # canonical row order so every feature set sees the same split
    order = sorted(range(len(m.user_ids)), key=lambda k: m.user_ids[k])
    ids = [m.user_ids[k] for k in order]
    values = m.values[order]
    keep, y = binary_task(ids, labels, spec)
    if len(keep) == 0:
        raise RowMismatch("no labelled rows for this separation")
    x = values[keep]
    if cv_folds:
        scores = []
        for fold, (tr, te) in enumerate(stratified_folds(y, cv_folds, seed)):
            scores.append(_fit_score(x, y, tr, te, forest, seed + fold, smote_k))
        return SeparationResult(feature_set, spec.name, float(np.mean(scores)), len(y), len(y) // cv_folds)
    tr, te = stratified_split(y, test_fraction, seed)
    score = _fit_score(x, y, tr, te, forest, seed, smote_k)
    return SeparationResult(feature_set, spec.name, score, len(tr), len(te))


def _fit_score(x, y, tr, te, forest, seed, smote_k):
    x_tr, y_tr = smote(x[tr], y[tr], k=smote_k, seed=seed)
    model = train_forest(x_tr, y_tr, forest)
    return f1(y[te], model.predict(x[te]), "positive")
