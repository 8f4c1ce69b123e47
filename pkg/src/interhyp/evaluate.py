"""Class-centroid distances and the full feature-set x separation experiment."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import CLASSES
from .baselines import feature_agglomeration, spectral_embedding
from .config import PipelineConfig
from .errors import EmptyClass, ZeroVector
from .features import (FeatureMatrix, build_feature_matrix, build_user_level_matrix, concat,
                       standardize, zscore)
from .hyphc import export_embedding, optimize
from .influencers import build_user_set, compute_rt_scores, select_top_influencers
from .ingest import Corpus, UserProfile
from .learn import FEATURE_SETS, SeparationResult, all_separations, run_separation

log = logging.getLogger(__name__)

CENTROID_PAIRS = (("deleted", "suspended"), ("suspended", "regular"), ("regular", "deleted"))
REDUCERS = ("HypHC", "SE", "FA")


def class_centroids(m, labels) -> dict[str, np.ndarray]:
    """Mean row per class. ``labels`` is aligned with the rows of ``m``."""
    x = np.asarray(m, dtype=np.float64)
    labels = np.asarray(labels)
    out = {}
    for cls in CLASSES:
        mask = labels == cls
        if not mask.any():
            raise EmptyClass(f"no rows labelled {cls!r}")
        out[cls] = x[mask].mean(axis=0)
    return out


def cosine_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine distance of a zero vector")
    return float(1.0 - np.dot(a, b) / (na * nb))


@dataclass
class CentroidReport:
    reducer: str
    centroids: dict[str, np.ndarray]
    distances: dict[tuple[str, str], float]

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("pair", "cosine_distance"))
            for (a, b), d in self.distances.items():
                w.writerow((f"{a} vs {b}", repr(d)))


def centroid_report(reducer: str, reduced: FeatureMatrix, labels: Mapping[str, str]) -> CentroidReport:
    """Standardize the reduced representation, then compare class centres."""
    ids = [u for u in reduced.user_ids if u in labels]
    m = reduced.take(ids)
    x = zscore(m.values)
    cents = class_centroids(x, [labels[u] for u in ids])
    dists = {(a, b): cosine_distance(cents[a], cents[b]) for a, b in CENTROID_PAIRS}
    return CentroidReport(reducer, cents, dists)


@dataclass
class ExperimentResult:
    feature_sets: dict[str, FeatureMatrix]
    reduced: dict[str, FeatureMatrix]
    results: list[SeparationResult]
    centroids: dict[str, CentroidReport]
    influencers: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def f1(self, feature_set, separation):
        for r in self.results:
            if r.feature_set == feature_set and r.separation == separation:
                return r.f1
        raise KeyError((feature_set, separation))

    def write_results(self, path, model="RFC"):
        seps = [s.name for s in all_separations()]
        sets = [fs for fs in FEATURE_SETS if fs in self.feature_sets]
        write_results_table(path, {(r.feature_set, r.separation): r.f1 for r in self.results},
                            seps, sets, model)


def write_results_table(path, scores, separations, feature_sets, model="RFC"):
    """Table-2 style CSV: one row per classifier, one column per (separation, feature set)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model"] + [f"{s} | {fs}" for s in separations for fs in feature_sets])
        w.writerow([model] + [f"{100.0 * scores[(fs, s)]:.4f}" for s in separations for fs in feature_sets])


def read_results_table(path) -> dict[tuple[str, str], float]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    out = {}
    for col, value in zip(rows[0][1:], rows[1][1:]):
        sep, fs = col.rsplit(" | ", 1)
        out[(fs, sep)] = float(value) / 100.0
    return out


def write_centroid_table(path, reports: Mapping[str, CentroidReport]):
    """Table-4 style CSV: rows are class pairs, columns are reducers."""
    names = list(reports)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair"] + names)
        for a, b in CENTROID_PAIRS:
            w.writerow([f"{a} vs {b}"] + [repr(reports[r].distances[(a, b)]) for r in names])


def build_base_features(corpus: Corpus, profiles: Mapping[str, UserProfile], cfg: PipelineConfig):
    scores = compute_rt_scores(corpus)
    infl = select_top_influencers(scores, cfg.p)
    users = build_user_set(corpus, infl)
    f = build_feature_matrix(corpus, users, infl, cfg.sentinel)
    u = build_user_level_matrix(corpus, profiles, users, cfg.reference_time)
    return infl, f, u


def reduce_all(f: FeatureMatrix, cfg: PipelineConfig, which=REDUCERS) -> dict[str, FeatureMatrix]:
    f_std, _ = standardize(f)
    out = {}
    for name in which:
        log.info("reducing F with %s to %d dims", name, cfg.dim)
        if name == "HypHC":
            out[name] = export_embedding(optimize(f_std, cfg.similarity(), cfg.hyphc()))
            continue
        if name == "SE":
            values = spectral_embedding(f_std.values, cfg.dim, cfg.se_neighbors, cfg.sigma, cfg.seed)
        elif name == "FA":
            values = feature_agglomeration(f_std.values, cfg.dim)
        else:
            raise ValueError(name)
        cols = tuple(f"e_{k:03d}" for k in range(1, cfg.dim + 1))
        out[name] = FeatureMatrix(f_std.user_ids, cols, values)
    return out


def assemble_feature_sets(u: FeatureMatrix, f: FeatureMatrix, reduced: Mapping[str, FeatureMatrix]):
    sets = {"U": u, "U+F": concat(u, f)}
    for name, m in reduced.items():
        sets[name] = concat(u, m)
    return sets


def run_matrix(feature_sets, labels, cfg: PipelineConfig) -> list[SeparationResult]:
    results = []
    for spec in all_separations():
        for name in FEATURE_SETS:
            if name not in feature_sets:
                continue
            r = run_separation(feature_sets, labels, name, spec, cfg.forest(), seed=cfg.seed,
                               test_fraction=cfg.test_fraction, smote_k=cfg.smote_k,
                               cv_folds=cfg.cv_folds)
            log.info("%-40s %-6s F1=%.4f", r.separation, name, r.f1)
            results.append(r)
    return results


def experiment_matrix(corpus: Corpus, profiles: Mapping[str, UserProfile], labels: Mapping[str, str],
                      cfg: PipelineConfig = PipelineConfig()) -> ExperimentResult:
    """Feature sets U, U+F, HypHC, SE, FA; all six separations; centroid reports."""
    infl, f, u = build_base_features(corpus, profiles, cfg)
    reduced = reduce_all(f, cfg)
    sets = assemble_feature_sets(u, f, reduced)
    results = run_matrix(sets, labels, cfg)
    cents = {name: centroid_report(name, m, labels) for name, m in reduced.items()}
    return ExperimentResult(sets, reduced, results, cents, infl.ids)
