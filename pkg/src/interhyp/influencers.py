"""Influencer ranking by distinct-retweeter count and the engaged-user set."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import Corpus


@dataclass(frozen=True)
class InfluencerSet:
    ranked: tuple[tuple[str, int], ...]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.ranked)

    @property
    def scores(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.ranked)

    @property
    def rank(self) -> dict[str, int]:
        return {i: k for k, (i, _) in enumerate(self.ranked)}

    def __len__(self):
        return len(self.ranked)

    def __iter__(self):
        return iter(self.ids)


@dataclass(frozen=True)
class InfluencerCurves:
    rt_score: np.ndarray
    cumulative: np.ndarray
    marginal: np.ndarray

    def rows(self):
        for k in range(len(self.rt_score)):
            yield k + 1, int(self.rt_score[k]), int(self.cumulative[k]), int(self.marginal[k])


def _retweeters_by_account(corpus: Corpus) -> dict[str, set[str]]:
    return {acct: {r.user_id for r in recs} for acct, recs in corpus.by_original_user.items()}


def compute_rt_scores(corpus: Corpus) -> dict[str, int]:
    """Number of distinct users that retweeted each account at least once."""
    return {acct: len(users) for acct, users in _retweeters_by_account(corpus).items()}


def _ranked(scores: Mapping[str, int]) -> list[tuple[str, int]]:
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def select_top_influencers(scores: Mapping[str, int], p: int) -> InfluencerSet:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    ranked = _ranked(scores)
    if p > len(ranked):
        warnings.warn(f"requested p={p} but only {len(ranked)} retweeted accounts exist; using all",
                      stacklevel=2)
    return InfluencerSet(tuple(ranked[:p]))


def build_user_set(corpus: Corpus, influencers: InfluencerSet | Sequence[str]) -> frozenset[str]:
    """Users with at least one retweet of any selected influencer."""
    users: set[str] = set()
    for acct in influencers:
        users.update(r.user_id for r in corpus.by_original_user.get(acct, ()))
    return frozenset(users)


def influencer_curves(corpus: Corpus, max_p: int) -> InfluencerCurves:
    """rt_score per rank, |U| for the top-k prefix, and the per-rank growth of |U|.

    Series have length ``max_p`` (or fewer when fewer accounts were
    retweeted).
    """
    if max_p < 1:
        raise ValueError(f"max_p must be >= 1, got {max_p}")
    retweeters = _retweeters_by_account(corpus)
    ranked = _ranked({a: len(u) for a, u in retweeters.items()})[:max_p]
    seen: set[str] = set()
    rt, cum = [], []
    for acct, score in ranked:
        seen |= retweeters[acct]
        rt.append(score)
        cum.append(len(seen))
    cumulative = np.asarray(cum, dtype=np.int64)
    marginal = np.diff(cumulative, prepend=0)
    return InfluencerCurves(np.asarray(rt, dtype=np.int64), cumulative, marginal)
