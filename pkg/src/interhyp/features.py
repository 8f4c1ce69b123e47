"""Interaction features, user-level features and column standardization."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import MalformedRecord, MissingProfile, RowMismatch
from .influencers import InfluencerSet
from .ingest import Corpus, UserProfile

SENTINEL = -1e6

USER_LEVEL_COLUMNS = (
    "total_tweets",
    "retweets",
    "friends",
    "followers",
    "likes",
    "friends_followers_ratio",
    "account_age",
    "screen_name_chars",
    "bio_chars",
    "bio_words",
    "mean_tweet_chars",
    "mean_tweet_words",
    "screen_name_words",
)


@dataclass(frozen=True)
class InteractionPair:
    delay_median: float
    retweet_count: int


@dataclass
class FeatureMatrix:
    """Row-labelled real matrix; rows are users, columns are named features."""

    user_ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        self.user_ids = tuple(self.user_ids)
        self.columns = tuple(self.columns)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        if self.values.shape != (len(self.user_ids), len(self.columns)):
            raise ValueError(
                f"shape {self.values.shape} does not match "
                f"{len(self.user_ids)} rows x {len(self.columns)} columns")

    @property
    def shape(self):
        return self.values.shape

    def row_index(self) -> dict[str, int]:
        return {u: k for k, u in enumerate(self.user_ids)}

    def take(self, user_ids: Sequence[str]) -> "FeatureMatrix":
        """Rows for ``user_ids`` in that order."""
        index = self.row_index()
        try:
            rows = [index[u] for u in user_ids]
        except KeyError as exc:
            raise RowMismatch(f"user {exc.args[0]!r} not in matrix") from None
        return FeatureMatrix(tuple(user_ids), self.columns, self.values[rows])

    def with_values(self, values, columns=None) -> "FeatureMatrix":
        return FeatureMatrix(self.user_ids, self.columns if columns is None else columns, values)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("user_id",) + self.columns)
            for uid, row in zip(self.user_ids, self.values):
                w.writerow([uid] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "user_id":
                raise MalformedRecord(f"{path}: first column must be user_id")
            ids, rows = [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise MalformedRecord(f"{path}: expected {len(header)} fields", lineno)
                ids.append(row[0])
                try:
                    rows.append([float(v) for v in row[1:]])
                except ValueError as exc:
                    raise MalformedRecord(f"{path}: {exc}", lineno) from None
        values = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(header) - 1)
        return cls(tuple(ids), tuple(header[1:]), values)


@dataclass(frozen=True)
class Scaler:
    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("column", "mean", "std"))
            for c, m, s in zip(self.columns, self.mean, self.std):
                w.writerow((c, repr(float(m)), repr(float(s))))

    @classmethod
    def from_csv(cls, path) -> "Scaler":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["column", "mean", "std"]:
                raise MalformedRecord(f"{path}: expected header column,mean,std")
            cols, means, stds = [], [], []
            for row in reader:
                cols.append(row[0])
                means.append(float(row[1]))
                stds.append(float(row[2]))
        return cls(tuple(cols), np.array(means), np.array(stds))


def delay(retweet_time: int, original_time: int) -> int:
    """Seconds between a tweet and its retweet, absolute to absorb clock skew."""
    return abs(retweet_time - original_time)


def _median(values: Sequence[float]) -> float:
    s = sorted(values)
    n = len(s)
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2.0


def interaction_pair(corpus: Corpus, user: str, influencer: str,
                     sentinel: float = SENTINEL) -> InteractionPair:
    delays = [delay(r.created_at, r.retweet_of.created_at)
              for r in corpus.by_retweeter.get(user, ())
              if r.retweet_of.user_id == influencer]
    if not delays:
        return InteractionPair(sentinel, 0)
    return InteractionPair(_median(delays), len(delays))


def interaction_columns(influencers: Sequence[str]) -> tuple[str, ...]:
    cols = []
    for k, _ in enumerate(influencers, start=1):
        cols += [f"delay_{k:03d}", f"count_{k:03d}"]
    return tuple(cols)


def build_feature_matrix(corpus: Corpus, users: Iterable[str], influencers: InfluencerSet | Sequence[str],
                         sentinel: float = SENTINEL) -> FeatureMatrix:
    """The |U| x 2p matrix of (median delay, retweet count) pairs.

    Columns are interleaved per influencer in rank order; rows are users in
    sorted id order.
    """
    inf_ids = list(influencers)
    rank = {i: k for k, i in enumerate(inf_ids)}
    user_ids = tuple(sorted(users))
    values = np.empty((len(user_ids), 2 * len(inf_ids)))
    values[:, 0::2] = sentinel
    values[:, 1::2] = 0.0
    for row, user in enumerate(user_ids):
        delays: dict[int, list[int]] = {}
        for r in corpus.by_retweeter.get(user, ()):
            k = rank.get(r.retweet_of.user_id)
            if k is not None:
                delays.setdefault(k, []).append(delay(r.created_at, r.retweet_of.created_at))
        for k, ds in delays.items():
            values[row, 2 * k] = _median(ds)
            values[row, 2 * k + 1] = len(ds)
    return FeatureMatrix(user_ids, interaction_columns(inf_ids), values)


def reference_time_of(corpus: Corpus) -> int:
    return max((t.created_at for t in corpus.tweets), default=0)


def user_level_features(corpus: Corpus, profiles: Mapping[str, UserProfile], user: str,
                        reference_time: int) -> np.ndarray:
    prof = profiles.get(user)
    if prof is None:
        raise MissingProfile(f"no profile for user {user!r}")
    tweets = corpus.by_author.get(user, ())
    n = len(tweets)
    n_rt = sum(1 for t in tweets if t.retweet_of is not None)
    mean_chars = sum(t.n_chars for t in tweets) / n if n else 0.0
    mean_words = sum(t.n_words for t in tweets) / n if n else 0.0
    return np.array([
        n,
        n_rt,
        prof.friends,
        prof.followers,
        prof.likes,
        prof.friends / (prof.followers + 1),
        reference_time - prof.account_created_at,
        len(prof.screen_name),
        len(prof.bio),
        len(prof.bio.split()),
        mean_chars,
        mean_words,
        len(prof.screen_name.split()),
    ], dtype=np.float64)


def build_user_level_matrix(corpus: Corpus, profiles: Mapping[str, UserProfile], users: Iterable[str],
                            reference_time: int | None = None) -> FeatureMatrix:
    if reference_time is None:
        reference_time = reference_time_of(corpus)
    user_ids = tuple(sorted(users))
    values = np.empty((len(user_ids), len(USER_LEVEL_COLUMNS)))
    for row, user in enumerate(user_ids):
        values[row] = user_level_features(corpus, profiles, user, reference_time)
    return FeatureMatrix(user_ids, USER_LEVEL_COLUMNS, values)


def concat(left: FeatureMatrix, right: FeatureMatrix) -> FeatureMatrix:
    """Column-wise concatenation; both matrices must cover the same users."""
    if set(left.user_ids) != set(right.user_ids) or len(left.user_ids) != len(right.user_ids):
        raise RowMismatch("matrices cover different user sets")
    right = right.take(left.user_ids)
    dup = set(left.columns) & set(right.columns)
    if dup:
        raise RowMismatch(f"duplicate column names: {sorted(dup)[:3]}")
    return FeatureMatrix(left.user_ids, left.columns + right.columns,
                         np.hstack([left.values, right.values]))


def fit_scaler(m: FeatureMatrix) -> Scaler:
    mean = m.values.mean(axis=0)
    std = m.values.std(axis=0)
    # constant columns: keep the mean shift, skip the division
    std = np.where(std > 0, std, 1.0)
    return Scaler(m.columns, mean, std)


def apply_scaler(m: FeatureMatrix, scaler: Scaler) -> FeatureMatrix:
    if tuple(scaler.columns) != m.columns:
        raise RowMismatch("scaler columns do not match matrix columns")
    return m.with_values((m.values - scaler.mean) / scaler.std)


def standardize(m: FeatureMatrix) -> tuple[FeatureMatrix, Scaler]:
    scaler = fit_scaler(m)
    return apply_scaler(m, scaler), scaler


def zscore(x: np.ndarray) -> np.ndarray:
    """Plain-array column standardization with the same constant-column rule."""
    x = np.asarray(x, dtype=np.float64)
    std = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)
