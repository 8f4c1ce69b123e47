"""Seeded synthetic retweet corpora with planted collusive groups.

Organic users retweet influencers at random, favouring the popular ones,
after log-normal delays of tens of minutes. Each collusive group fixes on a
few target influencers and retweets most of their tweets within about a
minute. Organic users are labelled ``regular``; whole groups are labelled
``suspended`` or ``deleted``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InvalidConfig

START_TIME = 1_549_324_800  # 2019-02-05T00:00:00Z

_WORDS = ("vote", "india", "rally", "today", "news", "party", "people", "time", "great", "state",
          "leader", "change", "support", "watch", "live", "video", "join", "nation", "power", "future",
          "youth", "election", "campaign", "speech", "truth", "media", "report", "answer", "question",
          "development")
_LETTERS = "abcdefghijklmnopqrstuvwxyz0123456789_"


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    horizon_seconds: int = 140 * 86_400
    n_influencers: int = 20
    tweets_per_influencer: float = 10.0
    n_regular: int = 2000
    n_collusive_groups: int = 10
    group_size: int = 50
    targets_min: int = 1
    targets_max: int = 3
    organic_mu: float = 8.0
    organic_sigma: float = 1.5
    collusive_mu: float = 4.0
    collusive_sigma: float = 0.5
    organic_retweet_prob: float = 0.05
    collusive_retweet_prob: float = 0.7
    deleted_retweet_scale: float = 0.6
    collusive_cover_scale: float = 0.3
    suspended_fraction: float = 0.6
    plain_tweets: float = 40.0
    background_retweets: float = 40.0
    n_minor_accounts: int = 5000
    activity_sigma: float = 1.0  # log-sd of a per-user multiplier on plain and background activity

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and f.name != "seed" and v < 0:
                raise InvalidConfig(f"{f.name} must be >= 0, got {v}")
        for name in ("organic_retweet_prob", "collusive_retweet_prob", "deleted_retweet_scale",
                     "collusive_cover_scale", "suspended_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1]")
        if self.organic_sigma <= 0 or self.collusive_sigma <= 0:
            raise InvalidConfig("delay sigmas must be > 0")
        if self.n_collusive_groups and not 1 <= self.targets_min <= self.targets_max <= self.n_influencers:
            raise InvalidConfig("need 1 <= targets_min <= targets_max <= n_influencers")
        if self.horizon_seconds < 1:
            raise InvalidConfig("horizon_seconds must be >= 1")
        if self.n_influencers < 1:
            raise InvalidConfig("n_influencers must be >= 1")
        if self.background_retweets > 0 and self.n_minor_accounts < 1:
            raise InvalidConfig("background retweets need n_minor_accounts >= 1")


@dataclass
class SynthOutput:
    tweets: list[dict]
    profiles: list[dict]
    labels: dict[str, str]
    groups: dict[str, int]  # user_id -> group index, collusive users only

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"tweets": out / "tweets.jsonl", "profiles": out / "profiles.jsonl",
                 "labels": out / "labels.csv"}
        with open(paths["tweets"], "w", encoding="utf-8", newline="\n") as fh:
            for t in self.tweets:
                fh.write(json.dumps(t, separators=(",", ":")) + "\n")
        with open(paths["profiles"], "w", encoding="utf-8", newline="\n") as fh:
            for p in self.profiles:
                fh.write(json.dumps(p, separators=(",", ":")) + "\n")
        with open(paths["labels"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("user_id", "label"))
            for uid in sorted(self.labels):
                w.writerow((uid, self.labels[uid]))
        return paths


def _text(rng, n_words):
    return " ".join(_WORDS[k] for k in rng.integers(0, len(_WORDS), size=n_words))


def _screen_name(rng):
    n = int(rng.integers(5, 16))
    name = "".join(_LETTERS[k] for k in rng.integers(0, len(_LETTERS), size=n))
    if rng.random() < 0.2:
        name = name[: n // 2] + " " + name[n // 2:]
    return name


def _delays(rng, mu, sigma, size):
    return np.rint(rng.lognormal(mu, sigma, size=size)).astype(np.int64)


def generate(config: SynthConfig = SynthConfig()) -> SynthOutput:
    config.validate()
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n_coll = cfg.n_collusive_groups * cfg.group_size
    n_users = cfg.n_regular + n_coll
    width = max(5, len(str(n_users)))
    user_ids = [f"u{k:0{width}d}" for k in rng.permutation(n_users) + 1]
    regular = user_ids[:cfg.n_regular]

    # influencer tweets
    inf_ids = [f"i{k:03d}" for k in range(1, cfg.n_influencers + 1)]
    tweets: list[dict] = []
    inf_tweets = []  # (tweet_id, influencer_idx, created_at)
    for y, iid in enumerate(inf_ids):
        count = max(1, int(rng.poisson(cfg.tweets_per_influencer)))
        times = np.sort(rng.integers(0, cfg.horizon_seconds, size=count)) + START_TIME
        for t in times:
            tid = f"t{len(tweets) + 1:08d}"
            tweets.append({"tweet_id": tid, "user_id": iid, "created_at": int(t),
                           "text": _text(rng, int(rng.integers(3, 20)))})
            inf_tweets.append((tid, y, int(t)))
    tw_inf = np.array([y for _, y, _ in inf_tweets])
    tw_time = np.array([t for _, _, t in inf_tweets])

    popularity = 1.0 / np.arange(1, cfg.n_influencers + 1)
    popularity *= cfg.n_influencers / popularity.sum()
    organic_p = np.clip(cfg.organic_retweet_prob * popularity[tw_inf], 0.0, 1.0)

    def add_retweet(user, k, delay):
        tid, y, t0 = inf_tweets[k]
        tweets.append({"tweet_id": f"t{len(tweets) + 1:08d}", "user_id": user,
                       "created_at": t0 + int(delay),
                       "retweet_of": {"tweet_id": tid, "user_id": inf_ids[y], "created_at": t0}})

    def add_background(user):
        level = math.exp(cfg.activity_sigma * rng.standard_normal() - cfg.activity_sigma ** 2 / 2.0)
        for _ in range(int(rng.poisson(cfg.background_retweets * level))):
            minor = int(rng.integers(1, cfg.n_minor_accounts + 1))
            t0 = START_TIME + int(rng.integers(0, cfg.horizon_seconds))
            tweets.append({"tweet_id": f"t{len(tweets) + 1:08d}", "user_id": user,
                           "created_at": t0 + int(_delays(rng, cfg.organic_mu, cfg.organic_sigma, 1)[0]),
                           "retweet_of": {"tweet_id": f"m{minor:05d}_{t0}", "user_id": f"m{minor:05d}",
                                          "created_at": t0}})
        for _ in range(int(rng.poisson(cfg.plain_tweets * level))):
            tweets.append({"tweet_id": f"t{len(tweets) + 1:08d}", "user_id": user,
                           "created_at": START_TIME + int(rng.integers(0, cfg.horizon_seconds)),
                           "text": _text(rng, int(rng.integers(1, 25)))})

    def organic_activity(user, scale):
        hit = np.flatnonzero(rng.random(len(inf_tweets)) < organic_p * scale)
        for k, d in zip(hit, _delays(rng, cfg.organic_mu, cfg.organic_sigma, len(hit))):
            add_retweet(user, int(k), d)

    labels: dict[str, str] = {}
    groups: dict[str, int] = {}
    for user in regular:
        organic_activity(user, 1.0)
        add_background(user)
        labels[user] = "regular"

    n_susp = int(round(cfg.suspended_fraction * cfg.n_collusive_groups))
    mid = (cfg.targets_min + cfg.targets_max) / 2.0
    for g in range(cfg.n_collusive_groups):
        suspended = g < n_susp
        lo, hi = (math.ceil(mid), cfg.targets_max) if suspended else (cfg.targets_min, math.floor(mid))
        n_targets = int(rng.integers(lo, hi + 1))
        targets = rng.choice(cfg.n_influencers, size=n_targets, replace=False)
        p_c = cfg.collusive_retweet_prob * (1.0 if suspended else cfg.deleted_retweet_scale)
        target_tweets = np.flatnonzero(np.isin(tw_inf, targets))
        members = user_ids[cfg.n_regular + g * cfg.group_size: cfg.n_regular + (g + 1) * cfg.group_size]
        for user in members:
            hit = target_tweets[rng.random(len(target_tweets)) < p_c]
            for k, d in zip(hit, _delays(rng, cfg.collusive_mu, cfg.collusive_sigma, len(hit))):
                add_retweet(user, int(k), d)
            organic_activity(user, cfg.collusive_cover_scale)
            add_background(user)
            labels[user] = "suspended" if suspended else "deleted"
            groups[user] = g

    profiles = []
    for user in sorted(user_ids):
        profiles.append({
            "user_id": user,
            "followers": int(rng.lognormal(5.0, 1.5)),
            "friends": int(rng.lognormal(5.0, 1.2)),
            "likes": int(rng.lognormal(6.0, 1.8)),
            "account_created_at": START_TIME - int(rng.integers(86_400, 10 * 365 * 86_400)),
            "screen_name": _screen_name(rng),
            "bio": _text(rng, int(rng.integers(0, 20))),
        })
    return SynthOutput(tweets, profiles, labels, groups)
