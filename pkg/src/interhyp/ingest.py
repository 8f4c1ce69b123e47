"""Loading tweets, profiles and labels into an indexed in-memory corpus.

Input formats (one JSON object per line for the two ``.jsonl`` files)::

    tweets.jsonl    {"tweet_id": "t9", "user_id": "u1", "created_at": 1550000300,
                     "retweet_of": {"tweet_id": "t1", "user_id": "i1",
                                    "created_at": 1550000000},
                     "text": "optional"}
    profiles.jsonl  {"user_id": "u1", "followers": 10, "friends": 3, "likes": 0,
                     "account_created_at": 1400000000, "screen_name": "abc",
                     "bio": "..."}
    labels.csv      user_id,label   (label in regular / suspended / deleted)

Tweet text is never kept; only its length in characters and words survives
parsing.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from . import CLASSES
from .errors import DuplicateTweetId, DuplicateUser, MalformedRecord, UnknownLabel


@dataclass(frozen=True, slots=True)
class RetweetRef:
    tweet_id: str
    user_id: str
    created_at: int


@dataclass(frozen=True, slots=True)
class TweetRecord:
    tweet_id: str
    user_id: str
    created_at: int
    retweet_of: RetweetRef | None = None
    n_chars: int = 0
    n_words: int = 0

    @property
    def is_retweet(self) -> bool:
        return self.retweet_of is not None

    def to_dict(self) -> dict:
        out = {"tweet_id": self.tweet_id, "user_id": self.user_id, "created_at": self.created_at}
        if self.retweet_of is not None:
            r = self.retweet_of
            out["retweet_of"] = {"tweet_id": r.tweet_id, "user_id": r.user_id, "created_at": r.created_at}
        if self.n_chars or self.n_words:
            out["n_chars"] = self.n_chars
            out["n_words"] = self.n_words
        return out


@dataclass(frozen=True, slots=True)
class UserProfile:
    user_id: str
    followers: int
    friends: int
    likes: int
    account_created_at: int
    screen_name: str = ""
    bio: str = ""


def _require_id(obj, key, line):
    value = obj.get(key)
    if value is None or value == "":
        raise MalformedRecord(f"missing {key}", line)
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise MalformedRecord(f"{key} must be a string", line)
    return str(value)


def _require_int(obj, key, line, *, minimum=0):
    if key not in obj or obj[key] is None:
        raise MalformedRecord(f"missing {key}", line)
    value = obj[key]
    # bool is an int subclass; 1.0 style floats are rejected too
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecord(f"{key} must be an integer, got {value!r}", line)
    if value < minimum:
        raise MalformedRecord(f"{key} must be >= {minimum}, got {value}", line)
    return value


def _load_json_object(line, lineno):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise MalformedRecord("expected a JSON object", lineno)
    return obj


def parse_tweet_record(line: str, lineno: int | None = None) -> TweetRecord:
    """Parse one line of ``tweets.jsonl``.

    The retweet target may be given either as a nested ``retweet_of`` object
    or as the flat fields ``retweet_of_tweet_id``, ``retweet_of_user_id`` and
    ``retweet_of_created_at``. A partial triple is an error.
    """
    obj = _load_json_object(line, lineno)
    tweet_id = _require_id(obj, "tweet_id", lineno)
    user_id = _require_id(obj, "user_id", lineno)
    created_at = _require_int(obj, "created_at", lineno)

    nested = obj.get("retweet_of")
    if nested is not None:
        if not isinstance(nested, dict):
            raise MalformedRecord("retweet_of must be an object", lineno)
        triple = {k: nested.get(k) for k in ("tweet_id", "user_id", "created_at")}
    else:
        triple = {k: obj.get(f"retweet_of_{k}") for k in ("tweet_id", "user_id", "created_at")}

    present = [v is not None for v in triple.values()]
    retweet_of = None
    if all(present):
        retweet_of = RetweetRef(
            tweet_id=_require_id(triple, "tweet_id", lineno),
            user_id=_require_id(triple, "user_id", lineno),
            created_at=_require_int(triple, "created_at", lineno),
        )
    elif any(present):
        missing = [k for k, v in triple.items() if v is None]
        raise MalformedRecord(f"partial retweet triple, missing {', '.join(missing)}", lineno)

    text = obj.get("text")
    if text is not None:
        if not isinstance(text, str):
            raise MalformedRecord("text must be a string", lineno)
        n_chars, n_words = len(text), len(text.split())
    else:
        n_chars = _require_int(obj, "n_chars", lineno) if "n_chars" in obj else 0
        n_words = _require_int(obj, "n_words", lineno) if "n_words" in obj else 0
    return TweetRecord(tweet_id, user_id, created_at, retweet_of, n_chars, n_words)


def _frozen_index(index: Mapping[str, list]) -> Mapping[str, tuple]:
    return MappingProxyType({k: tuple(v) for k, v in index.items()})


@dataclass(frozen=True)
class Corpus:
    """Immutable tweet collection plus the lookups the pipeline needs.

    ``by_original_user`` maps an account to every retweet targeting it,
    ``by_retweeter`` maps a user to the retweets they made, ``by_author``
    maps a user to all of their tweets and ``originals`` maps tweet ids to
    records.
    """

    tweets: tuple[TweetRecord, ...]
    by_original_user: Mapping[str, tuple[TweetRecord, ...]] = field(repr=False)
    by_retweeter: Mapping[str, tuple[TweetRecord, ...]] = field(repr=False)
    by_author: Mapping[str, tuple[TweetRecord, ...]] = field(repr=False)
    originals: Mapping[str, TweetRecord] = field(repr=False)

    @classmethod
    def from_records(cls, records: Iterable[TweetRecord]) -> "Corpus":
        tweets = tuple(records)
        originals: dict[str, TweetRecord] = {}
        by_orig: dict[str, list] = defaultdict(list)
        by_rt: dict[str, list] = defaultdict(list)
        by_author: dict[str, list] = defaultdict(list)
        for rec in tweets:
            if rec.tweet_id in originals:
                raise DuplicateTweetId(f"duplicate tweet_id {rec.tweet_id!r}")
            originals[rec.tweet_id] = rec
            by_author[rec.user_id].append(rec)
            if rec.retweet_of is not None:
                by_orig[rec.retweet_of.user_id].append(rec)
                by_rt[rec.user_id].append(rec)
        return cls(
            tweets=tweets,
            by_original_user=_frozen_index(by_orig),
            by_retweeter=_frozen_index(by_rt),
            by_author=_frozen_index(by_author),
            originals=MappingProxyType(originals),
        )

    @property
    def retweets(self) -> tuple[TweetRecord, ...]:
        return tuple(t for t in self.tweets if t.retweet_of is not None)

    def __len__(self) -> int:
        return len(self.tweets)


def load_corpus(path) -> Corpus:
    records = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = parse_tweet_record(line, lineno)
            if rec.tweet_id in seen:
                raise DuplicateTweetId(f"line {lineno}: duplicate tweet_id {rec.tweet_id!r}")
            seen.add(rec.tweet_id)
            records.append(rec)
    return Corpus.from_records(records)


def dump_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in corpus.tweets:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")


def parse_profile(line: str, lineno: int | None = None) -> UserProfile:
    obj = _load_json_object(line, lineno)
    for key in ("screen_name", "bio"):
        if obj.get(key) is not None and not isinstance(obj[key], str):
            raise MalformedRecord(f"{key} must be a string", lineno)
    return UserProfile(
        user_id=_require_id(obj, "user_id", lineno),
        followers=_require_int(obj, "followers", lineno),
        friends=_require_int(obj, "friends", lineno),
        likes=_require_int(obj, "likes", lineno),
        account_created_at=_require_int(obj, "account_created_at", lineno),
        screen_name=obj.get("screen_name") or "",
        bio=obj.get("bio") or "",
    )


def load_profiles(path) -> dict[str, UserProfile]:
    profiles: dict[str, UserProfile] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            prof = parse_profile(line, lineno)
            if prof.user_id in profiles:
                raise DuplicateUser(f"line {lineno}: duplicate profile for {prof.user_id!r}")
            profiles[prof.user_id] = prof
    return profiles


def load_labels(path) -> dict[str, str]:
    """Read ``user_id,label`` rows; labels must be one of the three classes."""
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return labels
        if [h.strip() for h in header] != ["user_id", "label"]:
            raise MalformedRecord(f"expected header 'user_id,label', got {','.join(header)!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MalformedRecord(f"expected 2 columns, got {len(row)}", lineno)
            user, label = row[0].strip(), row[1].strip()
            if label not in CLASSES:
                raise UnknownLabel(f"line {lineno}: unknown label {label!r}")
            if user in labels:
                raise DuplicateUser(f"line {lineno}: duplicate user {user!r}")
            labels[user] = label
    return labels
