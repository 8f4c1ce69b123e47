import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from interhyp.ingest import Corpus, parse_tweet_record  # noqa: E402


def tweet(tid, user, t, rt=None, text=None):
    """Tweet dict; ``rt`` is (original_tweet_id, original_user, original_time)."""
    d = {"tweet_id": tid, "user_id": user, "created_at": t}
    if rt is not None:
        d["retweet_of"] = {"tweet_id": rt[0], "user_id": rt[1], "created_at": rt[2]}
    if text is not None:
        d["text"] = text
    return d


def corpus_of(dicts):
    return Corpus.from_records(parse_tweet_record(json.dumps(d), k) for k, d in enumerate(dicts, 1))


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    return path


def random_tweets(rng, n_tweets=200, n_users=15, n_infl=5, t0=1_550_000_000):
    """Small random corpus: influencer originals plus user retweets (some reversed clocks)."""
    out = []
    originals = []
    for k in range(max(1, n_tweets // 4)):
        i = f"i{rng.integers(n_infl)}"
        t = t0 + int(rng.integers(0, 10_000))
        out.append(tweet(f"o{k}", i, t))
        originals.append((f"o{k}", i, t))
    k = 0
    while len(out) < n_tweets:
        oid, i, t = originals[rng.integers(len(originals))]
        user = f"u{rng.integers(n_users):02d}"
        skew = int(rng.integers(-5, 3000))
        out.append(tweet(f"r{k}", user, t + skew, rt=(oid, i, t)))
        k += 1
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
