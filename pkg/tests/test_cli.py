import json
import os

import pytest

from interhyp.cli import main

SYNTH = ["--seed", "3", "--n-regular", "150", "--n-collusive-groups", "4", "--group-size", "12",
         "--n-influencers", "8", "--n-minor-accounts", "40"]
CONFIG = "p = 8\nmax_p = 8\ndim = 3\nepochs = 3\ntriplets_per_epoch = 2000\ntrees = 10\nseed = 1\n"


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(d)] + SYNTH) == 0
    (d / "run.cfg").write_text(CONFIG)
    return d


def stage(cmd, corpus_dir, out, *extra):
    return main([cmd, "--config", str(corpus_dir / "run.cfg"), "--out", str(out),
                 "--tweets", str(corpus_dir / "tweets.jsonl"),
                 "--profiles", str(corpus_dir / "profiles.jsonl"),
                 "--labels", str(corpus_dir / "labels.csv"), *extra])


def snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_usage_errors(capsys, tmp_path):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["embed", "--dim", "abc", "--out", str(tmp_path)]) == 1
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    assert main(["ingest", "--config", str(cfg)]) == 1
    assert main(["synth", "--out", str(tmp_path / "s"), "--organic-retweet-prob", "2"]) == 1


def test_data_errors(capsys, tmp_path, corpus_dir):
    assert main(["ingest", "--out", str(tmp_path / "r"), "--tweets", str(tmp_path / "missing.jsonl")]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"tweet_id": "1"}\n')
    assert main(["ingest", "--out", str(tmp_path / "r"), "--tweets", str(bad),
                 "--profiles", str(corpus_dir / "profiles.jsonl"),
                 "--labels", str(corpus_dir / "labels.csv")]) == 2
    assert "data error" in capsys.readouterr().err


def test_evaluate_end_to_end(corpus_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert stage("evaluate", corpus_dir, out) == 0
    assert "resolved config" in capsys.readouterr().err
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 2 and len(lines[1].split(",")) == 1 + 30
    for name in ("centroids_HypHC.csv", "centroids_SE.csv", "centroids_FA.csv", "centroids.csv",
                 "centroids.png", "results.png", "training_loss.png", "embeddings.csv"):
        assert (out / name).stat().st_size > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stages"]) == {"ingest", "influencers", "features", "embed", "reduce", "classify",
                                       "evaluate"}
    assert "inputs" in manifest["stages"]["embed"] and "config_hash" in manifest


def test_later_stage_reuses_earlier_artifacts(corpus_dir, tmp_path):
    out = tmp_path / "run"
    assert stage("embed", corpus_dir, out) == 0
    before = {p.name: p.stat().st_mtime_ns for p in out.iterdir()}
    assert stage("reduce", corpus_dir, out) == 0
    after = {p.name: p.stat().st_mtime_ns for p in out.iterdir()}
    for name in ("corpus.jsonl", "F.csv", "U.csv", "embeddings.csv"):
        assert before[name] == after[name]
    # a changed embedding setting invalidates only the embedding
    assert stage("classify", corpus_dir, out, "--epochs", "4") == 0
    final = {p.name: p.stat().st_mtime_ns for p in out.iterdir()}
    assert final["F.csv"] == before["F.csv"]
    assert final["embeddings.csv"] != before["embeddings.csv"]


def test_curves_and_influencers(corpus_dir, tmp_path):
    out = tmp_path / "run"
    assert stage("curves", corpus_dir, out) == 0
    assert (out / "curves.csv").read_text().splitlines()[0] == "rank,rt_score,cumulative_users,marginal_users"
    assert stage("influencers", corpus_dir, out) == 0
    rows = (out / "influencers.csv").read_text().splitlines()
    assert rows[0] == "rank,user_id,rt_score" and len(rows) == 9


def test_every_subcommand_deterministic_across_threads(corpus_dir, tmp_path):
    a, b = tmp_path / "t1", tmp_path / "t4"
    assert main(["synth", "--out", str(tmp_path / "s1")] + SYNTH) == 0
    assert main(["synth", "--out", str(tmp_path / "s2")] + SYNTH) == 0
    assert snapshot(tmp_path / "s1") == snapshot(tmp_path / "s2")
    for cmd in ("ingest", "influencers", "curves", "features", "embed", "reduce", "classify", "evaluate"):
        assert stage(cmd, corpus_dir, a, "--threads", "1") == 0
        assert stage(cmd, corpus_dir, b, "--threads", "4") == 0
        assert snapshot(a) == snapshot(b), cmd


def test_embed_twice_identical(corpus_dir, tmp_path):
    assert stage("embed", corpus_dir, tmp_path / "x", "--seed", "7") == 0
    first = (tmp_path / "x" / "embeddings.csv").read_bytes()
    os.remove(tmp_path / "x" / "embeddings.csv")
    assert stage("embed", corpus_dir, tmp_path / "x", "--seed", "7") == 0
    assert (tmp_path / "x" / "embeddings.csv").read_bytes() == first
