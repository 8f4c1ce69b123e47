"""Command-line pipeline: ``interhyp <stage> [flags]``.

Every stage writes into the run directory (``--out``). Stages reuse earlier
artifacts that are already on disk and still match the manifest, so a later
stage never recomputes an earlier one.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import CLASSES, __version__
from .config import PipelineConfig, load_config
from .errors import DataError, InvalidConfig
from .evaluate import (CENTROID_PAIRS, centroid_report, read_results_table, run_matrix,
                       write_centroid_table, write_results_table)
from .features import (FeatureMatrix, Scaler, apply_scaler, build_feature_matrix, build_user_level_matrix,
                       concat, fit_scaler)
from .hyphc import KernelWeights, export_embedding, median_heuristic_sigma, optimize_weights
from .influencers import (InfluencerSet, build_user_set, compute_rt_scores, influencer_curves,
                          select_top_influencers)
from .ingest import dump_corpus, load_corpus, load_labels, load_profiles
from .learn import FEATURE_SETS, all_separations
from .synth import SynthConfig, generate

log = logging.getLogger("interhyp")

STAGES = ("synth", "ingest", "influencers", "curves", "features", "embed", "reduce", "classify", "evaluate")

# bump a stage's version whenever its output format or semantics change
STAGE_VERSION = {"ingest": 1, "influencers": 1, "curves": 1, "features": 1, "embed": 1, "reduce": 1,
                 "classify": 1, "evaluate": 1}

_HYPHC_KEYS = ("dim", "tau", "anneal_factor", "epochs", "triplets_per_epoch", "batch_size", "lr", "eps_ball",
               "init_radius", "restarts", "optimizer", "sigma", "sim_sample_size", "seed")
STAGE_KEYS = {
    "ingest": (),
    "influencers": ("p",),
    "curves": ("max_p",),
    "features": ("sentinel", "reference_time"),
    "embed": _HYPHC_KEYS,
    "reduce": ("dim", "se_neighbors", "sigma", "sim_sample_size", "seed"),
    "classify": ("smote_k", "trees", "max_depth", "min_samples_leaf", "max_features", "test_fraction",
                 "cv_folds", "seed"),
    "evaluate": (),
}

REDUCER_FILES = {"SE": "reduced_se.csv", "FA": "reduced_fa.csv", "PCA": "reduced_pca.csv"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# --------------------------------------------------------------------------
# hashing and the manifest

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """A run directory plus its manifest."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / "manifest.json"
        self.manifest = {"version": __version__, "stages": {}}
        if self.manifest_path.exists():
            try:
                self.manifest = json.loads(self.manifest_path.read_text(encoding="utf-8"))
                self.manifest.setdefault("stages", {})
            except json.JSONDecodeError:
                log.warning("ignoring unreadable manifest %s", self.manifest_path)
        self.manifest["version"] = __version__
        self.manifest["config_hash"] = cfg.digest()

    def path(self, name) -> Path:
        return self.out / name

    def input_path(self, key) -> Path:
        """Raw inputs: relative paths are tried in the working directory, then the run directory."""
        raw = Path(getattr(self.cfg, key))
        if raw.is_absolute() or raw.exists():
            return raw
        return self.out / raw

    def fingerprint(self, stage, inputs) -> dict:
        return {"version": STAGE_VERSION[stage], "config": self.cfg.digest(STAGE_KEYS[stage]),
                "inputs": {k: sha256_file(p) for k, p in sorted(inputs.items())}}

    def is_current(self, stage, outputs, inputs) -> bool:
        if not all(self.path(o).exists() for o in outputs):
            return False
        entry = self.manifest["stages"].get(stage)
        if entry is None:
            return True  # artifacts placed by hand: trust them
        want = self.fingerprint(stage, inputs)
        return all(entry.get(k) == v for k, v in want.items())

    def record(self, stage, outputs, inputs):
        entry = self.fingerprint(stage, inputs)
        entry["outputs"] = {o: sha256_file(self.path(o)) for o in outputs}
        self.manifest["stages"][stage] = entry
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")


# --------------------------------------------------------------------------
# stages: each ``_stage_x`` computes, ``ensure_x`` reuses when possible

def _stage(name, outputs, inputs_fn):
    """Decorator: wires a compute function into the resume/record protocol."""
    def wrap(compute):
        def ensure(run: Run, force=False):
            inputs = inputs_fn(run)
            if not force and run.is_current(name, outputs(run) if callable(outputs) else outputs, inputs):
                log.info("%s: reusing artifacts in %s", name, run.out)
                return
            for p in inputs.values():
                if not Path(p).exists():
                    raise FileNotFoundError(f"{name}: missing input {p}")
            log.info("%s: computing", name)
            compute(run)
            run.record(name, outputs(run) if callable(outputs) else outputs, inputs)
        ensure.stage = name
        return ensure
    return wrap


def _ingest_inputs(run):
    return {"tweets": run.input_path("tweets"), "profiles": run.input_path("profiles"),
            "labels": run.input_path("labels")}


@_stage("ingest", ("corpus.jsonl", "ingest_summary.csv"), _ingest_inputs)
def ensure_ingest(run: Run):
    corpus = load_corpus(run.input_path("tweets"))
    profiles = load_profiles(run.input_path("profiles"))
    labels = load_labels(run.input_path("labels"))
    dump_corpus(corpus, run.path("corpus.jsonl"))
    counts = {c: 0 for c in CLASSES}
    for v in labels.values():
        counts[v] += 1
    rows = [("tweets", len(corpus)), ("retweets", len(corpus.retweets)),
            ("authors", len(corpus.by_author)), ("profiles", len(profiles))]
    rows += [(f"labelled_{c}", counts[c]) for c in CLASSES]
    _write_rows(run.path("ingest_summary.csv"), ("quantity", "count"), rows)


def _after_ingest(run):
    ensure_ingest(run)
    return {"corpus": run.path("corpus.jsonl")}


@_stage("influencers", ("influencers.csv", "users.csv"), _after_ingest)
def ensure_influencers(run: Run):
    corpus = load_corpus(run.path("corpus.jsonl"))
    infl = select_top_influencers(compute_rt_scores(corpus), run.cfg.p)
    _write_rows(run.path("influencers.csv"), ("rank", "user_id", "rt_score"),
                [(k + 1, i, s) for k, (i, s) in enumerate(infl.ranked)])
    users = sorted(build_user_set(corpus, infl))
    _write_rows(run.path("users.csv"), ("user_id",), [(u,) for u in users])


@_stage("curves", ("curves.csv", "curves.png"), _after_ingest)
def ensure_curves(run: Run):
    from .plotting import plot_curves
    corpus = load_corpus(run.path("corpus.jsonl"))
    curves = influencer_curves(corpus, run.cfg.max_p)
    _write_rows(run.path("curves.csv"), ("rank", "rt_score", "cumulative_users", "marginal_users"),
                curves.rows())
    plot_curves(curves, run.path("curves.png"))


def _after_influencers(run):
    ensure_influencers(run)
    return {"corpus": run.path("corpus.jsonl"), "influencers": run.path("influencers.csv"),
            "users": run.path("users.csv"), "profiles": run.input_path("profiles")}


@_stage("features", ("F.csv", "U.csv", "UF.csv", "F_scaler.csv"), _after_influencers)
def ensure_features(run: Run):
    corpus = load_corpus(run.path("corpus.jsonl"))
    profiles = load_profiles(run.input_path("profiles"))
    infl = read_influencers(run.path("influencers.csv"))
    users = [r[0] for r in _read_rows(run.path("users.csv"))]
    f = build_feature_matrix(corpus, users, infl, run.cfg.sentinel)
    u = build_user_level_matrix(corpus, profiles, users, run.cfg.reference_time)
    f.to_csv(run.path("F.csv"))
    u.to_csv(run.path("U.csv"))
    concat(u, f).to_csv(run.path("UF.csv"))
    fit_scaler(f).to_csv(run.path("F_scaler.csv"))


def _after_features(run):
    ensure_features(run)
    return {"F": run.path("F.csv"), "F_scaler": run.path("F_scaler.csv")}


def _standardized_f(run) -> FeatureMatrix:
    f = FeatureMatrix.from_csv(run.path("F.csv"))
    return apply_scaler(f, Scaler.from_csv(run.path("F_scaler.csv")))


@_stage("embed", ("embeddings.csv", "training_log.csv", "training_loss.png"), _after_features)
def ensure_embed(run: Run):
    from .plotting import plot_training
    cfg = run.cfg
    f_std = _standardized_f(run)
    sim = cfg.similarity()
    sigma = sim.sigma or median_heuristic_sigma(f_std.values, sim.sample_size, sim.seed)
    emb = optimize_weights(KernelWeights(f_std.values, sigma), cfg.hyphc(), user_ids=f_std.user_ids)
    export_embedding(emb).to_csv(run.path("embeddings.csv"))
    emb.write_log(run.path("training_log.csv"))
    plot_training(emb.losses, emb.taus, run.path("training_loss.png"))


def _reduce_outputs(run):
    return tuple(REDUCER_FILES[m] for m in run.reducers)


@_stage("reduce", _reduce_outputs, _after_features)
def ensure_reduce(run: Run):
    from .baselines import feature_agglomeration, pca_reduce, spectral_embedding
    cfg = run.cfg
    f_std = _standardized_f(run)
    cols = tuple(f"e_{k:03d}" for k in range(1, cfg.dim + 1))
    for method in run.reducers:
        if method == "SE":
            values = spectral_embedding(f_std.values, cfg.dim, cfg.se_neighbors, cfg.sigma, cfg.seed)
        elif method == "FA":
            values = feature_agglomeration(f_std.values, cfg.dim)
        else:
            values = pca_reduce(f_std.values, cfg.dim)
        FeatureMatrix(f_std.user_ids, cols, values).to_csv(run.path(REDUCER_FILES[method]))


def _classify_inputs(run):
    ensure_features(run)
    ensure_embed(run)
    ensure_reduce(run)
    inputs = {"U": run.path("U.csv"), "UF": run.path("UF.csv"), "embeddings": run.path("embeddings.csv"),
              "labels": run.input_path("labels")}
    for m in run.reducers:
        inputs[m] = run.path(REDUCER_FILES[m])
    return inputs


def _feature_sets(run):
    u = FeatureMatrix.from_csv(run.path("U.csv"))
    sets = {"U": u, "U+F": FeatureMatrix.from_csv(run.path("UF.csv")),
            "HypHC": concat(u, FeatureMatrix.from_csv(run.path("embeddings.csv")))}
    for m in ("SE", "FA"):
        if m in run.reducers:
            sets[m] = concat(u, FeatureMatrix.from_csv(run.path(REDUCER_FILES[m])))
    return sets


@_stage("classify", ("results.csv", "results.png"), _classify_inputs)
def ensure_classify(run: Run):
    from .plotting import plot_results
    labels = load_labels(run.input_path("labels"))
    sets = _feature_sets(run)
    results = run_matrix(sets, labels, run.cfg)
    seps = [s.name for s in all_separations()]
    names = [fs for fs in FEATURE_SETS if fs in sets]
    scores = {(r.feature_set, r.separation): r.f1 for r in results}
    write_results_table(run.path("results.csv"), scores, seps, names)
    plot_results(read_results_table(run.path("results.csv")), seps, names, run.path("results.png"))


_CENTROID_FILES = tuple(f"centroids_{r}.csv" for r in ("HypHC", "SE", "FA"))


def _evaluate_inputs(run):
    ensure_classify(run)
    return {"results": run.path("results.csv"), "embeddings": run.path("embeddings.csv"),
            "SE": run.path(REDUCER_FILES["SE"]), "FA": run.path(REDUCER_FILES["FA"]),
            "labels": run.input_path("labels")}


@_stage("evaluate", _CENTROID_FILES + ("centroids.csv", "centroids.png"), _evaluate_inputs)
def ensure_evaluate(run: Run):
    from .plotting import plot_centroids
    labels = load_labels(run.input_path("labels"))
    reduced = {"HypHC": run.path("embeddings.csv"), "SE": run.path(REDUCER_FILES["SE"]),
               "FA": run.path(REDUCER_FILES["FA"])}
    reports = {}
    for name, path in reduced.items():
        reports[name] = centroid_report(name, FeatureMatrix.from_csv(path), labels)
        reports[name].to_csv(run.path(f"centroids_{name}.csv"))
    write_centroid_table(run.path("centroids.csv"), reports)
    plot_centroids(reports, CENTROID_PAIRS, run.path("centroids.png"))


ENSURE = {"ingest": ensure_ingest, "influencers": ensure_influencers, "curves": ensure_curves,
          "features": ensure_features, "embed": ensure_embed, "reduce": ensure_reduce,
          "classify": ensure_classify, "evaluate": ensure_evaluate}


# --------------------------------------------------------------------------
# small csv helpers

def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [row for row in reader if row]


def read_influencers(path) -> InfluencerSet:
    return InfluencerSet(tuple((r[1], int(r[2])) for r in _read_rows(path)))


# --------------------------------------------------------------------------
# argument parsing

def _flag(name):
    return "--" + name.replace("_", "-")


def _synth_fields():
    return [f for f in dataclasses.fields(SynthConfig)]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="interhyp", description="Interaction features and hyperbolic clustering pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--out", default="run", help="output directory (default: run)")
    for f in _synth_fields():
        sp.add_argument(_flag(f.name), dest=f"synth_{f.name}", default=None, metavar="X",
                        help=f"default {getattr(SynthConfig(), f.name)}")
    sp.add_argument("-v", "--verbose", action="store_true")

    helps = {"ingest": "validate inputs and write the normalised corpus",
             "influencers": "rank influencers and build the engaged-user set",
             "curves": "influencer curves (csv + figure)",
             "features": "interaction (F) and user-level (U) feature matrices",
             "embed": "HypHC embedding of standardized F",
             "reduce": "spectral embedding / feature agglomeration / PCA of standardized F",
             "classify": "random-forest F1 for every feature set and separation",
             "evaluate": "full experiment: classification plus class-centroid distances"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", default=None, help="flat key = value config file")
        for f in dataclasses.fields(PipelineConfig):
            p.add_argument(_flag(f.name), dest=f.name, default=None, metavar="X")
        if name in ("reduce", "classify", "evaluate"):
            p.add_argument("--method", choices=("se", "fa", "pca", "all"), default="all",
                           help="reducers to run (all = se and fa)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _synth_config(args) -> SynthConfig:
    values = {}
    for f in _synth_fields():
        raw = getattr(args, f"synth_{f.name}")
        if raw is None:
            continue
        typ = type(getattr(SynthConfig(), f.name))
        try:
            values[f.name] = typ(raw) if typ is not int else int(raw)
        except ValueError:
            raise InvalidConfig(f"--{f.name.replace('_', '-')}: cannot parse {raw!r}") from None
    return SynthConfig(**values)


def _run_synth(args):
    cfg = _synth_config(args)
    print("# synth config\n" + "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in _synth_fields()),
          end="", file=sys.stderr)
    generate(cfg).write(args.out)
    return 0


def _run_stage(args):
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(PipelineConfig)}
    cfg = load_config(args.config, overrides)
    print(f"# interhyp {args.command}: resolved config\n{cfg.render()}", end="", file=sys.stderr)
    run = Run(cfg)
    method = getattr(args, "method", "all")
    run.reducers = ("SE", "FA") if method == "all" else (method.upper(),)
    if args.command in ("classify", "evaluate") and method != "all":
        if args.command == "evaluate" or method == "pca":
            raise UsageError(f"{args.command} needs --method all" if args.command == "evaluate"
                             else "pca is not a classification feature set")
    ENSURE[args.command](run, force=True)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _run_synth(args)
        return _run_stage(args)
    except (UsageError, InvalidConfig) as exc:
        print(f"interhyp: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"interhyp: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"interhyp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
