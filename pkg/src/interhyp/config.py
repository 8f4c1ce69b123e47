"""Flat ``key = value`` pipeline configuration.

One setting per line, ``#`` starts a comment, unknown keys are an error.
Command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from typing import Any, Mapping

from .baselines import ReducerSpec
from .errors import InvalidConfig
from .hyphc import HypHCConfig, SimilarityConfig
from .learn import ForestConfig

_NONE = ("none", "null", "")


@dataclass(frozen=True)
class PipelineConfig:
    # paths
    tweets: str = "tweets.jsonl"
    profiles: str = "profiles.jsonl"
    labels: str = "labels.csv"
    out: str = "run"
    # influencers / features
    p: int = 300
    max_p: int = 500
    sentinel: float = -1e6
    reference_time: int | None = None
    # hyphc
    dim: int = 60
    tau: float = 0.05
    anneal_factor: float = 0.5
    epochs: int = 50
    triplets_per_epoch: int | None = None
    batch_size: int = 256
    lr: float = 1e-3
    eps_ball: float = 1e-5
    init_radius: float = 1e-3
    restarts: int = 1
    optimizer: str = "adam"
    sigma: float | None = None
    sim_sample_size: int = 10_000
    # baselines
    se_neighbors: int = 10
    # learning
    smote_k: int = 5
    trees: int = 200
    max_depth: int | None = None
    min_samples_leaf: int = 2
    max_features: str = "sqrt"
    test_fraction: float = 0.2
    cv_folds: int | None = None
    # misc
    seed: int = 0
    threads: int = 1

    # settings that never change results (excluded from the config hash)
    NON_SEMANTIC = ("threads", "out")

    def hyphc(self) -> HypHCConfig:
        return HypHCConfig(dim=self.dim, tau=self.tau, anneal_factor=self.anneal_factor,
                           epochs=self.epochs, triplets_per_epoch=self.triplets_per_epoch,
                           batch_size=self.batch_size, lr=self.lr, seed=self.seed,
                           eps_ball=self.eps_ball, init_radius=self.init_radius,
                           restarts=self.restarts, optimizer=self.optimizer,
                           threads=self.threads)

    def similarity(self) -> SimilarityConfig:
        return SimilarityConfig(sigma=self.sigma, sample_size=self.sim_sample_size, seed=self.seed)

    def forest(self) -> ForestConfig:
        mf: Any = self.max_features
        try:
            mf = float(mf) if "." in mf else int(mf)
        except ValueError:
            pass
        return ForestConfig(trees=self.trees, max_depth=self.max_depth,
                            min_samples_leaf=self.min_samples_leaf, max_features=mf,
                            seed=self.seed, threads=self.threads)

    def reducer(self, method: str) -> ReducerSpec:
        return ReducerSpec(method, self.dim, self.se_neighbors)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def render(self) -> str:
        return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in self.as_dict().items())

    def digest(self, keys=None) -> str:
        items = self.as_dict()
        keys = sorted(items if keys is None else keys)
        text = "\n".join(f"{k}={items[k]!r}" for k in keys if k not in self.NON_SEMANTIC)
        return hashlib.sha256(text.encode()).hexdigest()


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def _coerce(name: str, raw: Any):
    f = _FIELDS[name]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    typ = str(f.type)
    optional = "None" in typ
    if optional and text.lower() in _NONE:
        return None
    try:
        if typ.startswith("int"):
            return int(text)
        if typ.startswith("float"):
            return float(text)
    except ValueError:
        raise InvalidConfig(f"{name}: cannot parse {text!r} as {typ}") from None
    return text


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise InvalidConfig(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise InvalidConfig(f"unknown key {key!r}")
        values[key] = _coerce(key, value)
    try:
        return dataclasses.replace(PipelineConfig(), **values)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from None
