"""Report figures. Rendered off-screen; PNG files carry no version or time metadata."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}
_SET_COLOURS = {"U": "#9e9e9e", "U+F": "#4c72b0", "HypHC": "#c44e52", "SE": "#55a868", "FA": "#8172b2"}


def _save(fig, path):
    fig.savefig(path, format="png", dpi=100, metadata=_META)
    plt.close(fig)


def plot_curves(curves, path):
    """RT score of the k-th influencer and the growth of the engaged-user set."""
    ranks = np.arange(1, len(curves.rt_score) + 1)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    series = ((curves.rt_score, "rt_score"), (curves.cumulative, "users engaged (cumulative)"),
              (curves.marginal, "new users added"))
    for ax, (values, title) in zip(axes, series):
        ax.plot(ranks, values, lw=1.2)
        ax.set_xlabel("influencer rank")
        ax.set_title(title, fontsize=10)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_training(losses, taus, path):
    epochs = np.arange(1, len(losses) + 1)
    fig, ax = plt.subplots(figsize=(6, 3.4))
    ax.plot(epochs, losses, color="#c44e52", lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean triplet loss")
    tw = ax.twinx()
    tw.step(epochs, taus, where="post", color="#777777", lw=0.8, ls="--")
    tw.set_ylabel("temperature")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_results(scores, separations, feature_sets, path):
    """Grouped bars: F1 per separation, one bar per feature set."""
    x = np.arange(len(separations))
    width = 0.8 / len(feature_sets)
    fig, ax = plt.subplots(figsize=(12, 4.2))
    for k, fs in enumerate(feature_sets):
        vals = [100.0 * scores[(fs, s)] for s in separations]
        ax.bar(x + (k - (len(feature_sets) - 1) / 2) * width, vals, width, label=fs,
               color=_SET_COLOURS.get(fs))
    ax.set_xticks(x)
    ax.set_xticklabels([s.replace(" vs ", "\nvs ") for s in separations], fontsize=8)
    ax.set_ylabel("F1 (x100)")
    ax.set_ylim(0, 100)
    ax.legend(ncol=len(feature_sets), fontsize=8, loc="lower right")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_centroids(reports, pairs, path):
    names = list(reports)
    x = np.arange(len(pairs))
    width = 0.8 / len(names)
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for k, name in enumerate(names):
        vals = [reports[name].distances[p] for p in pairs]
        ax.bar(x + (k - (len(names) - 1) / 2) * width, vals, width, label=name,
               color=_SET_COLOURS.get(name))
    ax.set_xticks(x)
    ax.set_xticklabels([f"{a} vs {b}" for a, b in pairs], fontsize=9)
    ax.set_ylabel("cosine distance of class centres")
    ax.set_ylim(0, 2)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
