"""Figures for run and sweep reports, rendered off-screen to PNG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    # A fixed metadata block keeps repeated renders byte-identical.
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def outcome_histogram(histogram: dict, title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = list(histogram)
    ax.bar(range(len(keys)), [histogram[k] for k in keys], color="0.35")
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(keys, rotation=30, ha="right")
    ax.set_ylabel("count")
    ax.set_title(title)
    _save(fig, path)


def trial_series(values: list, ylabel: str, title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(values)), values, ".", color="k", ms=3)
    ax.set_xlabel("trial")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)


def sweep_curve(xs: list, ys: list, xlabel: str, ylabel: str, title: str, path, reference=None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, "o-", color="k", label="simulated")
    if reference is not None:
        ax.plot(xs, reference, "--", color="0.5", label="reference")
        ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)
