"""Report figures written next to the JSON/CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_KWARGS = dict(dpi=150, bbox_inches="tight")


def plot_confusion(confusion, classes, path, title=None):
    """Heat map of a row-normalised confusion matrix (percent)."""
    confusion = np.asarray(confusion)
    n = len(classes)
    size = max(4.0, 0.45 * n + 2.0)
    fig, ax = plt.subplots(figsize=(size, size))
    im = ax.imshow(confusion, cmap="Blues", vmin=0, vmax=100)
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(classes, rotation=60, ha="right", fontsize=8)
    ax.set_yticklabels(classes, fontsize=8)
    ax.set_xlabel("predicted class")
    ax.set_ylabel("true class")
    if n <= 20:
        for i in range(n):
            for j in range(n):
                v = confusion[i, j]
                if v > 0:
                    ax.text(j, i, f"{v:.1f}", ha="center", va="center", fontsize=6,
                            color="white" if v > 60 else "black")
    mean_diag = float(np.mean(np.diag(confusion)))
    ax.set_title(title or f"confusion matrix (%), mean diagonal {mean_diag:.2f}")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.savefig(path, **FIG_KWARGS)
    plt.close(fig)


def plot_accuracies(accuracies, path, label="accuracy"):
    accuracies = np.asarray(accuracies)
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(np.arange(len(accuracies)), accuracies, "o-", label=label)
    ax.axhline(accuracies.mean(), color="black", linewidth=0.8, linestyle="--",
               label=f"mean {accuracies.mean():.2f} ± {accuracies.std():.2f}")
    ax.set_xlabel("repetition")
    ax.set_ylabel("recognition rate (%)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.savefig(path, **FIG_KWARGS)
    plt.close(fig)


def plot_timings(rows, path, reference=None):
    """Bar chart of seconds per image; ``rows`` maps descriptor -> seconds.

    ``reference`` optionally maps descriptor -> published seconds, drawn as
    hatched bars on a second axis since the hardware differs.
    """
    names = list(rows)
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(x - 0.2 if reference else x, [rows[k] for k in names], width=0.4,
           label="measured")
    ax.set_ylabel("seconds per image (measured)")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    if reference:
        ax2 = ax.twinx()
        ax2.bar(x + 0.2, [reference.get(k, np.nan) for k in names], width=0.4,
                color="lightgray", hatch="//", edgecolor="gray", label="published")
        ax2.set_ylabel("seconds per image (published)")
        handles = ax.get_legend_handles_labels()[0] + ax2.get_legend_handles_labels()[0]
        ax.legend(handles, ["measured", "published"], loc="upper left", fontsize=8)
    fig.savefig(path, **FIG_KWARGS)
    plt.close(fig)
