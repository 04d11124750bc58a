"""Report figures written next to the CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import SECTION_KEYS  # noqa: E402

# no timestamps or version strings so reruns give identical files
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def loss_curves(histories: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, history in histories.items():
        losses = np.asarray(history.losses)
        if losses.size == 0:
            continue
        window = min(5, losses.size)
        smooth = np.convolve(losses, np.ones(window) / window, mode="valid")
        ax.plot(np.arange(smooth.size) + window - 1, smooth, label=name, lw=1.2)
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("minibatch MSE (5-step mean)")
    ax.legend(fontsize=7, ncol=3)
    _save(fig, path)


def score_histograms(X: np.ndarray, y: np.ndarray, path) -> None:
    fig, axes = plt.subplots(1, len(SECTION_KEYS), figsize=(12, 2.6), sharey=False)
    bins = np.linspace(0, 1, 21)
    for j, (ax, key) in enumerate(zip(axes, SECTION_KEYS)):
        col = X[:, j]
        present = col >= 0
        for label, color, name in ((0, "tab:blue", "benign"), (1, "tab:red", "malware")):
            sel = present & (y == label)
            ax.hist(col[sel], bins=bins, alpha=0.55, color=color, label=name)
        ax.set_title(f".{key}  (missing {np.mean(~present):.0%})", fontsize=8)
        ax.set_xlabel("QCNN score", fontsize=8)
    axes[0].legend(fontsize=7)
    _save(fig, path)


def accuracy_bars(report: dict, path) -> None:
    names, acc, f1 = [], [], []
    for kind, res in report["scorers"].items():
        names.append(kind)
        acc.append(res["test"]["accuracy"])
        f1.append(res["test"]["f1"])
    names.append("full-image")
    acc.append(report["baseline"]["test"]["accuracy"])
    f1.append(report["baseline"]["test"]["f1"])
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.bar(x - 0.18, acc, 0.36, label="accuracy")
    ax.bar(x + 0.18, f1, 0.36, label="F1")
    ax.set_xticks(x, names)
    ax.set_ylim(0, 1)
    ax.set_ylabel("test split")
    ax.legend(fontsize=8)
    _save(fig, path)


def confusion_plot(cm: dict, title: str, path) -> None:
    grid = np.array([[cm["tn"], cm["fp"]], [cm["fn"], cm["tp"]]])
    fig, ax = plt.subplots(figsize=(3, 3))
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center")
    ax.set_xticks([0, 1], ["benign", "malware"])
    ax.set_yticks([0, 1], ["benign", "malware"])
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(title, fontsize=9)
    _save(fig, path)


def render_all(art, histories, base_history, vectors, report) -> None:
    art.figures.mkdir(parents=True, exist_ok=True)
    loss_curves({**histories, "full": base_history}, art.figures / "loss_curves.png")
    score_histograms(*vectors["test"], art.figures / "test_scores.png")
    accuracy_bars(report, art.figures / "test_accuracy.png")
    for kind, res in report["scorers"].items():
        confusion_plot(res["test"]["confusion"], f"{kind} (test)",
                       art.figures / f"confusion_{kind}.png")
