"""Matplotlib figures written next to the CLI's JSON output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 8,
    "axes.titlesize": 8,
    "axes.labelsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "legend.fontsize": 7,
    "savefig.dpi": 150,
    "figure.facecolor": "white",
}


def _show(ax, img, title=None, cmap=None, vmin=None, vmax=None):
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
        cmap = cmap or "gray"
    ax.imshow(img, cmap=cmap, vmin=vmin, vmax=vmax, interpolation="nearest")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)


def demo_grid(source, destination, variants, path) -> None:
    """Two-row grid: inputs, then each variant's image above its label.

    ``variants`` maps a title to ``(image, label_values)``.
    """
    n = len(variants) + 1
    with plt.rc_context(RC):
        fig, axes = plt.subplots(2, n, figsize=(1.8 * n, 3.8))
        _show(axes[0, 0], destination, "destination")
        _show(axes[1, 0], source, "source")
        for col, (title, (image, label)) in enumerate(variants.items(), start=1):
            _show(axes[0, col], image, title)
            _show(axes[1, col], label, "label", cmap="magma", vmin=0.0, vmax=max(1.0, float(np.max(label))))
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)


def score_curves(report, path) -> None:
    """ROC curve and PRO curve (with the integration limit marked)."""
    roc = np.asarray(report.roc_points)
    pro = np.asarray(report.pro_points)
    with plt.rc_context(RC):
        fig, (a, b) = plt.subplots(1, 2, figsize=(6.4, 3.0))
        a.plot(roc[:, 0], roc[:, 1], color="k", lw=1.2)
        a.plot([0, 1], [0, 1], color="0.7", lw=0.8, ls="--")
        a.set_xlabel("false positive rate")
        a.set_ylabel("true positive rate")
        a.set_title(f"pixel ROC (AUROC {report.pixel_auroc:.3f})")
        a.set_xlim(0, 1)
        a.set_ylim(0, 1.01)
        b.plot(pro[:, 0], pro[:, 1], color="k", lw=1.2)
        b.axvline(report.fpr_limit, color="tab:red", lw=0.8, ls=":")
        b.set_xlabel("false positive rate")
        b.set_ylabel("per-region overlap")
        b.set_title(f"PRO (AU-PRO@{report.fpr_limit:g} {report.au_pro:.3f})")
        b.set_xlim(0, 1)
        b.set_ylim(0, 1.01)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
