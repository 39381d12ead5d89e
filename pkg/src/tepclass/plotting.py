"""Optional summary figure for a montage x classifier grid."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SHOWN = ("accuracy", "sensitivity", "specificity", "f1")


def plot_grid(rows, path) -> None:
    """Grouped bars of averaged metrics, one panel per classifier.

    ``rows`` holds ``(montage, classifier, report)`` triples. The PNG is
    written without software/date metadata so equal inputs give equal bytes.
    """
    classifiers = list(dict.fromkeys(c for _, c, _ in rows))
    montages = list(dict.fromkeys(m for m, _, _ in rows))
    lookup = {(m, c): r for m, c, r in rows}
    fig, axes = plt.subplots(1, len(classifiers), figsize=(4 * len(classifiers), 3.5), sharey=True, squeeze=False)
    width = 0.8 / len(_SHOWN)
    x = np.arange(len(montages))
    for ax, clf in zip(axes[0], classifiers):
        for j, key in enumerate(_SHOWN):
            vals = [lookup[(m, clf)].averaged[key] if (m, clf) in lookup else np.nan for m in montages]
            ax.bar(x + (j - (len(_SHOWN) - 1) / 2) * width, vals, width, label=key)
        ax.set_xticks(x, montages)
        ax.set_title(clf.upper())
        ax.set_ylim(0, 1)
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].set_ylabel("averaged LOSO metric")
    axes[0][-1].legend(fontsize="small", loc="lower right")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=100, metadata={"Software": None})
    plt.close(fig)
