"""Static figures written next to the CSV outputs (non-interactive Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 4.0)
DPI = 120


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_scree(spectrum, path, kappa=None):
    """Eigenvalues against component index; selected components drawn filled."""
    lam = np.asarray(spectrum)
    idx = np.arange(1, lam.size + 1)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(idx, lam, "-", color="0.5")
    ax.plot(idx, lam, "o", mfc="white", color="C0")
    if kappa:
        ax.plot(idx[:kappa], lam[:kappa], "o", color="C0", label=f"selected (kappa={kappa})")
        ax.legend(frameon=False)
    ax.set_xlabel("component")
    ax.set_ylabel("generalised kurtosis")
    ax.set_xticks(idx)
    return _save(fig, path)


def plot_distances(distances, cutoff, path, labels=None):
    d = np.asarray(distances)
    idx = np.arange(1, d.size + 1)
    out = d > cutoff if np.isfinite(cutoff) else np.zeros(d.size, dtype=bool)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(idx[~out], d[~out], ".", color="0.4")
    ax.plot(idx[out], d[out], "o", color="C3")
    if np.isfinite(cutoff):
        ax.axhline(cutoff, ls="--", color="C3", lw=1)
    if labels is not None:
        for i in np.flatnonzero(out):
            ax.annotate(str(labels[i]), (idx[i], d[i]), fontsize=7, xytext=(3, 3),
                        textcoords="offset points")
    ax.set_xlabel("observation")
    ax.set_ylabel("squared ICS distance")
    return _save(fig, path)


def plot_scores(scores, path, flags=None):
    """Scatter of the first two invariant coordinates."""
    z = np.asarray(scores)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if z.shape[1] < 2:
        ax.plot(np.arange(1, z.shape[0] + 1), z[:, 0], ".", color="0.4")
        ax.set_xlabel("observation")
        ax.set_ylabel("IC 1")
        return _save(fig, path)
    f = np.zeros(z.shape[0], dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
    ax.plot(z[~f, 0], z[~f, 1], ".", color="0.4")
    ax.plot(z[f, 0], z[f, 1], "o", color="C3")
    ax.set_xlabel("IC 1")
    ax.set_ylabel("IC 2")
    return _save(fig, path)


def plot_eigendensities(points, values, path, n_show=None):
    """Dual eigendensities (one curve per row of ``values``) against the uniform level."""
    v = np.atleast_2d(values)
    n_show = v.shape[0] if n_show is None else min(n_show, v.shape[0])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for j in range(n_show):
        ax.plot(points, v[j], lw=1.2, label=f"h*{j + 1}")
    ax.axhline(1.0 / (points[-1] - points[0]), color="0.7", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("density")
    ax.legend(frameon=False, fontsize=7, ncol=2)
    return _save(fig, path)


def plot_roc(results, path):
    """Mean ROC curves with pointwise TPR bands, one per scheme."""
    fig, ax = plt.subplots(figsize=(4.8, 4.5))
    for i, (name, s) in enumerate(results.items()):
        c = f"C{i}"
        ax.plot(s.fpr_mean, s.tpr_mean, color=c, label=f"{name} (AUC {s.auc_mean:.2f})")
        lo = np.clip(s.tpr_mean - s.tpr_halfwidth, 0, 1)
        hi = np.clip(s.tpr_mean + s.tpr_halfwidth, 0, 1)
        ax.fill_between(s.fpr_mean, lo, hi, color=c, alpha=0.2, lw=0)
    ax.plot([0, 1], [0, 1], ":", color="0.6")
    ax.set_xlabel("FPR")
    ax.set_ylabel("TPR")
    ax.legend(frameon=False, loc="lower right", fontsize=8)
    return _save(fig, path)


def plot_frequency(unit_ids, frequency, path, top=30):
    f = np.asarray(frequency, dtype=float)
    order = np.argsort(-np.nan_to_num(f, nan=-1.0), kind="stable")[:top]
    fig, ax = plt.subplots(figsize=(6.0, max(2.5, 0.18 * order.size + 1)))
    ax.barh(np.arange(order.size), f[order], color="C0")
    ax.set_yticks(np.arange(order.size))
    ax.set_yticklabels([str(unit_ids[i]) for i in order], fontsize=7)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("detection frequency")
    return _save(fig, path)
