"""SVG figures for the command-line reports.

Figures are written with a fixed hash salt and no date stamp, so reruns
produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ppcfit.neurodynamics import lognormal_pdf  # noqa: E402

STYLE = {
    "svg.hashsalt": "ppcfit",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _figure(figsize=(5.0, 3.5)):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize)
    return fig, ax


def save_svg(fig, path):
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_feedback(dist, path, title=None, scale=None):
    from ppcfit.core import DEFAULT_SCALE

    centers = dist.binning.centers(scale or DEFAULT_SCALE)
    fig, ax = _figure()
    ax.bar(centers, dist.probs, width=0.8 * (centers[1] - centers[0]) if len(centers) > 1 else 0.8,
           color="tab:blue")
    ax.set_xticks(centers)
    ax.set_xlabel("rating")
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1)
    if title:
        ax.set_title(title)
    save_svg(fig, path)


def plot_rate_histogram(stats, path, bins=35):
    rates = stats.rates
    fig, ax = _figure()
    top = max(70.0, float(rates.max()))
    ax.hist(rates, bins=bins, range=(0, top), density=True, color="0.7", edgecolor="0.4")
    x = np.linspace(0.01, top, 400)
    ax.plot(x, lognormal_pdf(x, stats.mu_log, stats.sigma_log), color="tab:red", label="log-normal fit")
    ax.axvline(stats.mean_rate, color="tab:red", ls="--", lw=1, label=f"mean {stats.mean_rate:.1f} Hz")
    ax.set_xlabel("spiking rate [Hz]")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    save_svg(fig, path)


def plot_eeg_histogram(freqs, path, bins=20):
    freqs = np.asarray(freqs, dtype=float)
    freqs = freqs[np.isfinite(freqs)]
    fig, ax = _figure()
    ax.hist(freqs, bins=bins, range=(0, 100), color="0.7", edgecolor="0.4")
    ax.axvspan(30, 100, color="tab:orange", alpha=0.1, label="gamma band")
    ax.set_xlabel("EEG frequency [Hz]")
    ax.set_ylabel("count")
    ax.legend(frameon=False)
    save_svg(fig, path)


def plot_events(binned, fit, path):
    t = binned.centers
    fig, ax = _figure((6.0, 3.0))
    ax.step(t, binned.counts, where="mid", color="0.3", lw=0.8, label="total counts")
    if fit.defined:
        fine = np.linspace(0, binned.duration, 2000)
        ax.plot(fine, fit(fine), color="tab:red", lw=1, label=f"sine fit {fit.frequency:.1f} Hz")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("spikes per bin")
    ax.legend(frameon=False, loc="upper right")
    save_svg(fig, path)


def plot_correlation(matrix, labels, path):
    fig, ax = _figure((4.5, 4.0))
    shown = np.ma.masked_invalid(matrix)
    im = ax.imshow(shown, cmap="RdBu_r", vmin=-1, vmax=1)
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    for i in range(len(labels)):
        for j in range(len(labels)):
            v = matrix[i, j]
            ax.text(j, i, "n/a" if not np.isfinite(v) else f"{v:.2f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax, shrink=0.8)
    save_svg(fig, path)


def plot_best_scores(scores: dict, path):
    labels = list(scores)
    fig, ax = _figure()
    ax.boxplot([np.asarray(scores[k]) for k in labels])
    ax.set_xticks(range(1, len(labels) + 1), [k.upper() for k in labels])
    ax.set_ylabel("best-fit JSD")
    save_svg(fig, path)
