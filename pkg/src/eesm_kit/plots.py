"""Figure rendering for the report path.

Every figure is rendered from the same data that is written to the
delimited output files, so the PNGs are a convenience view, never the
authoritative artifact.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_histogram(samples, path, title="", xlabel="effective SINR (dB)",
                     bins=50, overlay=None):
    """Density histogram of effective-SINR samples (dB axis).

    `overlay` may be an (x, y) curve, e.g. a fitted log-SGN density.
    """
    samples = np.asarray(samples, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.hist(samples, bins=bins, density=True, alpha=0.65, label="samples")
    if overlay is not None:
        ax.plot(overlay[0], overlay[1], "r-", lw=1.5, label="log-SGN fit")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_per_curve(curves, path, title="PER vs SNR"):
    """Semilog PER curves; `curves` maps label -> (snr_db, per) arrays."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for label, (snr_db, per) in curves.items():
        per = np.maximum(np.asarray(per, dtype=float), 1e-6)
        ax.semilogy(snr_db, per, "o-", label=label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("PER")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
