"""SVG figures for the command-line reports.

Matplotlib runs on the Agg backend with a fixed hash salt and no embedded
date metadata, so the emitted SVG bytes are reproducible.
"""

from __future__ import annotations

import numpy as np

__all__ = ["selection_figure", "coverage_figure"]


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=False)
    matplotlib.rcParams["svg.hashsalt"] = "twogroups"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    _plt().close(fig)


def selection_figure(model, panel, report, path) -> None:
    """Histogram of z with the fitted f, p0 f0, and the fdr curve."""
    from .posterior import local_fdr

    plt = _plt()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    z = panel.z
    ax.hist(z, bins=60, density=True, color="0.85", edgecolor="0.6", label="observed z")
    grid = np.linspace(z.min() - 0.5, z.max() + 0.5, 400)
    ax.plot(grid, model.marginal_density(grid), color="C0", label="fitted f(z)")
    ax.plot(grid, model.p0 * model.null_density(grid), color="C2", ls="--", label="p0 f0(z)")
    ax.axvline(report.threshold_z, color="C3", lw=1, ls=":",
               label=f"threshold z = {report.threshold_z:g}")
    ax2 = ax.twinx()
    ax2.plot(grid, local_fdr(model, grid), color="C1", lw=1.2, label="fdr(z)")
    ax2.set_ylabel("fdr(z)")
    ax2.set_ylim(0, 1.05)
    ax.set_xlabel("z")
    ax.set_ylabel("density")
    handles, labels = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(handles + h2, labels + l2, loc="upper left", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def coverage_figure(results, profile, path) -> None:
    """Coverage-by-method bars next to the width-versus-distance profile."""
    plt = _plt()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    names = [r.method for r in results]
    cov = [r.empirical_coverage for r in results]
    err = [3 * r.mc_stderr for r in results]
    ax1.bar(names, cov, yerr=err, color=["C0", "C1", "C2"][: len(names)], capsize=3)
    ax1.axhline(results[0].nominal, color="k", lw=1, ls="--")
    ax1.set_ylim(min(0.5, min(cov) - 0.05), 1.0)
    ax1.set_ylabel("empirical coverage")
    ax1.tick_params(axis="x", labelrotation=20)
    if profile is not None:
        ax2.plot(profile.distance, profile.width, "o-", ms=3, color="C2")
        ax2.set_xlabel("|z - fitted centre|")
        ax2.set_ylabel("interval width")
        ax2.set_title(f"bowing ratio {profile.ratio:.4g}", fontsize=9)
    fig.tight_layout()
    _save(fig, path)
