"""Figure rendering for report runs.

Pure presentation: every figure is derived from the same objects the CSV
and JSON artifacts serialize, so the files stay consistent with each
other.  The Agg backend is forced because report runs are headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_all"]

_DPI = 120


def _save(fig, out_dir: str, name: str, paths: dict[str, str]) -> None:
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    paths[name] = path


def _regression_figure(cal, out_dir: str, paths: dict[str, str]) -> None:
    reg = cal.regression
    y = reg.response - reg.offset
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))

    grid = np.linspace(0.0, float(reg.slope.max()) * 1.05, 50)
    left.plot(grid, reg.ratio * grid, color="tab:red", label="weighted fit")
    left.scatter(reg.slope, y, color="tab:blue")
    for k, (bx, by) in enumerate(zip(reg.slope, y), start=1):
        left.annotate(f"j={k}", (bx, by), textcoords="offset points", xytext=(4, 4))
    left.set_xlabel("slope coefficient")
    left.set_ylabel("excess new-claims variance")
    left.set_title(f"through-origin fit, ratio={reg.ratio:.4f}")
    left.legend()

    j = np.arange(1, len(reg.response) + 1)
    right.plot(j, np.sqrt(np.maximum(reg.response, 0.0)), "o-", label="sample")
    right.plot(j, np.sqrt(np.maximum(reg.fitted, 0.0)), "s--", label="fitted")
    right.set_xlabel("development year")
    right.set_ylabel("new-claims volatility")
    right.set_title("sample vs fitted volatilities")
    right.legend()

    fig.tight_layout()
    _save(fig, out_dir, "fit_regression.png", paths)


def _distribution_figure(name, dist, matched, out_dir, paths) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(dist.reserves, bins="fd", density=True, color="tab:blue", alpha=0.6)
    ax.axvline(dist.point_estimate, color="black", linestyle=":", label="point estimate")
    if matched is not None:
        lo, hi = ax.get_xlim()
        grid = np.linspace(max(lo, 1e-9), hi, 400)
        ax.plot(grid, matched.pdf(grid), color="tab:red", label=f"{matched.family} fit")
    ax.set_xlabel("reserve")
    ax.set_ylabel("density")
    ax.set_title(f"{name} bootstrap, sqrt(MSEP)/R = {dist.msep_root_pct:.2f}%")
    ax.legend()
    fig.tight_layout()
    _save(fig, out_dir, f"distribution_{name}.png", paths)


def _matched_figure(matched, out_dir, paths) -> None:
    lo = float(matched.quantile(1e-4))
    hi = float(matched.quantile(1 - 1e-4))
    grid = np.linspace(lo, hi, 400)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(grid, matched.pdf(grid), color="tab:red")
    ax.axvline(matched.point_estimate, color="black", linestyle=":", label="point estimate")
    ax.axvline(float(matched.quantile(0.995)), color="tab:orange", linestyle="--", label="99.5%")
    ax.set_xlabel("reserve")
    ax.set_ylabel("density")
    title = matched.family
    if matched.family == "lognormal":
        title += f" ({matched.lognormal_param})"
    ax.set_title(f"moment-matched {title}")
    ax.legend()
    fig.tight_layout()
    _save(fig, out_dir, "distribution_matched.png", paths)


def _sensitivity_figure(rows, out_dir, paths) -> None:
    ez = [r["ez"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ez, [r["msep_root_pct"] for r in rows], "o-", label="sqrt(MSEP)/R %")
    ax.plot(ez, [r["q995_excess_pct"] for r in rows], "s--", label="99.5% excess %")
    ax.set_xlabel("jump mean")
    ax.set_ylabel("percent of point estimate")
    ax.set_title("jump-mean sensitivity")
    ax.legend()
    fig.tight_layout()
    _save(fig, out_dir, "sensitivity.png", paths)


def render_all(out_dir, calibration, distributions, matched, sweep_rows) -> dict[str, str]:
    """Render every figure the run's artifacts support; returns name -> path."""
    paths: dict[str, str] = {}
    _regression_figure(calibration, out_dir, paths)
    for name, dist in distributions.items():
        _distribution_figure(name, dist, matched, out_dir, paths)
    if matched is not None:
        _matched_figure(matched, out_dir, paths)
    if sweep_rows:
        _sensitivity_figure(sweep_rows, out_dir, paths)
    return paths
