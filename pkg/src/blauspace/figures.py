"""Report figures rendered next to the delimited outputs.

Everything draws through the Agg backend straight to a file; no display
is ever needed.  Figures are diagnostics, not deliverables, so the
delimited files stay the source of truth.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_network",
    "plot_estimates",
    "plot_trace",
    "plot_separation_heatmap",
    "plot_isolation",
    "plot_strain",
    "plot_embedding",
    "plot_surface",
    "plot_profile",
    "plot_coverage",
    "plot_regions",
]

_DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_network(positions, edges, path) -> None:
    positions = np.asarray(positions, dtype=float)
    edges = np.asarray(edges)
    fig, ax = plt.subplots(figsize=(6, 6))
    if edges.size:
        segs = positions[edges]
        for (x0, y0), (x1, y1) in segs:
            ax.plot([x0, x1], [y0, y1], color="steelblue", lw=0.5, alpha=0.5, zorder=1)
    ax.scatter(positions[:, 0], positions[:, 1], s=4, color="0.2", zorder=2)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(f"{positions.shape[0]} individuals, {edges.shape[0]} ties")
    ax.set_aspect("equal")
    _save(fig, path)


def plot_estimates(names, estimates, sd, path) -> None:
    y = np.arange(len(names))[::-1]
    fig, ax = plt.subplots(figsize=(6, 1.0 + 0.5 * len(names)))
    if sd is not None:
        ax.errorbar(
            estimates, y, xerr=1.96 * np.asarray(sd), fmt="o", color="0.2", capsize=3
        )
    else:
        ax.plot(estimates, y, "o", color="0.2")
    ax.axvline(0.0, color="0.6", lw=0.8, ls="--")
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.set_xlabel("coefficient")
    ax.set_title("posterior mode (95% Laplace bars)" if sd is not None else "posterior mode")
    _save(fig, path)


def plot_trace(chain, names, path) -> None:
    chain = np.asarray(chain, dtype=float)
    p = chain.shape[1]
    fig, axes = plt.subplots(p, 1, figsize=(7, 1.6 * p), sharex=True, squeeze=False)
    for k in range(p):
        ax = axes[k, 0]
        ax.plot(chain[:, k], lw=0.4, color="steelblue")
        ax.set_ylabel(names[k])
    axes[-1, 0].set_xlabel("draw")
    axes[0, 0].set_title("posterior chain")
    _save(fig, path)


def plot_separation_heatmap(values, path) -> None:
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(values, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="separation")
    ax.set_xlabel("alter")
    ax.set_ylabel("ego")
    _save(fig, path)


def plot_isolation(values, path) -> None:
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=min(50, max(10, values.size // 20)), color="steelblue")
    ax.set_xlabel("isolation")
    ax.set_ylabel("count")
    ax.set_title(f"median {np.median(values):.3g}")
    _save(fig, path)


def plot_strain(report, path) -> None:
    names = list(report.feature_names) + ["TOTAL"]
    vals = np.append(report.contributions, report.total)
    y = np.arange(len(names))[::-1]
    fig, ax = plt.subplots(figsize=(6, 1.0 + 0.5 * len(names)))
    colors = ["steelblue"] * (len(names) - 1) + ["0.2"]
    ax.barh(y, vals, color=colors)
    if report.lower is not None:
        lo = np.append(report.lower, report.total_interval[0])
        hi = np.append(report.upper, report.total_interval[1])
        ax.errorbar(
            vals, y, xerr=np.vstack((vals - lo, hi - vals)),
            fmt="none", ecolor="0.3", capsize=3,
        )
    ax.axvline(0.0, color="0.6", lw=0.8)
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.set_xlabel("strain contribution")
    _save(fig, path)


def plot_embedding(coords, path, color=None, color_label="") -> None:
    coords = np.asarray(coords, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 5))
    if color is not None:
        sc = ax.scatter(coords[:, 0], coords[:, 1], c=np.asarray(color, float), s=10, cmap="viridis")
        fig.colorbar(sc, ax=ax, label=color_label)
    else:
        ax.scatter(coords[:, 0], coords[:, 1], s=10, color="0.2")
    ax.set_xlabel("dimension 1")
    ax.set_ylabel("dimension 2")
    ax.set_aspect("equal")
    _save(fig, path)


def plot_surface(gx, gy, grid, coords, path, label="value") -> None:
    grid = np.asarray(grid, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(gx, gy, grid, cmap="viridis", shading="auto")
    fig.colorbar(mesh, ax=ax, label=label)
    coords = np.asarray(coords, dtype=float)
    ax.scatter(coords[:, 0], coords[:, 1], s=4, color="white", alpha=0.6, lw=0)
    ax.set_xlabel("dimension 1")
    ax.set_ylabel("dimension 2")
    _save(fig, path)


def plot_profile(x, mean, sd, path, xlabel="dimension 1", ylabel="value") -> None:
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ok = np.isfinite(mean)
    ax.plot(x[ok], mean[ok], color="0.2")
    if sd is not None:
        sd = np.asarray(sd, dtype=float)
        ax.fill_between(
            x[ok], mean[ok] - sd[ok], mean[ok] + sd[ok], color="steelblue", alpha=0.3
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    _save(fig, path)


def plot_coverage(report, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
    ax.errorbar(
        report.alphas,
        report.coverage,
        yerr=3.0 * report.se,
        fmt="o-",
        color="steelblue",
        capsize=3,
    )
    ax.set_xlabel("nominal level")
    ax.set_ylabel("empirical coverage")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_title(
        f"{report.n_effective} replications"
        + (f", {report.failures} failed" if report.failures else "")
    )
    _save(fig, path)


def plot_regions(regions, path, locations=None) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    for region in regions:
        for ring in region.rings:
            closed = np.vstack((ring, ring[:1]))
            ax.plot(closed[:, 0], closed[:, 1], color="0.2", lw=1.0)
        centroid = region.rings[0].mean(axis=0)
        ax.annotate(region.region_id, centroid, fontsize=8, ha="center", color="0.35")
    if locations is not None:
        locations = np.asarray(locations, dtype=float)
        ax.scatter(locations[:, 0], locations[:, 1], s=3, color="steelblue", alpha=0.5)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, path)
