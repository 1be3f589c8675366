"""PNG quicklooks: quiver overlays, signed heatmaps, manifold tiles."""

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

# no Software/date chunks, so identical figures hash identically
_PNG_META = {"metadata": {"Software": None}}


def _finish(fig, path):
    fig.savefig(path, dpi=100, **_PNG_META)
    plt.close(fig)


def quiver_png(field, path, step=2, title=""):
    """Quiver overlay of a FlowField on its magnitude heatmap."""
    mag = np.hypot(field.u, field.v)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(np.where(field.valid, mag, np.nan), cmap="viridis")
    rr, cc = np.mgrid[0:field.u.shape[0]:step, 0:field.u.shape[1]:step]
    # quiver wants x=col, y=row; v is the column component
    ax.quiver(cc, rr, field.v[::step, ::step], field.u[::step, ::step],
              angles="xy", scale_units="xy", color="white", width=0.003)
    ax.set_title(title)
    ax.set_axis_off()
    _finish(fig, path)


def heatmap_png(arr, path, title="", signed=True):
    """Signed-colormap heatmap for potentials and source/sink maps."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if signed:
        lim = np.nanmax(np.abs(arr)) or 1.0
        im = ax.imshow(arr, cmap="RdBu_r", vmin=-lim, vmax=lim)
    else:
        im = ax.imshow(arr, cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title)
    ax.set_axis_off()
    _finish(fig, path)


def trace_panel_png(traces, path, labels=None, title=""):
    """Overlaid 1-D traces (e.g. prototype trace vs reconstruction)."""
    fig, ax = plt.subplots(figsize=(6, 3))
    for i, tr in enumerate(traces):
        label = labels[i] if labels else None
        ax.plot(tr, label=label)
    if labels:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    _finish(fig, path)


def manifold_png(grid_outputs, grid_n, path, title=""):
    """Tile decoded traces over the latent grid."""
    fig, axes = plt.subplots(grid_n, grid_n, figsize=(2 * grid_n, 1.2 * grid_n))
    axes = np.atleast_2d(axes)
    for i in range(grid_n):
        for j in range(grid_n):
            ax = axes[grid_n - 1 - j, i]  # z2 upward, z1 rightward
            ax.plot(grid_outputs[i * grid_n + j], lw=0.8)
            ax.set_xticks([])
            ax.set_yticks([])
    fig.suptitle(title)
    _finish(fig, path)


def scatter_png(points, conditions, path, title=""):
    """Latent scatter coloured by condition."""
    fig, ax = plt.subplots(figsize=(5, 5))
    uniq = sorted(set(conditions))
    for cond in uniq:
        sel = np.array([c == cond for c in conditions])
        ax.scatter(points[sel, 0], points[sel, 1], s=12, label=str(cond))
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    _finish(fig, path)
