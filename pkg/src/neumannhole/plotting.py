"""Static SVG charts for sweep results."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no timestamp so repeated runs write identical files
matplotlib.rcParams["svg.hashsalt"] = "neumannhole"
_META = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_dbar(result, path) -> Path:
    """log dbar against log eps, with the mesh floor as a horizontal line."""
    eps = np.array(result.epsilons)
    d = np.array(result.series("dbar"))
    keep = (eps > 0) & (d > 0)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps[keep], d[keep], "o-", label="dbar")
    if result.floor is not None and result.floor.dbar > 0:
        ax.axhline(3 * result.floor.dbar, color="grey", ls="--", label="3x mesh floor")
    fit = result.fits.get("dbar")
    if fit is not None:
        ax.loglog(eps[keep], fit.C * eps[keep] ** fit.p, ":", label=f"fit p={fit.p:.2f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("dbar")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_delta(result, path) -> Path:
    """log delta estimates (5', 6, 7) against log eps."""
    eps = np.array(result.epsilons)
    fig, ax = plt.subplots(figsize=(5, 4))
    for key in ("5'", "6", "7"):
        v = np.array(result.series(key), dtype=float)
        keep = (eps > 0) & (v > 0)
        if not keep.any():
            continue
        fit = result.fits.get(key)
        label = f"delta{key}" + (f" (p={fit.p:.2f})" if fit is not None else "")
        ax.loglog(eps[keep], v[keep], "o-", label=label)
    ax.set_xlabel("eps")
    ax.set_ylabel("delta estimate")
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_sweep(result, out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = [plot_dbar(result, out / f"{result.config.name}_dbar.svg")]
    if result.config.compute_delta:
        paths.append(plot_delta(result, out / f"{result.config.name}_delta.svg"))
    return paths
