"""Figure rendering for the CLI report paths.

Everything draws through the Agg backend so the commands work headless;
each function writes one PNG next to the delimited output it illustrates.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .dynamics import radial_bounds_from_seed  # noqa: E402
from .errors import OutsideFamilyError  # noqa: E402
from .integrate import Trajectory  # noqa: E402

_DPI = 140


def plot_trajectory(traj: Trajectory, path: str, num_samples: int = 2001) -> str:
    """r(t) against its confinement bracket, f(t), and the energy drift."""
    grid = np.linspace(0.0, traj.t_end, num_samples)
    ys = np.asarray(traj.dense(grid), dtype=float)
    drift = np.abs(traj.drift_along(grid))

    fig, (ax_r, ax_f, ax_e) = plt.subplots(3, 1, sharex=True, figsize=(8.0, 8.0))
    ax_r.plot(grid, ys[2], lw=1.0)
    try:
        rb = radial_bounds_from_seed(traj.seed)
        ax_r.axhline(rb.r_lo, color="tab:red", lw=0.8, ls="--", label="r_lo")
        ax_r.axhline(rb.r_hi, color="tab:red", lw=0.8, ls="--", label="r_hi")
        ax_r.legend(loc="best", fontsize=8)
    except OutsideFamilyError:
        pass
    ax_r.set_ylabel("r(t)")

    ax_f.plot(grid, ys[0], lw=1.0, color="tab:green")
    ax_f.set_ylabel("f(t)")

    ax_e.semilogy(grid, np.maximum(drift, 1e-18), lw=1.0, color="tab:purple")
    ax_e.set_ylabel("|c2 drift| (rel)")
    ax_e.set_xlabel("t")

    q = traj.seed
    fig.suptitle(f"n={q.n}  m1={q.m1:g}  m2={q.m2:g}  y10={q.y10:g}  dy20={q.dy20:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_bodies(ts: np.ndarray, positions: np.ndarray, path: str) -> str:
    """Cartesian view of a reconstructed run: ring paths in XY, heights over t.

    positions has shape (num_samples, n_bodies, 3); body 0 is the axial one.
    """
    nb = positions.shape[1]
    fig, (ax_xy, ax_z) = plt.subplots(1, 2, figsize=(11.0, 5.0))
    for b in range(1, nb):
        ax_xy.plot(positions[:, b, 0], positions[:, b, 1], lw=0.8)
    ax_xy.plot(positions[:, 0, 0], positions[:, 0, 1], "k.", ms=4, label="axial body")
    ax_xy.set_xlabel("x")
    ax_xy.set_ylabel("y")
    ax_xy.set_aspect("equal", adjustable="datalim")
    ax_xy.legend(loc="best", fontsize=8)

    ax_z.plot(ts, positions[:, 0, 2], lw=1.2, label="axial body")
    for b in range(1, nb):
        ax_z.plot(ts, positions[:, b, 2], lw=0.7)
    ax_z.set_xlabel("t")
    ax_z.set_ylabel("z")
    ax_z.legend(loc="best", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_catalog(candidates: Sequence, path: str) -> str:
    """Scatter of candidate seeds: (y10, t0) colored by log10 xi."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    if candidates:
        y10 = [c.q.y10 for c in candidates]
        t0 = [c.q.t0 for c in candidates]
        logxi = [np.log10(max(c.xi, 1e-300)) for c in candidates]
        sc = ax.scatter(y10, t0, c=logxi, cmap="viridis", s=24)
        fig.colorbar(sc, ax=ax, label="log10 xi")
    ax.set_xlabel("y10")
    ax.set_ylabel("t0")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
