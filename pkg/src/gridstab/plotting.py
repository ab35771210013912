"""Matplotlib figures for angle responses, sweeps and Jacobian spectra.

All functions write a file and return the figure; the Agg backend is used so
nothing needs a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "gridstab",
    "svg.fonttype": "none",
}

GOLDEN = (5**0.5 - 1) / 2


def figsize(width: float = 5.0, ratio: float = GOLDEN) -> tuple[float, float]:
    return (width, width * ratio)


def _save(fig, path: Path) -> None:
    path = Path(path)
    # fixed metadata keeps repeated runs byte-identical
    meta = {"Date": None} if path.suffix == ".svg" else {}
    fig.savefig(path, metadata=meta, bbox_inches="tight")


def select_buses(traj, buses=None):
    """Default traces: up to three non-reference buses, lowest ids first."""
    if buses:
        return [b for b in buses if b in traj.bus_ids]
    others = [b for b in traj.bus_ids if b != traj.ref_bus]
    return others[:3] if len(others) > 3 else others


def plot_angle_response(traj, path, buses=None, title=None, relative_to=None):
    """One trace per bus of angle relative to the reference bus versus time."""
    ref = traj.ref_bus if relative_to is None else relative_to
    rel = traj.relative_angles(ref)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        for b in select_buses(traj, buses):
            j = traj.bus_ids.index(b)
            ax.plot(traj.times, np.degrees(rel[:, j]), label=f"bus {b}")
        ax.set_xlabel("time (s)")
        ax.set_ylabel(f"angle rel. to bus {ref} (deg)")
        if title:
            ax.set_title(title)
        if traj.diverged:
            ax.annotate("diverged", xy=(0.98, 0.95), xycoords="axes fraction",
                        ha="right", va="top", color="firebrick")
        ax.legend(loc="best")
        _save(fig, path)
    plt.close(fig)
    return fig


def plot_sweep_responses(trajs: dict, path, bus: int, title=None, relative_to=None):
    """Overlay the response of one bus for several filter constants."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        for td, traj in trajs.items():
            rel = traj.relative_angles(relative_to)
            j = traj.bus_ids.index(bus)
            label = f"T_D = {td:g} s" + (" (diverged)" if traj.diverged else "")
            ax.plot(traj.times, np.degrees(rel[:, j]), label=label)
        ax.set_xlabel("time (s)")
        ax.set_ylabel(f"bus {bus} angle (deg)")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        _save(fig, path)
    plt.close(fig)
    return fig


def plot_spectrum(verdicts: dict, path, title=None):
    """Jacobian eigenvalues per filter constant in the complex plane."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        markers = "os^Dvx+"
        for k, (td, v) in enumerate(verdicts.items()):
            ev = v.eigenvalues
            ax.scatter(ev.real, ev.imag, s=14, marker=markers[k % len(markers)],
                       label=f"T_D = {td:g} s" + ("" if v.stable else " (unstable)"))
        ax.axvline(0.0, color="k", linewidth=0.6)
        ax.set_xscale("symlog", linthresh=1e-3)
        ax.set_xlabel("Re(lambda)")
        ax.set_ylabel("Im(lambda)")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        _save(fig, path)
    plt.close(fig)
    return fig
