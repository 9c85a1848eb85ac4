"""Render trajectory figures to files alongside the delimited output.

One four-panel time-series figure per run: configuration (or plant
states), momenta, controller states, and the Lyapunov value.  Rendering
uses the Agg backend so it works headless; files are PNG.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .sim import Trajectory


def plot_columns(traj: Trajectory) -> tuple[list[str], np.ndarray]:
    """Tidy plot-data table: t, configuration/momentum (or plant states),
    controller states, Lyapunov value."""
    t = traj.t[:, None]
    if traj.config_dim:
        l = traj.config_dim
        q = traj.x[:, l:]
        p = traj.x[:, :l]
        names = (
            ["t"]
            + [f"q{i + 1}" for i in range(q.shape[1])]
            + [f"p{i + 1}" for i in range(p.shape[1])]
            + [f"xc{i + 1}" for i in range(traj.xc.shape[1])]
            + ["W"]
        )
        table = np.hstack([t, q, p, traj.xc, traj.lyap[:, None]])
    else:
        names = (
            ["t"]
            + [f"x{i + 1}" for i in range(traj.x.shape[1])]
            + [f"xc{i + 1}" for i in range(traj.xc.shape[1])]
            + ["W"]
        )
        table = np.hstack([t, traj.x, traj.xc, traj.lyap[:, None]])
    return names, table


def write_plot_data(traj: Trajectory, path) -> None:
    names, table = plot_columns(traj)
    np.savetxt(path, table, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def render_timeseries(traj: Trajectory, path) -> Path:
    """Write the four-panel time-series figure; returns the file path."""
    path = Path(path)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    if traj.config_dim:
        l = traj.config_dim
        top_left = (traj.x[:, l:], "configuration q")
        top_right = (traj.x[:, :l], "momentum p")
    else:
        top_left = (traj.x, "plant state x")
        top_right = (traj.u, "input u")
    for ax, (data, title) in zip(
        axes.flat[:2], (top_left, top_right)
    ):
        for i in range(data.shape[1]):
            ax.plot(traj.t, data[:, i], label=f"{title.split()[-1]}{i + 1}")
        ax.set_title(title)
        ax.legend(fontsize=8)
    ax = axes.flat[2]
    for i in range(traj.xc.shape[1]):
        ax.plot(traj.t, traj.xc[:, i], label=f"xc{i + 1}")
    ax.set_title("controller state")
    ax.set_xlabel("t [s]")
    if traj.xc.shape[1]:
        ax.legend(fontsize=8)
    ax = axes.flat[3]
    ax.plot(traj.t, traj.lyap)
    ax.set_title("Lyapunov value W")
    ax.set_xlabel("t [s]")
    for s in traj.switch_times:
        for a in axes.flat:
            a.axvline(s, color="grey", lw=0.8, ls="--")
    fig.suptitle(traj.name)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
