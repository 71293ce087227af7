"""Static plot emission from CSV logs (position/velocity/orientation/cables)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import LogIOError
from .logio import column_index, read_log
from .so3 import quat_to_euler_zyx

_AXES = ("x", "y", "z")


def _slice(columns, data, first, count):
    i = column_index(columns, first)
    return data[:, i:i + count]


def emit_plots(log_path, out_dir) -> dict:
    """Write one PNG per plot family; returns written paths and marker counts.

    The orientation plot is skipped (without error) when the log has no
    payload attitude columns, i.e. for point-mass payloads.
    """
    columns, data = read_log(log_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if data.shape[0] == 0:
        raise LogIOError(f"log {log_path} has no rows to plot")
    t = data[:, column_index(columns, "t")]
    n_robots = sum(1 for c in columns if c.startswith("taut"))
    written: dict = {"paths": [], "event_markers": 0}

    pos = _slice(columns, data, "xL_x", 3)
    des = _slice(columns, data, "des_x", 3)
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 6))
    for i, ax in enumerate(axes):
        ax.plot(t, pos[:, i], label="payload")
        ax.plot(t, des[:, i], "--", label="desired")
        ax.set_ylabel(f"{_AXES[i]} [m]")
        ax.grid(True, alpha=0.3)
    axes[0].legend(loc="upper right")
    axes[0].set_title("payload position")
    axes[-1].set_xlabel("t [s]")
    path = out_dir / "position.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written["paths"].append(str(path))

    vel = _slice(columns, data, "vL_x", 3)
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 6))
    for i, ax in enumerate(axes):
        ax.plot(t, vel[:, i])
        ax.set_ylabel(f"v{_AXES[i]} [m/s]")
        ax.grid(True, alpha=0.3)
    axes[0].set_title("payload velocity")
    axes[-1].set_xlabel("t [s]")
    path = out_dir / "velocity.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written["paths"].append(str(path))

    if "qL_w" in columns:
        quats = _slice(columns, data, "qL_w", 4)
        des_q = _slice(columns, data, "des_qw", 4)
        euler = np.array([quat_to_euler_zyx(q) for q in quats]) * 180.0 / math.pi
        euler_des = np.array([quat_to_euler_zyx(q) for q in des_q]) * 180.0 / math.pi
        names = ("roll", "pitch", "yaw")
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 6))
        for i, ax in enumerate(axes):
            ax.plot(t, euler[:, i], label="payload")
            ax.plot(t, euler_des[:, i], "--", label="desired")
            ax.set_ylabel(f"{names[i]} [deg]")
            ax.grid(True, alpha=0.3)
        axes[0].legend(loc="upper right")
        axes[0].set_title("payload orientation (ZYX Euler)")
        axes[-1].set_xlabel("t [s]")
        path = out_dir / "orientation.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written["paths"].append(str(path))

    event_rows = data[:, column_index(columns, "event")] > 0.5
    fig, ax = plt.subplots(figsize=(8, 3.2))
    for k in range(1, n_robots + 1):
        taut = data[:, column_index(columns, f"taut{k}")]
        ax.step(t, taut + 1.1 * (k - 1), where="post", label=f"cable {k}")
    for te in t[event_rows]:
        ax.axvline(te, color="crimson", alpha=0.6, linestyle=":")
    written["event_markers"] = int(event_rows.sum())
    ax.set_xlabel("t [s]")
    ax.set_ylabel("taut flag (offset per cable)")
    ax.set_title("cable status and reset events")
    ax.grid(True, alpha=0.3)
    if n_robots > 1:
        ax.legend(loc="upper right")
    path = out_dir / "cables.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written["paths"].append(str(path))
    return written
