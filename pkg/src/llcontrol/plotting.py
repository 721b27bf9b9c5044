"""Static figures from run directories (trajectory, diagnostics and loop CSVs)."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _read(path):
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")


def plot_run(run_dir: Path, out_dir: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    traj = run_dir / "trajectory.csv"
    if traj.exists():
        d = _read(traj)
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), sharey=True)
        for c, ax in enumerate(axes, start=1):
            t = np.unique(d["t"])
            nodes = np.unique(d["node_index"])
            grid = d[f"m{c}"].reshape(len(t), len(nodes))
            ax.pcolormesh(np.unique(d["x"]), t, grid, shading="auto", cmap="coolwarm", vmin=-1, vmax=1)
            ax.set_title(f"m{c}(x, t)")
            ax.set_xlabel("x")
        axes[0].set_ylabel("t")
        fig.tight_layout()
        written.append(out_dir / "trajectory.png")
        fig.savefig(written[-1], dpi=120)
        plt.close(fig)
    diag = run_dir / "diagnostics.csv"
    if diag.exists():
        d = _read(diag)
        fig, ax = plt.subplots(figsize=(6, 4))
        for col in ("l2_dist", "h1_dist", "lyapunov", "energy"):
            ax.semilogy(d["t"], np.maximum(d[col], 1e-300), label=col)
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        written.append(out_dir / "diagnostics.png")
        fig.savefig(written[-1], dpi=120)
        plt.close(fig)
    loops = run_dir / "loops.csv"
    if loops.exists():
        d = _read(loops)
        omegas = sorted(set(d["omega"].tolist()), reverse=True)
        fig, axes = plt.subplots(1, len(omegas), figsize=(3.2 * len(omegas), 3.2))
        for ax, w in zip(np.atleast_1d(axes), omegas):
            sel = d["omega"] == w
            ax.plot(d["input"][sel], d["output"][sel])
            ax.set_title(f"omega = {w:g}")
            ax.set_xlabel("input")
        np.atleast_1d(axes)[0].set_ylabel("output")
        fig.tight_layout()
        written.append(out_dir / "loops.png")
        fig.savefig(written[-1], dpi=120)
        plt.close(fig)
    return written
