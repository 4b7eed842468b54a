"""Report figures.

Everything renders through the Agg backend straight to files, and the
PNG metadata is pinned so a rerun over the same inputs reproduces the
bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import algebra

_SAVE = dict(dpi=120, metadata={"Software": "liesteer"})


def probe_figure(report, path):
    """Reached dimension after each bracket depth, against the target."""
    fig, ax = plt.subplots(figsize=(6, 4))
    depths = np.arange(len(report.dims))
    ax.plot(depths, report.dims, marker="o", color="tab:blue")
    ax.axhline(report.target_dim, color="tab:red", linestyle="--",
               label=f"target {report.target_dim}")
    ax.set_xlabel("bracket depth")
    ax.set_ylabel("function-space dimension")
    verdict = "saturated" if report.saturated else (
        "stalled" if report.stalled else "depth limit")
    ax.set_title(f"closure probe: {verdict} at dim {report.final_dim}")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plan_figure(plan, path):
    """Angle profiles with their odd-polynomial fits, plus residuals."""
    beta = plan.grid[:, 0]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    colors = ["tab:blue", "tab:orange", "tab:green"]
    for slot in (1, 2, 3):
        ang = plan.target_angles[:, slot - 1]
        fit = plan.fits[slot]
        ax1.plot(beta, ang, ".", color=colors[slot - 1],
                 label=f"angle {slot}")
        ax1.plot(beta, fit(beta), "-", color=colors[slot - 1], alpha=0.6)
        ax2.semilogy(beta, np.abs(fit.residuals) + 1e-18, "-",
                     color=colors[slot - 1])
    ax1.set_ylabel("target angle")
    ax1.legend(loc="best", fontsize=8)
    ax1.grid(True, alpha=0.3)
    ax2.set_xlabel("parameter")
    ax2.set_ylabel("|fit residual|")
    ax2.grid(True, alpha=0.3)
    ax1.set_title(f"fit error {plan.fit_error:.2e}, "
                  f"compile error {plan.compile_error:.2e}")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def ensemble_figure(spec, traj, path):
    """Distance of each final state from the identity across the grid."""
    final = traj.states[-1]
    p_cnt = final.shape[0]
    n = spec.n
    eye = np.eye(final.shape[-1], dtype=final.dtype)
    if spec.group == "SE":
        rot = [algebra.geodesic_distance(final[p][:n, :n], np.eye(n))
               for p in range(p_cnt)]
        tra = [float(np.linalg.norm(final[p][:n, n])) for p in range(p_cnt)]
        series = [("rotation part", rot), ("translation part", tra)]
    else:
        series = [("geodesic distance",
                   [algebra.geodesic_distance(final[p], eye)
                    for p in range(p_cnt)])]
    fig, ax = plt.subplots(figsize=(6, 4))
    x = traj.points[:, 0] if traj.points.shape[1] == 1 else np.arange(p_cnt)
    for name, vals in series:
        ax.plot(x, vals, marker="o", label=name)
    ax.set_xlabel("parameter" if traj.points.shape[1] == 1 else "grid index")
    ax.set_ylabel("distance from identity")
    ax.set_title("final ensemble state")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def steer_figure(spec, traj, path):
    """Rigid motion path: the first two position coordinates over time."""
    n = spec.n
    pos = np.stack([traj.states[k][:n, n] for k in range(traj.times.shape[0])])
    fig, ax = plt.subplots(figsize=(5, 5))
    if n >= 2:
        ax.plot(pos[:, 0], pos[:, 1], "-o", color="tab:blue")
        ax.plot(pos[0, 0], pos[0, 1], "s", color="tab:green", label="start")
        ax.plot(pos[-1, 0], pos[-1, 1], "*", color="tab:red", markersize=12,
                label="end")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.axis("equal")
        ax.legend(loc="best")
    else:
        ax.plot(traj.times, pos[:, 0], "-o")
        ax.set_xlabel("time")
        ax.set_ylabel("x1")
    ax.set_title("steering path (position projection)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
