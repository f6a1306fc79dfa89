"""Figure rendering for the report path: every plot lands next to the data
files it visualises."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_point_sets(path, q, mapped=None, partner=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(q.nodes.real, q.nodes.imag, ".", ms=4, label="nodes")
    if mapped is not None:
        ax.plot(mapped.nodes.real, mapped.nodes.imag, "x", ms=4, label="isometry image")
    if partner is not None:
        ax.plot(partner.nodes.real, partner.nodes.imag, "+", ms=5, label="partner family")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_coefficients(path, sol):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(sol.nodes_q.nodes.real if hasattr(sol, "nodes_q") else sol.nodes.nodes.real,
            np.abs(sol.a), "o-", ms=3, label="|a|")
    if hasattr(sol, "b"):
        ax.plot(sol.nodes_r.nodes.real, np.abs(sol.b), "s-", ms=3, label="|b|")
    ax.set_xlabel("Re(node)")
    ax.set_ylabel("coefficient magnitude")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_densities(path, sol):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x = sol.nodes.nodes.real
    ax.plot(x, np.abs(sol.f1), "o-", ms=3, label="|f1|")
    if np.any(sol.f2):
        ax.plot(x, np.abs(sol.f2), "s-", ms=3, label="|f2|")
    ax.set_xlabel("Re(node)")
    ax.set_ylabel("density magnitude")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_field(path, fg):
    nx, ny, nt = fg.axes.shape
    if ny > 1:
        fig, axs = plt.subplots(1, 2, figsize=(9, 3.6))
        it = nt // 2
        for ax, part, name in ((axs[0], fg.u.real, "Re u"), (axs[1], fg.u.imag, "Im u")):
            pm = ax.pcolormesh(fg.axes.x, fg.axes.y, part[:, :, it].T, shading="nearest")
            fig.colorbar(pm, ax=ax, shrink=0.85)
            ax.set_xlabel("x")
            ax.set_ylabel("y")
            ax.set_title(f"{name} at t={fg.axes.t[it]:g}")
    else:
        fig, ax = plt.subplots(figsize=(6, 3.6))
        for it in range(nt):
            ax.plot(fg.axes.x, fg.u[:, 0, it].real, label=f"t={fg.axes.t[it]:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("Re u")
        if nt > 1:
            ax.legend(fontsize=7)
    _finish(fig, path)


def save_refinement(path, rows):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    hx = [row["hx"] for row in rows]
    ax.loglog(hx, [row["max_norm"] for row in rows], "o-", label="max norm")
    ax.loglog(hx, [row["l2_norm"] for row in rows], "s-", label="l2 norm")
    ref = [row["l2_norm"] for row in rows][0]
    ax.loglog(hx, [ref * (h / hx[0]) ** 2 for h in hx], "k--", lw=0.8, label="h^2")
    ax.set_xlabel("hx")
    ax.set_ylabel("interior residual norm")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_convergence(path, rows):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    levels = [row["level"] for row in rows]
    diffs = [row.get("sup_diff") for row in rows]
    pts = [(lv, d) for lv, d in zip(levels, diffs) if d is not None and np.isfinite(d) and d > 0]
    if pts:
        ax.semilogy(*zip(*pts), "o-", label="sup |u_n - u_prev|")
    gaps = [(row["level"], row["moment2_gap"]) for row in rows if "moment2_gap" in row and row["moment2_gap"] > 0]
    if gaps:
        ax.semilogy(*zip(*gaps), "s--", label="|m2 - limit|")
    ax.set_xlabel("construction level")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_spectrum(path, report):
    fig, ax = plt.subplots(figsize=(6, 2.8))
    for lo, hi in report.bands:
        ax.axvspan(lo, hi, color="0.85")
    eigs = np.asarray(report.eigenvalues)
    ax.plot(eigs, np.zeros_like(eigs), "k|", ms=14)
    ax.set_yticks([])
    ax.set_xlabel("energy")
    ax.set_title("eigenvalues vs candidate bands", fontsize=9)
    _finish(fig, path)


def save_potential(path, x, u):
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(x, u, lw=0.9)
    ax.set_xlabel("x")
    ax.set_ylabel("u(x, 0)")
    _finish(fig, path)
