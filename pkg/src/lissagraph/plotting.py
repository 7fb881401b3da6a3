"""Static figures written next to the CSV output (non-interactive backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

BRANCH_COLORS = ("tab:blue", "tab:red", "tab:green")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def spectrum(path: Path, tau, K, title="") -> Path:
    """Level curves ``k_n(tau)``; ``K`` has one column per level."""
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(tau, K, lw=0.6, color="k")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$k_n(\tau)$")
    ax.set_xlim(0, 1)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def phase_traces(path: Path, traces: dict) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for n, tr in sorted(traces.items()):
        ax.plot(tr.tau_grid, tr.accumulated, label=f"n = {n}")
    ax.axhline(0, color="0.6", lw=0.5)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$\Gamma(\tau)$")
    ax.legend(fontsize=8)
    return _save(fig, path)


def level_phases(path: Path, n, gamma) -> Path:
    """Cycle phases against level, colored by ``n mod 3``."""
    n = np.asarray(n)
    gamma = np.asarray(gamma)
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in range(3):
        sel = n % 3 == (r + 1) % 3
        ax.plot(n[sel], gamma[sel], "o", ms=3, color=BRANCH_COLORS[r], label=f"n = {r + 1} mod 3")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\Gamma^{(n)}$")
    ax.legend(fontsize=8)
    return _save(fig, path)


def rho_sweep(path: Path, rho, gamma_over_rho2, leading_over_rho2, delta, slope=None) -> Path:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    a1.plot(np.log(rho), gamma_over_rho2, "o", label="quadrature")
    a1.plot(np.log(rho), leading_over_rho2, "-", color="k", label="leading order")
    a1.set_xlabel(r"$\log\rho$")
    a1.set_ylabel(r"$\Gamma_0/\rho^2$")
    a1.legend(fontsize=8)
    a2.loglog(rho, np.abs(delta), "o-")
    a2.set_xlabel(r"$\rho$")
    a2.set_ylabel(r"$|\Gamma_0 - \Gamma_0^{lead}|$")
    if slope is not None:
        a2.set_title(f"slope {slope:.3f}")
    return _save(fig, path)


def alpha_sweep(path: Path, phi, values) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(phi, values, "o-", ms=3)
    ax.set_xlabel(r"$\varphi$")
    ax.set_ylabel(r"$\Gamma_0/\rho^2$")
    return _save(fig, path)


def evolution(path: Path, tau, norm_sq, overlap, phase) -> Path:
    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    axes[0].plot(tau, np.asarray(norm_sq) - norm_sq[0])
    axes[0].set_ylabel(r"$\|g\|^2 - \|g_0\|^2$")
    axes[1].plot(tau, overlap)
    axes[1].set_ylabel("overlap")
    axes[2].plot(tau, phase)
    axes[2].set_ylabel("phase")
    axes[2].set_xlabel(r"$\tau$")
    return _save(fig, path)


def convergence(path: Path, T, err) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(T, err, "o-")
    ax.set_xlabel("T")
    ax.set_ylabel("phase error")
    return _save(fig, path)


def flux(path: Path, tau, measured, predicted) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tau, measured, label="measured")
    ax.plot(tau, predicted, "--", label="boundary flux")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$d\|\phi\|^2/d\tau$")
    ax.legend(fontsize=8)
    return _save(fig, path)


def knot(path: Path, pts) -> Path:
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], lw=1)
    ax.set_xlabel("$L_1$")
    ax.set_ylabel("$L_2$")
    ax.set_zlabel("$L_3$")
    return _save(fig, path)
