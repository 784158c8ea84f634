"""Figure rendering for CLI runs: static PNGs written next to the tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, outdir: Path, name: str) -> Path:
    path = Path(outdir) / f"{name}.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def classical_trajectory_figure(outdir, times, energy, heat, work, residual):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(times, energy, label="H(t)")
    ax1.plot(times, energy[0] + heat + work, "--", label="H(0) + Q + W")
    ax1.set_ylabel("energy")
    ax1.legend(frameon=False)
    ax2.semilogy(times[1:], np.maximum(residual[1:], 1e-18))
    ax2.set_xlabel("t")
    ax2.set_ylabel("|dH - Q - W|")
    fig.suptitle("single-trajectory first law")
    return _save(fig, outdir, "trajectory")


def classical_laws_figure(outdir, times, entropy, heat_rate, production, s_kl):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(times, entropy, label="S")
    ax1.plot(times, s_kl, label="KL to Gibbs")
    ax1.set_ylabel("entropy / divergence")
    ax1.legend(frameon=False)
    ax2.plot(times, production, label="production")
    ax2.plot(times, heat_rate, "--", label="heat rate")
    ax2.axhline(0.0, color="k", lw=0.6)
    ax2.set_xlabel("t")
    ax2.legend(frameon=False)
    fig.suptitle("entropy balance along the moment dynamics")
    return _save(fig, outdir, "laws")


def classical_moments_figure(outdir, times, zscores):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(times, zscores, ".-")
    ax.axhline(5.0, color="r", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("max |z| (ensemble vs moment equations)")
    fig.suptitle("Monte Carlo moments against the exact moment dynamics")
    return _save(fig, outdir, "moments")


def quantum_figure(outdir, per_mode):
    """per_mode: list of (label, times, energy, S_QT, production, S_rel)."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), sharex=True)
    for label, t, e, s, prod, srel in per_mode:
        axes[0, 0].plot(t, e, label=label)
        axes[0, 1].plot(t, s, label=label)
        axes[1, 0].plot(t, prod, label=label)
        axes[1, 1].plot(t, srel, label=label)
    axes[0, 0].set_ylabel("energy")
    axes[0, 1].set_ylabel("entropy")
    axes[1, 0].set_ylabel("production")
    axes[1, 0].axhline(0.0, color="k", lw=0.6)
    axes[1, 1].set_ylabel("relative entropy")
    for ax in axes[1]:
        ax.set_xlabel("t")
    axes[0, 0].legend(frameon=False, fontsize=8)
    fig.suptitle("per-mode quantum thermodynamics")
    return _save(fig, outdir, "qthermo")


def cptp_scan_figure(outdir, ratios, bho, min_det, dbc_ratio=1.0):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    grid = np.sign(min_det) * np.log1p(np.abs(min_det))
    mesh = ax.pcolormesh(ratios, bho, grid.T, shading="auto", cmap="RdBu")
    ax.axvline(dbc_ratio, color="k", ls="--", lw=1.0, label="detailed balance")
    ax.set_yscale("log")
    ax.set_xlabel("gamma_Pi / gamma_Pi(detailed balance)")
    ax.set_ylabel("beta hbar omega")
    ax.legend(frameon=False)
    fig.colorbar(mesh, ax=ax, label="sign(det L_H) log(1+|det|)")
    fig.suptitle("dissipator-matrix determinant across couplings and temperature")
    return _save(fig, outdir, "cptp_scan")


def classical_limit_figure(outdir, hbars, ratios, plancks, supnorms):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(hbars, ratios, "o-", label="stationary energy / kT")
    ax1.plot(hbars, plancks, "x--", label="(x/2) coth(x/2)")
    ax1.set_xscale("log")
    ax1.set_xlabel("hbar")
    ax1.legend(frameon=False)
    ax2.loglog(hbars, np.maximum(supnorms, 1e-18), "o-")
    ax2.set_xlabel("hbar")
    ax2.set_ylabel("sup-norm relaxation deviation / kT")
    fig.suptitle("classical limit of the quantum relaxation")
    return _save(fig, outdir, "classical_limit")
