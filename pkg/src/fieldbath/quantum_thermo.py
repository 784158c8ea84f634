"""Quantum thermodynamic functionals and the quantum-classical checks.

Heat is the energy flow through the generator, dQ/dt = Tr[drho/dt H];
work is the response to the mass schedule, dW/dt = Tr[rho dH/db] db/dt;
together they close the first law d Tr[rho H]/dt = dQ/dt + dW/dt.

The entropy is the von Neumann entropy S = -kB Tr[rho ln rho].  For the
detailed-balance (GKSL) evolution the entropy balance

    dS/dt - (1/T) dQ/dt =
    (kB/hbar) sum_{n,m} [ P_n R+_{mn} ln(P_n R+_{mn} / (P_m R-_{nm}))
                        + P_n R-_{mn} ln(P_n R-_{mn} / (P_m R+_{nm})) ] >= 0

holds with R+-_{mn} = gamma_+- |<m|L_+-|n>|^2 evaluated in the
instantaneous eigenbasis of rho (P_n its eigenvalues, L_+ = a, L_- =
a^dag).  Grouping (n,m) with (m,n) writes the sum as sum (x-y) ln(x/y)
>= 0, with equality exactly at the Gibbs state; the identity with the
heat uses only the detailed-balance ratio gamma_-/gamma_+ =
exp(-beta hbar omega), so it holds verbatim for the truncated generator.

Relative entropies: with rho*(t) = exp(-beta H(t))/Z(t),

    dS/dt - (1/T) dQ/dt = kB d/dt tilde_S_rel,
    tilde_S_rel(t) = -S_rel(rho(t)|rho*(t)) - int^t ds Tr[rho(s) d_s ln rho*(s)],

where the drive integrand is -beta (Tr[rho d_sH] - Tr[rho* d_sH]); for a
frozen Hamiltonian the integral vanishes and S_rel itself decays
monotonically along the relaxation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable
import warnings

import numpy as np

from .quantum_master import (
    FockDensityMatrix,
    GKSLRates,
    ModeOperators,
    build_gksl_rates,
    build_L_matrix,
    gksl_rhs,
    general_qme_rhs,
    hamiltonian_at,
    instantaneous_ladder,
    steady_state_populations,
)


def _real_trace(mat: np.ndarray, tol: float = 1e-12) -> float:
    tr = complex(np.trace(mat))
    scale = max(abs(tr), 1.0)
    if abs(tr.imag) > tol * scale:
        raise ValueError(f"trace has imaginary residue {tr.imag:.3e}")
    return tr.real


def q_heat_rate(rho: np.ndarray, rhs: np.ndarray, H_mode: np.ndarray) -> float:
    """dQ/dt = Tr[(d rho/dt) H]; real to rounding."""
    if rhs.shape != H_mode.shape:
        raise ValueError("generator output and Hamiltonian dimensions differ")
    return _real_trace(rhs @ H_mode)


def q_work_rate(rho: np.ndarray, dH_db: np.ndarray, db_dt: float) -> float:
    """dW/dt = Tr[rho dH/db] * db/dt for one mode."""
    return _real_trace(rho @ dH_db) * db_dt


def von_neumann_entropy(rho: np.ndarray, kB: float = 1.0) -> float:
    """S = -kB sum p ln p with 0 ln 0 = 0.

    Eigenvalues in [-1e-12, 0) are clamped to zero; anything lower is an
    error (the state has genuinely lost positivity).
    """
    vals = np.linalg.eigvalsh(rho)
    if vals.min() < -1e-12:
        raise ValueError(f"negative eigenvalue {vals.min():.3e} below clamp threshold")
    vals = np.clip(vals, 0.0, None)
    nz = vals[vals > 0.0]
    return float(-kB * np.sum(nz * np.log(nz)))


def second_law_production(rho: np.ndarray, rates: GKSLRates, ops: ModeOperators,
                          a_op: np.ndarray | None = None, kB: float = 1.0,
                          eps: float = 1e-14) -> float:
    """Entropy production of the detailed-balance evolution; >= -1e-10.

    Eigenvalues below ``eps`` are excluded from logarithms: terms whose
    source population is that small vanish in the x ln x sense, and jumps
    into an eps-sized population are evaluated with the floored value (a
    warning flags the regularization).
    """
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() < -1e-12:
        raise ValueError("state is not positive semidefinite")
    P = np.clip(vals, 0.0, None)
    a_eig = vecs.conj().T @ (ops.a if a_op is None else a_op) @ vecs
    A2 = np.abs(a_eig) ** 2  # A2[m, n] = |<m|a|n>|^2
    gp, gm = rates.gamma_plus, rates.gamma_minus
    if gp == 0.0 and gm == 0.0:
        return 0.0

    floored = False
    total = 0.0
    d = len(P)
    for n in range(d):
        if P[n] < eps:
            continue  # x ln x -> 0 for every term sourced here
        for m in range(d):
            pm = P[m]
            if pm < eps:
                pm = eps
                floored = floored or (A2[m, n] > 0 or A2[n, m] > 0)
            if A2[m, n] > 0.0 and gp > 0.0 and gm > 0.0:
                x = P[n] * gp
                total += P[n] * gp * A2[m, n] * np.log(x / (pm * gm))
            if A2[n, m] > 0.0 and gp > 0.0 and gm > 0.0:
                total += P[n] * gm * A2[n, m] * np.log(P[n] * gm / (pm * gp))
    if floored:
        warnings.warn("entropy production used the eps floor for vanishing populations",
                      RuntimeWarning, stacklevel=2)
    return kB * total / ops.hbar


def log_partition(H_mode: np.ndarray, beta: float) -> float:
    """ln Tr exp(-beta H) over the truncated spectrum."""
    e = np.linalg.eigvalsh(H_mode)
    emin = e.min()
    return float(-beta * emin + np.log(np.sum(np.exp(-beta * (e - emin)))))


def relative_entropy(rho: np.ndarray, H_mode: np.ndarray, beta: float) -> float:
    """S_rel(rho | rho*) = Tr[rho ln rho] - Tr[rho ln rho*] in nats.

    With rho* = exp(-beta H)/Z this is -S_vN/kB + beta Tr[rho H] + ln Z,
    which needs no diagonalization of rho* beyond the spectrum of H.
    """
    s = von_neumann_entropy(rho, kB=1.0)
    return float(-s + beta * _real_trace(rho @ H_mode) + log_partition(H_mode, beta))


@dataclass(frozen=True)
class QThermoRecord:
    """One snapshot of the per-mode quantum thermodynamic balance."""

    t: float
    energy: float
    heat_rate: float
    work_rate: float
    S_QT: float
    production_rate: float
    S_rel: float
    tilde_S_rel: float


@dataclass
class QuantumThermoTrajectory:
    """Dense record of a driven per-mode evolution and its thermodynamics."""

    times: np.ndarray
    states: list
    energy: np.ndarray
    heat: np.ndarray          # cumulative
    work: np.ndarray          # cumulative
    heat_rate: np.ndarray
    work_rate: np.ndarray
    S_QT: np.ndarray
    production: np.ndarray
    S_rel: np.ndarray
    tilde_S_rel: np.ndarray
    cptp: np.ndarray          # instantaneous dissipator verdict per snapshot
    min_eigenvalue: np.ndarray
    kB: float

    def records(self) -> list[QThermoRecord]:
        return [
            QThermoRecord(
                t=float(self.times[i]),
                energy=float(self.energy[i]),
                heat_rate=float(self.heat_rate[i]),
                work_rate=float(self.work_rate[i]),
                S_QT=float(self.S_QT[i]),
                production_rate=float(self.production[i]),
                S_rel=float(self.S_rel[i]),
                tilde_S_rel=float(self.tilde_S_rel[i]),
            )
            for i in range(len(self.times))
        ]


@dataclass(frozen=True)
class ModeDrive:
    """Scalar schedules driving one mode: mass value b(t), its rate, and
    the field-equation coupling gamma_phi(t)."""

    b: Callable[[float], float]
    db_dt: Callable[[float], float]
    gamma_phi: Callable[[float], float]


def run_thermo_protocol(ops: ModeOperators, lam: float, drive: ModeDrive,
                        beta: float, rho0: FockDensityMatrix, dt: float, steps: int,
                        snapshot_stride: int = 1, kind: str = "gksl",
                        gamma_pi: float | None = None,
                        kB: float = 1.0) -> QuantumThermoTrajectory:
    """Drive one mode through a mass/coupling schedule and record thermodynamics.

    ``kind='gksl'`` uses the detailed-balance jump generator with the
    instantaneous frequency omega(t) = c sqrt(lam^2 + b(t)^2), rebuilding
    the ladder operators at every stage; ``kind='general'`` uses the
    sandwiched generator with explicit (gamma_phi, gamma_pi), which is
    restricted to a frozen mass schedule.  Heat and work are accumulated
    inside the RK4 stages, so the first law closes to integrator accuracy.
    """
    hbar, c = ops.hbar, ops.c

    def omega(t):
        return c * np.sqrt(lam**2 + drive.b(t) ** 2)

    frozen = kind == "general"
    if frozen and abs(drive.b(0.0) - drive.b(dt * max(steps, 1))) > 1e-14:
        raise ValueError("the sandwiched generator supports frozen mass schedules only")
    if frozen and gamma_pi is None:
        raise ValueError("kind='general' needs an explicit gamma_pi")

    def rhs(rho, t):
        om = omega(t)
        if frozen:
            d_rho = general_qme_rhs(rho, ops, drive.gamma_phi(t), gamma_pi, beta, hbar)
        else:
            rates_t = build_gksl_rates(drive.gamma_phi(t), om, beta, hbar, c)
            d_rho = gksl_rhs(rho, ops, rates_t, a=instantaneous_ladder(ops, om),
                             H=hamiltonian_at(ops, om))
        H_t = ops.H_mode if frozen else hamiltonian_at(ops, om)
        dq = _real_trace(d_rho @ H_t)
        dw = _real_trace(rho @ (drive.b(t) * (ops.phi @ ops.phi))) * drive.db_dt(t)
        return d_rho, dq, dw

    rho = rho0.rho.astype(complex).copy()
    t, q, w = 0.0, 0.0, 0.0
    snap_idx = [0] + [s for s in range(1, steps + 1)
                      if s % snapshot_stride == 0 or s == steps]

    times, states, energies, heats, works = [], [], [], [], []
    heat_rates, work_rates, entropies, productions = [], [], [], []
    s_rels, cptps, min_eigs = [], [], []

    def snapshot():
        om = omega(t)
        H_t = ops.H_mode if frozen else hamiltonian_at(ops, om)
        d_rho, dq, dw = rhs(rho, t)
        times.append(t)
        states.append(FockDensityMatrix(rho=rho.copy(), omega=om))
        energies.append(_real_trace(rho @ H_t))
        heats.append(q)
        works.append(w)
        heat_rates.append(dq)
        work_rates.append(dw)
        # entropic functionals are evaluated on the positive part so that
        # non-CPTP demonstrations keep running; min_eigenvalue records the
        # raw violation
        entropies.append(von_neumann_entropy(_clip_psd(rho), kB=kB))
        if frozen:
            cptps.append(build_L_matrix(drive.gamma_phi(t), gamma_pi, om, beta,
                                        hbar, c).cptp)
            productions.append(np.nan)  # filled by finite differences below
        else:
            rates_t = build_gksl_rates(drive.gamma_phi(t), om, beta, hbar, c)
            cptps.append(True)
            productions.append(
                second_law_production(_clip_psd(rho), rates_t, ops,
                                      a_op=instantaneous_ladder(ops, om), kB=kB)
            )
        s_rels.append(relative_entropy(_clip_psd(rho), H_t, beta))
        min_eigs.append(float(np.linalg.eigvalsh(rho).min()))

    snapshot()
    next_snap = 1
    for step in range(steps):
        k1, q1, w1 = rhs(rho, t)
        k2, q2, w2 = rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
        k3, q3, w3 = rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
        k4, q4, w4 = rhs(rho + dt * k3, t + dt)
        rho = rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        q += dt / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4)
        w += dt / 6.0 * (w1 + 2 * w2 + 2 * w3 + w4)
        t += dt
        if next_snap < len(snap_idx) and step + 1 == snap_idx[next_snap]:
            snapshot()
            next_snap += 1

    times = np.array(times)
    s_rel = np.array(s_rels)

    # drive integrand: Tr[rho d_t ln rho*] = -beta (Tr[rho dH/dt] - Tr[rho* dH/dt])
    drive_term = np.empty_like(times)
    for i, (ti, st) in enumerate(zip(times, states)):
        om = omega(ti)
        dH_dt = drive.b(ti) * drive.db_dt(ti) * (ops.phi @ ops.phi)
        H_t = ops.H_mode if frozen else hamiltonian_at(ops, om)
        e_h, v_h = np.linalg.eigh(H_t)
        wgt = np.exp(-beta * (e_h - e_h.min()))
        wgt /= wgt.sum()
        star_expect = float(np.einsum("i,ii->", wgt, (v_h.conj().T @ dH_dt @ v_h).real))
        drive_term[i] = -beta * (_real_trace(st.rho @ dH_dt) - star_expect)

    integral = np.concatenate(
        [[0.0], np.cumsum(0.5 * (drive_term[1:] + drive_term[:-1]) * np.diff(times))]
    )
    tilde = -s_rel - integral

    production = np.array(productions)
    if frozen and len(times) >= 3:
        # entropy balance by central differences (the sandwiched generator
        # has no jump decomposition to evaluate the closed form on)
        S = np.array(entropies)
        T = 1.0 / (kB * beta)
        dS = np.gradient(S, times)
        production = dS - np.array(heat_rates) / T

    return QuantumThermoTrajectory(
        times=times,
        states=states,
        energy=np.array(energies),
        heat=np.array(heats),
        work=np.array(works),
        heat_rate=np.array(heat_rates),
        work_rate=np.array(work_rates),
        S_QT=np.array(entropies),
        production=production,
        S_rel=s_rel,
        tilde_S_rel=tilde,
        cptp=np.array(cptps, dtype=bool),
        min_eigenvalue=np.array(min_eigs),
        kB=kB,
    )


def _clip_psd(rho: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() >= 0:
        return rho
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def relative_entropy_suite(traj: QuantumThermoTrajectory, beta: float,
                           kB: float = 1.0) -> tuple[np.ndarray, np.ndarray, float]:
    """Relative-entropy identity check along a recorded trajectory.

    Returns (S_rel, tilde_S_rel, identity_residual) where the residual is
    the worst relative mismatch of d S_QT/dt - (1/T) dQ/dt against
    kB * d(tilde_S_rel)/dt over the interior snapshots, both sides by
    central differences on the snapshot grid.
    """
    t = traj.times
    T = 1.0 / (kB * beta)
    lhs = np.gradient(traj.S_QT, t) - traj.heat_rate / T
    rhs = kB * np.gradient(traj.tilde_S_rel, t)
    interior = slice(2, -2)
    scale = max(np.max(np.abs(lhs[interior])), 1e-30)
    resid = float(np.max(np.abs(lhs[interior] - rhs[interior])) / scale)
    return traj.S_rel, traj.tilde_S_rel, resid


@dataclass(frozen=True)
class ClassicalLimitRow:
    hbar: float
    beta_hbar_omega: float
    energy_ratio: float        # stationary hbar*omega*(n+1/2) / (kB T), numeric
    planck_factor: float       # (x/2) coth(x/2)
    ratio_error: float
    relax_supnorm: float       # sup_t |E_q(t) - E_cl(t)| / (kB T)


@dataclass
class ClassicalLimitReport:
    rows: list[ClassicalLimitRow]

    @property
    def supnorms_monotone(self) -> bool:
        s = [r.relax_supnorm for r in self.rows]
        return all(a >= b - 1e-12 for a, b in zip(s, s[1:]))


def _populations_rhs(p: np.ndarray, rates: GKSLRates, hbar: float) -> np.ndarray:
    n = np.arange(len(p), dtype=float)
    out = np.zeros_like(p)
    out += rates.gamma_plus / hbar * (-n * p)
    out[:-1] += rates.gamma_plus / hbar * (n[1:] * p[1:])
    out += rates.gamma_minus / hbar * (-(n + 1) * p)
    out[1:] += rates.gamma_minus / hbar * ((n[:-1] + 1) * p[:-1])
    return out


def _quantum_energy_curve(rates: GKSLRates, hbar: float, omega: float,
                          n0: float, times: np.ndarray) -> np.ndarray:
    """Energy along the occupation relaxation implied by the jump generator.

    Tr[a^dag a x generator] closes: d<n>/dt = -kappa (<n> - nbar) with
    kappa = (gamma_+ - gamma_-)/hbar and nbar = gamma_-/(gamma_+ - gamma_-);
    integrating this scalar equation stays well conditioned at any hbar,
    where the full population chain is numerically stiff.
    """
    kappa = (rates.gamma_plus - rates.gamma_minus) / hbar
    nbar = rates.gamma_minus / (rates.gamma_plus - rates.gamma_minus)
    n = n0
    energies = [hbar * omega * (n + 0.5)]
    for i in range(len(times) - 1):
        span = times[i + 1] - times[i]
        nsub = max(1, int(np.ceil(kappa * span / 0.5)))  # keep kappa*dt small
        dt = span / nsub
        for _ in range(nsub):
            k1 = -kappa * (n - nbar)
            k2 = -kappa * (n + 0.5 * dt * k1 - nbar)
            k3 = -kappa * (n + 0.5 * dt * k2 - nbar)
            k4 = -kappa * (n + dt * k3 - nbar)
            n = n + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        energies.append(hbar * omega * (n + 0.5))
    return np.array(energies)


def _classical_energy_curve(gamma_phi: float, omega: float, c: float, beta: float,
                            times: np.ndarray, hot_factor: float) -> np.ndarray:
    """Single-mode Lyapunov-equation energy relaxation from a hot Gibbs state.

    Covariance units carry 1/beta = kB*T, so the equilibrium block energy
    is exactly kB*T.
    """
    g = gamma_phi * omega**2 / c**2
    gamma_pi = gamma_phi * omega**2 / c**4
    A = np.array([[-g, c**2], [-(omega / c) ** 2, -gamma_pi * c**2]])
    D = 2.0 / beta * np.diag([gamma_phi, gamma_pi])
    q = np.array([(omega / c) ** 2, c**2])
    sig = hot_factor * np.diag(1.0 / (beta * q))
    energies = [0.5 * float(q @ np.diag(sig))]

    def rhs(s):
        return A @ s + s @ A.T + D

    for i in range(len(times) - 1):
        dt = times[i + 1] - times[i]
        k1 = rhs(sig)
        k2 = rhs(sig + 0.5 * dt * k1)
        k3 = rhs(sig + 0.5 * dt * k2)
        k4 = rhs(sig + dt * k3)
        sig = sig + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        energies.append(0.5 * float(q @ np.diag(sig)))
    return np.array(energies)


def classical_limit_check(gamma_phi: float, omega: float, c: float, beta: float,
                          hbar_sequence, kB: float = 1.0,
                          hot_factor: float = 2.0) -> ClassicalLimitReport:
    """Quantum-to-classical comparison over a decreasing hbar sequence.

    For each hbar: (i) the stationary mode energy hbar*omega*(n+1/2)
    against kB*T, with n from the numeric steady state of the jump chain;
    (ii) the energy relaxation curve from a thermal state at temperature
    ``hot_factor * T`` against the classical moment-equation curve with
    detailed-balance couplings.
    """
    T = 1.0 / (kB * beta)
    g = gamma_phi * omega**2 / c**2
    times = np.linspace(0.0, 3.0 / (2.0 * g), 301)
    e_cl = _classical_energy_curve(gamma_phi, omega, c, beta, times, hot_factor)
    rows = []
    for hbar in hbar_sequence:
        x = beta * hbar * omega
        rates = build_gksl_rates(gamma_phi, omega, beta, hbar, c)
        M = max(60, int(np.ceil(80.0 / x)))
        pops = steady_state_populations(rates, hbar, M)
        n_mean = float(np.sum(np.arange(M + 1) * pops))
        e_star = hbar * omega * (n_mean + 0.5)
        ratio = e_star / (kB * T)
        planck = 0.5 * x / np.tanh(0.5 * x)
        beta_hot = beta / hot_factor
        M_hot = max(60, int(np.ceil(80.0 / (beta_hot * hbar * omega))))
        pops_hot = steady_state_populations(
            build_gksl_rates(gamma_phi, omega, beta_hot, hbar, c), hbar, M_hot
        )
        n_hot = float(np.sum(np.arange(M_hot + 1) * pops_hot))
        e_q = _quantum_energy_curve(rates, hbar, omega, n_hot, times)
        rows.append(
            ClassicalLimitRow(
                hbar=float(hbar),
                beta_hbar_omega=float(x),
                energy_ratio=float(ratio),
                planck_factor=float(planck),
                ratio_error=float(abs(ratio - planck)),
                relax_supnorm=float(np.max(np.abs(e_q - e_cl)) / (kB * T)),
            )
        )
    return ClassicalLimitReport(rows=rows)
