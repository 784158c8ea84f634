"""Built-in invariant suite: fast self-checks runnable from the CLI.

Each check returns (name, passed, detail).  The suite covers the algebraic
identities that pin the package's conventions: basis orthonormality and
eigen-relations, the Gibbs/Lyapunov fixed-point consistency, the vanishing
of heat and entropy production at equilibrium, the detailed-balance rate
ratio, the all-temperature CPTP boundary, the agreement of the sandwiched
generator with its GKSL reduction, and the steady-state occupation.
"""

from __future__ import annotations

import numpy as np

from .classical_sde import CouplingSchedule, FreeFieldHamiltonian, MassProtocol
from .classical_thermo import (
    entropy_production,
    gibbs_covariance,
    gibbs_state,
    heat_rate_mean,
    stationary_covariance,
)
from .lattice import LatticeSpec, build_derivative, eigenbasis
from .quantum_master import (
    build_gksl_rates,
    build_mode_operators,
    cptp_for_all_temperatures,
    detailed_balance_gamma_pi,
    general_qme_rhs,
    gibbs_density,
    gksl_rhs,
    steady_state,
)


def check_basis_algebra() -> tuple[str, bool, str]:
    worst = 0.0
    for N in (2, 8, 32):
        spec = LatticeSpec(N=N, ell=2.0 * np.pi)
        basis = eigenbasis(spec)
        v = basis.vectors
        gram = v.conj() @ v.T - np.eye(2 * N) / spec.dx
        comp = spec.dx * (v.conj().T @ v).T - np.eye(2 * N)
        d2 = build_derivative(spec, 2).matrix
        eig = d2 @ v.T + v.T * basis.lambdas**2
        u_inf = np.abs(v).max()
        worst = max(worst, np.abs(gram).max(), np.abs(comp).max(),
                    np.abs(eig).max() / u_inf)
    return ("basis orthonormality/completeness/eigen-relation", worst < 1e-12,
            f"max residual {worst:.2e}")


def check_derivative_identity() -> tuple[str, bool, str]:
    worst = 0.0
    for N in (2, 5, 16):
        spec = LatticeSpec(N=N, ell=2.0 + N)
        d1 = build_derivative(spec, 1).matrix
        d2 = build_derivative(spec, 2).matrix
        worst = max(worst, np.abs(d2 - d1 @ d1).max() / np.abs(d2).max())
    return ("second difference equals squared first difference", worst < 1e-14,
            f"max relative deviation {worst:.2e}")


def _classical_setup():
    spec = LatticeSpec(N=2, ell=4.0, c=1.1, beta=1.3)
    proto = MassProtocol.constant(0.8)
    ham = FreeFieldHamiltonian(spec=spec, protocol=proto)
    sched = CouplingSchedule.detailed_balance(0.4, ham)
    return spec, proto, ham, sched


def check_gibbs_fixed_point() -> tuple[str, bool, str]:
    spec, _, ham, sched = _classical_setup()
    star = stationary_covariance(spec, ham, sched, 0.0)
    gibbs = gibbs_covariance(spec, ham, 0.0)
    worst = max(np.abs(s - g).max() / np.abs(g).max() for s, g in zip(star, gibbs))
    return ("stationary covariance equals Gibbs covariance", worst < 1e-10,
            f"max relative deviation {worst:.2e}")


def check_equilibrium_rates() -> tuple[str, bool, str]:
    spec, _, ham, sched = _classical_setup()
    mom = gibbs_state(spec, ham, 0.0)
    q = abs(heat_rate_mean(mom, ham, sched, 0.0))
    p = abs(entropy_production(mom, ham, sched, 0.0))
    ok = q < 1e-12 and p < 1e-10
    return ("heat rate and entropy production vanish at equilibrium", ok,
            f"|heat rate| {q:.2e}, |production| {p:.2e}")


def check_detailed_balance_ratio() -> tuple[str, bool, str]:
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        om, beta, hbar, gphi = rng.uniform(0.1, 4.0, size=4)
        r = build_gksl_rates(gphi, om, beta, hbar)
        worst = max(worst, abs(r.gamma_minus / r.gamma_plus - np.exp(-beta * hbar * om)))
    return ("jump-rate ratio equals exp(-beta hbar omega)", worst < 1e-12,
            f"max deviation {worst:.2e}")


def check_cptp_boundary() -> tuple[str, bool, str]:
    gphi, om, c, hbar = 0.5, 1.3, 1.1, 0.9
    gpi = detailed_balance_gamma_pi(gphi, om, c)
    on = cptp_for_all_temperatures(gphi, gpi, om, hbar, c)
    off_hi = cptp_for_all_temperatures(gphi, 1.01 * gpi, om, hbar, c)
    off_lo = cptp_for_all_temperatures(gphi, 0.99 * gpi, om, hbar, c)
    ok = on and not off_hi and not off_lo
    return ("CPTP for all temperatures exactly on the detailed-balance line", ok,
            f"on-line {on}, +1% {off_hi}, -1% {off_lo}")


def check_generator_agreement() -> tuple[str, bool, str]:
    M, beta, om, c, hbar, gphi = 30, 1.1, 0.9, 1.2, 0.8, 0.45
    ops = build_mode_operators(M, om, hbar, c)
    rates = build_gksl_rates(gphi, om, beta, hbar, c)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(M + 1, M + 1)) + 1j * rng.normal(size=(M + 1, M + 1))
    rho = x @ x.conj().T
    rho[M - 4:, :] = 0.0
    rho[:, M - 4:] = 0.0
    rho /= np.trace(rho).real
    r1 = general_qme_rhs(rho, ops, gphi, detailed_balance_gamma_pi(gphi, om, c), beta, hbar)
    r2 = gksl_rhs(rho, ops, rates)
    blk = slice(0, M - 5)
    dev = np.linalg.norm((r1 - r2)[blk, blk]) / np.linalg.norm(r1[blk, blk])
    return ("sandwiched generator matches GKSL at detailed balance", dev < 1e-8,
            f"interior-block relative deviation {dev:.2e}")


def check_steady_state_occupation() -> tuple[str, bool, str]:
    beta, om, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(60, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    ss = steady_state(ops, rates)
    n = float(np.trace(ss.rho @ ops.number).real)
    dev = abs(n - 1.0 / (np.e - 1.0))
    return ("steady-state occupation is Bose-Einstein", dev < 1e-8,
            f"deviation {dev:.2e}")


def check_gibbs_stationarity_quantum() -> tuple[str, bool, str]:
    beta, om, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(45, om, hbar)
    rho = gibbs_density(ops, beta)
    r1 = np.linalg.norm(gksl_rhs(rho.rho, ops, build_gksl_rates(0.5, om, beta, hbar)))
    r2 = np.linalg.norm(general_qme_rhs(rho.rho, ops, 0.6, 0.9, beta, hbar))
    ok = r1 < 1e-10 and r2 < 1e-10
    return ("Gibbs state stationary under both generators", ok,
            f"GKSL residual {r1:.2e}, sandwiched residual {r2:.2e}")


ALL_CHECKS = [
    check_basis_algebra,
    check_derivative_identity,
    check_gibbs_fixed_point,
    check_equilibrium_rates,
    check_detailed_balance_ratio,
    check_cptp_boundary,
    check_generator_agreement,
    check_steady_state_occupation,
    check_gibbs_stationarity_quantum,
]


def run_all_checks() -> list[tuple[str, bool, str]]:
    return [fn() for fn in ALL_CHECKS]
