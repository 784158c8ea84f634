"""Exact Gaussian moment dynamics and classical thermodynamic functionals.

For the free field every mode group evolves as an independent linear
(Ornstein-Uhlenbeck) system, so the phase-space distribution stays Gaussian
and its moments obey the closed equations

    d mu / dt    = A(t) mu,
    d Sigma / dt = A Sigma + Sigma A^T + D,

the exact contraction of the phase-space transport equation.  Mode groups
("blocks") are the real degrees of freedom of the reality-constrained
field:

* self-conjugate modes (n = 0 and Nyquist): 2-dim blocks (phi, Pi) with
  weight w = dk;
* +-k pairs: 4-dim blocks (Re phi, Im phi, Re Pi, Im Pi) with weight
  w = 2*dk (each quadrature pair is a standard 2-dof Langevin system of
  doubled mode weight).

With block stiffness q = (omega^2/c^2, ..., c^2, ...) the block Hamiltonian
is H = (w/2) z^T diag(q) z, the drift is

    A = [[-gamma_phi * omega^2/c^2 * I,  c^2 * I],
         [-omega^2/c^2 * I,             -gamma_pi * c^2 * I]],

and the diffusion is D = (2/(w*beta)) diag(gamma_phi..., gamma_pi...).
The stationary solution of the Lyapunov equation coincides with the Gibbs
covariance of exp(-beta H), which pins the dk bookkeeping.

All entropic quantities are evaluated in this Gaussian sector; the
stochastic integrator of :mod:`fieldbath.classical_sde` provides the
Monte Carlo escape hatch beyond it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .classical_sde import CouplingSchedule, FreeFieldHamiltonian, MassProtocol
from .errors import NumericalError
from .lattice import LatticeSpec


@dataclass(frozen=True)
class ModeBlock:
    """One independent real degree-of-freedom group of the field."""

    label: str
    kabs: float
    lam: float
    dim: int      # 2 for self-conjugate modes, 4 for +-k pairs
    weight: float  # dk or 2*dk


def mode_blocks(spec: LatticeSpec) -> list[ModeBlock]:
    """Block layout: self-conjugate modes first (n=0, Nyquist), then pairs."""
    blocks = []
    for j in np.flatnonzero(spec.self_conjugate_mask):
        n = spec.mode_numbers[j]
        blocks.append(
            ModeBlock(label=f"n={n}", kabs=abs(spec.k_values[j]),
                      lam=abs(spec.lambdas[j]), dim=2, weight=spec.dk)
        )
    for n in range(1, spec.N):
        j = n + spec.N
        blocks.append(
            ModeBlock(label=f"n=+-{n}", kabs=abs(spec.k_values[j]),
                      lam=abs(spec.lambdas[j]), dim=4, weight=2 * spec.dk)
        )
    return blocks


@dataclass
class GaussianMomentState:
    """Per-block means and covariances of the Gaussian field distribution."""

    blocks: list[ModeBlock]
    means: list[np.ndarray]
    covs: list[np.ndarray]
    time: float = 0.0

    def copy(self) -> "GaussianMomentState":
        return GaussianMomentState(
            blocks=self.blocks,
            means=[m.copy() for m in self.means],
            covs=[c.copy() for c in self.covs],
            time=self.time,
        )


def _require_free_field(hamiltonian) -> FreeFieldHamiltonian:
    if getattr(hamiltonian, "kind", None) != "free-field":
        raise ValueError("moment dynamics and closed-form thermodynamics need the free-field Hamiltonian")
    return hamiltonian


def _block_coefficients(block: ModeBlock, hamiltonian: FreeFieldHamiltonian,
                        sched: CouplingSchedule, t: float):
    """Stiffness vector q, drift A, diffusion D, couplings for one block."""
    spec = hamiltonian.spec
    kabs = np.array([block.kabs])
    gphi = float(sched.rates(kabs, t)[0][0])
    gpi = float(sched.rates(kabs, t)[1][0])
    b = float(hamiltonian.protocol.b(kabs, t)[0])
    s = block.lam**2 + b**2          # omega^2/c^2
    c2 = spec.c**2
    half = block.dim // 2
    eye = np.eye(half)
    A = np.block([[-gphi * s * eye, c2 * eye], [-s * eye, -gpi * c2 * eye]])
    D = (2.0 / (block.weight * spec.beta)) * np.diag([gphi] * half + [gpi] * half)
    q = np.array([s] * half + [c2] * half)
    return q, A, D, gphi, gpi


def lyapunov_rhs(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                 t: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Time derivatives (d mean, d Sigma) of every block at time t."""
    hamiltonian = _require_free_field(hamiltonian)
    dmeans, dcovs = [], []
    for block, mu, sig in zip(mom.blocks, mom.means, mom.covs):
        _, A, D, _, _ = _block_coefficients(block, hamiltonian, sched, t)
        dmeans.append(A @ mu)
        dcovs.append(A @ sig + sig @ A.T + D)
    return dmeans, dcovs


def propagate_moments(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                      proto: MassProtocol, dt: float, steps: int) -> GaussianMomentState:
    """Classical RK4 on the moment equations; Sigma re-symmetrized each step.

    A covariance eigenvalue below -1e-12 * trace aborts; smaller negative
    eigenvalues are clamped to zero.
    """
    hamiltonian = _require_free_field(hamiltonian)
    state = mom.copy()
    for _ in range(steps):
        t = state.time
        k1 = lyapunov_rhs(state, hamiltonian, sched, t)
        s2 = _moment_axpy(state, k1, dt / 2)
        k2 = lyapunov_rhs(s2, hamiltonian, sched, t + dt / 2)
        s3 = _moment_axpy(state, k2, dt / 2)
        k3 = lyapunov_rhs(s3, hamiltonian, sched, t + dt / 2)
        s4 = _moment_axpy(state, k3, dt)
        k4 = lyapunov_rhs(s4, hamiltonian, sched, t + dt)
        for b in range(len(state.blocks)):
            state.means[b] = state.means[b] + dt / 6 * (
                k1[0][b] + 2 * k2[0][b] + 2 * k3[0][b] + k4[0][b]
            )
            sig = state.covs[b] + dt / 6 * (
                k1[1][b] + 2 * k2[1][b] + 2 * k3[1][b] + k4[1][b]
            )
            sig = 0.5 * (sig + sig.T)
            state.covs[b] = _repair_psd(sig)
        state.time = t + dt
    return state


def _moment_axpy(state: GaussianMomentState, deriv, h: float) -> GaussianMomentState:
    return GaussianMomentState(
        blocks=state.blocks,
        means=[m + h * d for m, d in zip(state.means, deriv[0])],
        covs=[c + h * d for c, d in zip(state.covs, deriv[1])],
        time=state.time + h,
    )


def _repair_psd(sig: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sig)
    floor = -1e-12 * max(np.trace(sig), 1e-300)
    if np.any(vals < floor):
        raise NumericalError(
            f"covariance lost positivity: min eigenvalue {vals.min():.3e}"
        )
    if np.any(vals < 0):
        vals = np.clip(vals, 0.0, None)
        sig = (vecs * vals) @ vecs.T
        sig = 0.5 * (sig + sig.T)
    return sig


def gibbs_covariance(spec: LatticeSpec, hamiltonian, t: float) -> list[np.ndarray]:
    """Per-block covariance of exp(-beta H) with the mass frozen at time t.

    Diagonal with Var = c^2/(beta*w*omega^2) on field coordinates and
    1/(beta*w*c^2) on conjugate coordinates.
    """
    hamiltonian = _require_free_field(hamiltonian)
    out = []
    for block in mode_blocks(spec):
        q, _, _, _, _ = _block_coefficients(block, hamiltonian, CouplingSchedule.constant(0, 0), t)
        out.append(np.diag(1.0 / (spec.beta * block.weight * q)))
    return out


def gibbs_state(spec: LatticeSpec, hamiltonian, t: float,
                scale: float = 1.0) -> GaussianMomentState:
    """Zero-mean Gaussian state with covariance = scale x Gibbs covariance."""
    blocks = mode_blocks(spec)
    covs = [scale * c for c in gibbs_covariance(spec, hamiltonian, t)]
    return GaussianMomentState(
        blocks=blocks,
        means=[np.zeros(b.dim) for b in blocks],
        covs=covs,
        time=t,
    )


def stationary_covariance(spec: LatticeSpec, hamiltonian, sched: CouplingSchedule,
                          t: float) -> list[np.ndarray]:
    """Per-block solution of A Sigma + Sigma A^T + D = 0 (couplings frozen at t)."""
    hamiltonian = _require_free_field(hamiltonian)
    out = []
    for block in mode_blocks(spec):
        _, A, D, gphi, gpi = _block_coefficients(block, hamiltonian, sched, t)
        if gphi == 0.0 and gpi == 0.0:
            raise ValueError("no stationary covariance without thermostat coupling")
        out.append(solve_continuous_lyapunov(A, -D))
    return out


def mean_energy(mom: GaussianMomentState, hamiltonian, t: float) -> float:
    """E[H] = sum_blocks (w/2) [tr(diag(q) Sigma) + mu^T diag(q) mu]."""
    hamiltonian = _require_free_field(hamiltonian)
    total = 0.0
    for block, mu, sig in zip(mom.blocks, mom.means, mom.covs):
        q, _, _, _, _ = _block_coefficients(block, hamiltonian,
                                            CouplingSchedule.constant(0, 0), t)
        total += 0.5 * block.weight * float(q @ (np.diag(sig) + mu**2))
    return total


def entropy_gaussian(mom: GaussianMomentState, kB: float = 1.0) -> float:
    """Differential entropy S = (kB/2) sum_blocks ln det(2 pi e Sigma)."""
    total = 0.0
    for sig in mom.covs:
        sign, logdet = np.linalg.slogdet(2.0 * np.pi * np.e * sig)
        if sign <= 0:
            raise ValueError("covariance must be positive definite for the entropy")
        total += 0.5 * logdet
    return kB * total


def entropy_rate(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                 t: float, kB: float = 1.0) -> float:
    """dS/dt = (kB/2) sum_blocks tr(Sigma^{-1} dSigma/dt)."""
    _, dcovs = lyapunov_rhs(mom, hamiltonian, sched, t)
    total = 0.0
    for sig, dsig in zip(mom.covs, dcovs):
        total += 0.5 * float(np.trace(np.linalg.solve(sig, dsig)))
    return kB * total


def heat_rate_mean(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                   t: float) -> float:
    """Mean heat flow E[dQ]/dt in closed Gaussian form.

    Per block: sum over coordinates of
    -(gamma/w) E[(dH/dz)^2] + (gamma/(w*beta)) d2H/dz2, i.e. the friction
    dissipation against the noise reinjection; zero exactly at the Gibbs
    covariance.
    """
    hamiltonian = _require_free_field(hamiltonian)
    spec = hamiltonian.spec
    total = 0.0
    for block, mu, sig in zip(mom.blocks, mom.means, mom.covs):
        q, _, _, gphi, gpi = _block_coefficients(block, hamiltonian, sched, t)
        half = block.dim // 2
        gamma = np.array([gphi] * half + [gpi] * half)
        second_moment = np.diag(sig) + mu**2
        total += float(
            np.sum(-block.weight * gamma * q**2 * second_moment + gamma * q / spec.beta)
        )
    return total


def entropy_production(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                       t: float, kB: float = 1.0) -> float:
    """Irreversible entropy production dS/dt - (1/T) E[dQ]/dt >= 0.

    Evaluates, per block and coordinate, the Gaussian expectation of

        (kB*beta*gamma/w) * (dH/dz + (1/beta) d ln rho/dz)^2,

    a sum of quadratic forms in the covariance, hence non-negative and
    vanishing exactly at the Gibbs state.
    """
    hamiltonian = _require_free_field(hamiltonian)
    beta = hamiltonian.spec.beta
    total = 0.0
    for block, mu, sig in zip(mom.blocks, mom.means, mom.covs):
        q, _, _, gphi, gpi = _block_coefficients(block, hamiltonian, sched, t)
        half = block.dim // 2
        gamma = np.array([gphi] * half + [gpi] * half)
        siginv = np.linalg.inv(sig)
        w = block.weight
        for mu_i in range(block.dim):
            if gamma[mu_i] == 0.0:
                continue
            v = -siginv[mu_i] / beta
            v = v.copy()
            v[mu_i] += w * q[mu_i]
            s_const = w * q[mu_i] * mu[mu_i]
            expect = float(v @ sig @ v) + s_const**2
            total += (kB * beta * gamma[mu_i] / w) * expect
    return total


@dataclass(frozen=True)
class EntropyRecord:
    """One instant of the classical entropy balance.

    production_rate = dS_dt - heat_rate / T up to rounding, and is
    non-negative down to the -1e-10 numerical floor.
    """

    t: float
    S_ST: float
    dS_dt: float
    heat_rate: float
    production_rate: float


def entropy_record(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                   t: float, kB: float = 1.0) -> EntropyRecord:
    return EntropyRecord(
        t=t,
        S_ST=entropy_gaussian(mom, kB=kB),
        dS_dt=entropy_rate(mom, hamiltonian, sched, t, kB=kB),
        heat_rate=heat_rate_mean(mom, hamiltonian, sched, t),
        production_rate=entropy_production(mom, hamiltonian, sched, t, kB=kB),
    )


def _dH_dt_expectation(mom_covs, mom_means, blocks, hamiltonian, t: float) -> float:
    """E[dH/dt] under given block moments (mass-schedule drive only)."""
    total = 0.0
    for block, mu, sig in zip(blocks, mom_means, mom_covs):
        kabs = np.array([block.kabs])
        b = float(hamiltonian.protocol.b(kabs, t)[0])
        bdot = float(hamiltonian.protocol.db_dt(kabs, t)[0])
        half = block.dim // 2
        dq = np.array([2 * b * bdot] * half + [0.0] * half)
        total += 0.5 * block.weight * float(dq @ (np.diag(sig) + mu**2))
    return total


def kl_divergence(mom: GaussianMomentState, hamiltonian, sched: CouplingSchedule,
                  proto: MassProtocol, t: float) -> tuple[float, float, float]:
    """Kullback-Leibler divergence against the time-local Gibbs state.

    Returns (S_KL, dS_KL/dt, drive_term) in nats.  The time derivative is

        dS_KL/dt = -(production)/kB + drive_term,

    where drive_term = -E_rho[d ln rho*/dt] is the schedule-driven piece
    that vanishes for a frozen Hamiltonian (then -dS_KL/dt equals the
    entropy production and S_KL is a Lyapunov function of the relaxation).
    """
    hamiltonian = _require_free_field(hamiltonian)
    spec = hamiltonian.spec
    star_covs = gibbs_covariance(spec, hamiltonian, t)

    s_kl = 0.0
    for sig, star, mu in zip(mom.covs, star_covs, mom.means):
        d = sig.shape[0]
        star_inv = np.linalg.inv(star)
        sign, logdet = np.linalg.slogdet(sig @ star_inv)
        if sign <= 0:
            raise ValueError("singular covariance in KL evaluation")
        s_kl += 0.5 * (np.trace(star_inv @ sig) - d - logdet + float(mu @ star_inv @ mu))

    production_nats = entropy_production(mom, hamiltonian, sched, t, kB=1.0)

    # -E_rho[d/dt ln rho*] = beta E_rho[dH/dt] - beta E_rho*[dH/dt]
    blocks = mom.blocks
    e_rho = _dH_dt_expectation(mom.covs, mom.means, blocks, hamiltonian, t)
    zero_means = [np.zeros(b.dim) for b in blocks]
    e_star = _dH_dt_expectation(star_covs, zero_means, blocks, hamiltonian, t)
    drive_term = spec.beta * (e_rho - e_star)

    return float(s_kl), float(-production_nats + drive_term), float(drive_term)
