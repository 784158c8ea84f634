"""Per-mode quantum master equations on truncated Fock spaces.

Canonical quantization of the thermostatted field model gives, for each
mode, the sandwiched double-commutator generator

    d rho/dt = (i/hbar) [rho, H]
      - (gamma_phi/(beta hbar^2)) [e^{-bH/2} [e^{bH/2} rho e^{bH/2}, Pi] e^{-bH/2}, Pi]
      - (gamma_pi /(beta hbar^2)) [e^{-bH/2} [e^{bH/2} rho e^{bH/2}, phi] e^{-bH/2}, phi]

(b = beta), which annihilates the Gibbs state exp(-beta H)/Z exactly for
*any* couplings, but is a CPTP generator only when the 2x2 dissipator
matrix L(t) of its quadratic rewriting has positive semidefinite Hermitian
part L + L^dag.  Demanding positivity at every temperature singles out
gamma_pi = (omega^2/c^4) gamma_phi, where the generator reduces to the
GKSL form with jump operators a, a^dag and detailed-balance rates
gamma_-/gamma_+ = exp(-beta hbar omega).

Mode convention: each lattice mode carries one oscillator.  The per-mode
quadratures absorb the mode-measure factor sqrt(dk),

    phi = sqrt(hbar c^2/(2 omega)) (a + a^dag),
    Pi  = -(i/c) sqrt(hbar omega/2) (a - a^dag),

so [phi, Pi] = i hbar and H = c^2 Pi^2/2 + (omega^2/c^2) phi^2/2
= hbar omega (a^dag a + 1/2); the generator above is then independent of
dk, and multi-mode states are products of per-mode density matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import spsolve

from .errors import NumericalError


@dataclass(frozen=True)
class ModeOperators:
    """Truncated ladder and quadrature matrices for one mode."""

    a: np.ndarray
    adag: np.ndarray
    number: np.ndarray
    H_mode: np.ndarray
    phi: np.ndarray
    pi: np.ndarray
    hbar: float
    omega: float
    c: float
    dim: int


def build_mode_operators(M: int, omega: float, hbar: float, c: float = 1.0) -> ModeOperators:
    """Standard truncated ladder matrices plus the reconstructed quadratures.

    The quadratures invert a = sqrt(c^2/(2 hbar omega)) ((omega/c^2) phi + i Pi)
    and satisfy [phi, Pi] = i hbar away from the truncation corner.
    """
    if M < 2:
        raise ValueError(f"Fock truncation M must be >= 2, got {M}")
    if omega <= 0 or hbar <= 0 or c <= 0:
        raise ValueError("omega, hbar, c must be positive")
    d = M + 1
    a = np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)
    adag = a.conj().T
    number = adag @ a
    phi = np.sqrt(hbar * c**2 / (2.0 * omega)) * (a + adag)
    pi = -1j / c * np.sqrt(hbar * omega / 2.0) * (a - adag)
    H = hbar * omega * (number + 0.5 * np.eye(d))
    return ModeOperators(a=a, adag=adag, number=number, H_mode=H, phi=phi, pi=pi,
                         hbar=hbar, omega=omega, c=c, dim=d)


def instantaneous_ladder(ops: ModeOperators, omega_t: float) -> np.ndarray:
    """Annihilation operator diagonalizing H at frequency omega_t.

    Bogoliubov mixture of the reference ladder operators; reduces to
    ``ops.a`` when omega_t equals the reference frequency.
    """
    return np.sqrt(ops.c**2 / (2.0 * ops.hbar * omega_t)) * (
        omega_t / ops.c**2 * ops.phi + 1j * ops.pi
    )


def hamiltonian_at(ops: ModeOperators, omega_t: float) -> np.ndarray:
    """H(t) = c^2 Pi^2/2 + (omega_t^2/(2 c^2)) phi^2 in the fixed basis."""
    return 0.5 * ops.c**2 * (ops.pi @ ops.pi) + \
        0.5 * omega_t**2 / ops.c**2 * (ops.phi @ ops.phi)


@dataclass(frozen=True)
class DissipatorSpec:
    """The 2x2 dissipator matrix of the quadratic rewriting and its verdict.

    cptp is true iff both eigenvalues of L_H = L + L^dag are non-negative
    (to a -1e-14 * ||L_H|| floor); for a 2x2 Hermitian matrix with
    non-negative trace this is det(L_H) >= 0.
    """

    L: np.ndarray
    L_H: np.ndarray
    eigenvalues: np.ndarray
    det_LH: float
    cptp: bool


def build_L_matrix(gamma_phi: float, gamma_pi: float, omega: float, beta: float,
                   hbar: float, c: float = 1.0) -> DissipatorSpec:
    """Dissipator matrix in the (phi, Pi) operator basis.

    L = hbar * [[gamma_pi/(beta hbar^2) cosh T,  -i gamma_pi c^2/(beta hbar^2 omega) sinh T],
                [i gamma_phi omega/(beta hbar^2 c^2) sinh T,  gamma_phi/(beta hbar^2) cosh T]]

    with T = beta hbar omega / 2.
    """
    if omega <= 0 or beta <= 0 or hbar <= 0 or c <= 0:
        raise ValueError("omega, beta, hbar, c must be positive")
    if gamma_phi < 0 or gamma_pi < 0:
        raise ValueError("couplings must be non-negative")
    theta = 0.5 * beta * hbar * omega
    ch, sh = np.cosh(theta), np.sinh(theta)
    L = hbar * np.array(
        [
            [gamma_pi / (beta * hbar**2) * ch,
             -1j * gamma_pi * c**2 / (beta * hbar**2 * omega) * sh],
            [1j * gamma_phi * omega / (beta * hbar**2 * c**2) * sh,
             gamma_phi / (beta * hbar**2) * ch],
        ]
    )
    L_H = L + L.conj().T
    eig = np.linalg.eigvalsh(L_H)
    det = float(np.real(L_H[0, 0] * L_H[1, 1] - L_H[0, 1] * L_H[1, 0]))
    norm = float(np.linalg.norm(L_H))
    cptp = bool(np.all(eig >= -1e-14 * max(norm, 1e-300)))
    return DissipatorSpec(L=L, L_H=L_H, eigenvalues=eig, det_LH=det, cptp=cptp)


def detailed_balance_gamma_pi(gamma_phi: float, omega: float, c: float = 1.0) -> float:
    """The momentum-equation coupling that makes the evolution CPTP at all
    temperatures: gamma_pi = (omega^2/c^4) gamma_phi."""
    if gamma_phi < 0 or omega <= 0 or c <= 0:
        raise ValueError("gamma_phi must be >= 0 and omega, c > 0")
    return omega**2 / c**4 * gamma_phi


def cptp_for_all_temperatures(gamma_phi: float, gamma_pi: float, omega: float,
                              hbar: float, c: float = 1.0,
                              beta_hbar_omega_grid: np.ndarray | None = None) -> bool:
    """Scan the dimensionless temperature axis for a dissipator-matrix failure.

    True iff L_H stays positive semidefinite over the whole grid
    (default beta*hbar*omega in [0.01, 20]); this is the criterion that
    pins the detailed-balance line exactly.
    """
    if beta_hbar_omega_grid is None:
        beta_hbar_omega_grid = np.geomspace(0.01, 20.0, 64)
    for x in beta_hbar_omega_grid:
        beta = float(x) / (hbar * omega)
        if not build_L_matrix(gamma_phi, gamma_pi, omega, beta, hbar, c).cptp:
            return False
    return True


@dataclass(frozen=True)
class GKSLRates:
    """Downward/upward jump rates; gamma_minus/gamma_plus = exp(-beta hbar omega)."""

    gamma_plus: float
    gamma_minus: float


def build_gksl_rates(gamma_phi: float, omega: float, beta: float, hbar: float,
                     c: float = 1.0) -> GKSLRates:
    """Jump rates of the detailed-balance reduction.

    gamma_+- = (2 gamma_phi/(beta hbar)) (hbar omega/c^2) exp(+- beta hbar omega/2);
    the prefactor is fixed by requiring that the GKSL generator coincide
    with the sandwiched master equation at the detailed-balance tuning and
    that the hbar -> 0 energy relaxation rate match the classical
    2 gamma_phi omega^2/c^2.
    """
    if gamma_phi < 0 or omega <= 0 or beta <= 0 or hbar <= 0 or c <= 0:
        raise ValueError("invalid rate parameters")
    theta = 0.5 * beta * hbar * omega
    base = 2.0 * gamma_phi * omega / (beta * c**2)
    return GKSLRates(gamma_plus=base * np.exp(theta), gamma_minus=base * np.exp(-theta))


@dataclass
class FockDensityMatrix:
    """Truncated number-basis density matrix for one mode."""

    rho: np.ndarray
    omega: float
    k: float = 0.0

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def validate(self, trace_tol: float = 1e-10, herm_tol: float = 1e-12,
                 eig_floor: float = -1e-10) -> None:
        tr = np.trace(self.rho)
        if abs(tr - 1.0) > trace_tol:
            raise NumericalError(f"trace drifted to {tr:.12g}")
        if np.linalg.norm(self.rho - self.rho.conj().T) > herm_tol * max(1.0, np.linalg.norm(self.rho)):
            raise NumericalError("density matrix lost Hermiticity")
        if np.linalg.eigvalsh(self.rho).min() < eig_floor:
            raise NumericalError("density matrix lost positivity")

    def copy(self) -> "FockDensityMatrix":
        return FockDensityMatrix(rho=self.rho.copy(), omega=self.omega, k=self.k)


def gibbs_density(ops: ModeOperators, beta: float, omega: float | None = None) -> FockDensityMatrix:
    """Truncated thermal state exp(-beta H)/Z at the given frequency."""
    om = ops.omega if omega is None else omega
    levels = np.arange(ops.dim)
    w = np.exp(-beta * ops.hbar * om * levels)
    return FockDensityMatrix(rho=np.diag(w / w.sum()).astype(complex), omega=om)


def gksl_rhs(rho: np.ndarray, ops: ModeOperators, rates: GKSLRates,
             a: np.ndarray | None = None, H: np.ndarray | None = None) -> np.ndarray:
    """GKSL generator with jumps L_+ = a (rate gamma_+) and L_- = a^dag.

    Passing ``a``/``H`` overrides the reference operators (used for
    time-dependent frequencies).  The output is Hermitian and traceless.
    """
    if rho.shape != (ops.dim, ops.dim):
        raise ValueError(f"state dimension {rho.shape} != {(ops.dim, ops.dim)}")
    a_op = ops.a if a is None else a
    H_op = ops.H_mode if H is None else H
    out = 1j / ops.hbar * (rho @ H_op - H_op @ rho)
    for L, g in ((a_op, rates.gamma_plus), (a_op.conj().T, rates.gamma_minus)):
        Ld = L.conj().T
        LdL = Ld @ L
        out -= g / (2.0 * ops.hbar) * (LdL @ rho + rho @ LdL - 2.0 * L @ rho @ Ld)
    return out


def _thermal_shift(X: np.ndarray, hdiag: np.ndarray, s: float, beta: float) -> np.ndarray:
    """e^{s beta H/2} X e^{-s beta H/2} for diagonal H, computed elementwise."""
    f = np.exp(0.5 * s * beta * (hdiag[:, None] - hdiag[None, :]))
    return f * X


def general_qme_rhs(rho: np.ndarray, ops: ModeOperators, gamma_phi: float,
                    gamma_pi: float, beta: float, hbar: float) -> np.ndarray:
    """Sandwiched double-commutator generator for one mode.

    Valid for the free-field mode Hamiltonian (diagonal in the number
    basis); the thermal sandwiches with the tridiagonal quadratures are
    evaluated elementwise, which keeps the arithmetic stable at any beta.
    Annihilates the Gibbs state exactly for any non-negative couplings and
    agrees with :func:`gksl_rhs` at the detailed-balance tuning.
    """
    if rho.shape != (ops.dim, ops.dim):
        raise ValueError(f"state dimension {rho.shape} != {(ops.dim, ops.dim)}")
    if hbar <= 0:
        raise ValueError("the quantized generator needs hbar > 0")
    hdiag = np.real(np.diag(ops.H_mode))
    if np.linalg.norm(ops.H_mode - np.diag(np.diag(ops.H_mode))) > 1e-12 * np.linalg.norm(ops.H_mode):
        raise ValueError("general_qme_rhs requires the diagonal free-field mode Hamiltonian")
    out = 1j / hbar * (rho @ ops.H_mode - ops.H_mode @ rho)
    for B, g in ((ops.pi, gamma_phi), (ops.phi, gamma_pi)):
        if g == 0.0:
            continue
        BR = _thermal_shift(B, hdiag, +1.0, beta)
        BL = _thermal_shift(B, hdiag, -1.0, beta)
        inner = rho @ BR - BL @ rho
        out -= g / (beta * hbar**2) * (inner @ B - B @ inner)
    return out


@dataclass(frozen=True)
class GKSLGenerator:
    """Frozen-parameter GKSL generator."""

    ops: ModeOperators
    rates: GKSLRates

    def rhs(self, rho: np.ndarray, t: float) -> np.ndarray:
        return gksl_rhs(rho, self.ops, self.rates)


@dataclass(frozen=True)
class GeneralQMEGenerator:
    """Frozen-parameter sandwiched master-equation generator."""

    ops: ModeOperators
    gamma_phi: float
    gamma_pi: float
    beta: float

    def rhs(self, rho: np.ndarray, t: float) -> np.ndarray:
        return general_qme_rhs(rho, self.ops, self.gamma_phi, self.gamma_pi,
                               self.beta, self.ops.hbar)


@dataclass
class EvolutionRecord:
    """Snapshots of a density-matrix evolution."""

    times: np.ndarray
    states: list
    trace_drift: float


def evolve(rho0: FockDensityMatrix, generator, dt: float, steps: int,
           snapshot_stride: int = 1, trace_tol: float = 1e-6) -> EvolutionRecord:
    """RK4 integration of d rho/dt = generator.rhs(rho, t).

    Hermiticity is re-symmetrized every step; the trace is *not*
    renormalized -- its drift is a measured diagnostic and aborts beyond
    ``trace_tol``.
    """
    if dt <= 0 or steps < 0:
        raise ValueError("need dt > 0 and steps >= 0")
    rho = rho0.rho.astype(complex).copy()
    t = 0.0
    times = [0.0]
    states = [FockDensityMatrix(rho=rho.copy(), omega=rho0.omega, k=rho0.k)]
    worst_drift = abs(np.trace(rho).real - 1.0)
    for step in range(steps):
        k1 = generator.rhs(rho, t)
        k2 = generator.rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = generator.rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = generator.rhs(rho + dt * k3, t + dt)
        rho = rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        t += dt
        drift = abs(np.trace(rho).real - 1.0)
        worst_drift = max(worst_drift, drift)
        if drift > trace_tol:
            raise NumericalError(f"trace drift {drift:.3e} at t={t:.6g} exceeds {trace_tol:g}")
        if not np.all(np.isfinite(rho)):
            raise NumericalError(f"non-finite density matrix at t={t:.6g}")
        if (step + 1) % snapshot_stride == 0 or step + 1 == steps:
            times.append(t)
            states.append(FockDensityMatrix(rho=rho.copy(), omega=rho0.omega, k=rho0.k))
    return EvolutionRecord(times=np.array(times), states=states, trace_drift=worst_drift)


def liouvillian_matrix(generator) -> np.ndarray:
    """Dense matrix of the generator acting on row-major vectorized states."""
    d = generator.ops.dim
    eye = np.eye(d, dtype=complex)

    def right(B):  # rho @ B
        return np.kron(eye, B.T)

    def left(B):  # B @ rho
        return np.kron(B, eye)

    if isinstance(generator, GKSLGenerator):
        ops, rates = generator.ops, generator.rates
        H = ops.H_mode
        L = 1j / ops.hbar * (right(H) - left(H))
        for J, g in ((ops.a, rates.gamma_plus), (ops.adag, rates.gamma_minus)):
            Jd = J.conj().T
            JdJ = Jd @ J
            L -= g / (2.0 * ops.hbar) * (left(JdJ) + right(JdJ) - 2.0 * np.kron(J, Jd.T))
        return L
    if isinstance(generator, GeneralQMEGenerator):
        ops = generator.ops
        hdiag = np.real(np.diag(ops.H_mode))
        L = 1j / ops.hbar * (right(ops.H_mode) - left(ops.H_mode))
        for B, g in ((ops.pi, generator.gamma_phi), (ops.phi, generator.gamma_pi)):
            if g == 0.0:
                continue
            BR = _thermal_shift(B, hdiag, +1.0, generator.beta)
            BL = _thermal_shift(B, hdiag, -1.0, generator.beta)
            inner = right(BR) - left(BL)
            L -= g / (generator.beta * ops.hbar**2) * (right(B) - left(B)) @ inner
        return L
    raise TypeError(f"no Liouvillian construction for {type(generator).__name__}")


def propagate_expm(rho0: FockDensityMatrix, generator, t: float) -> FockDensityMatrix:
    """Exact exponential propagator for time-frozen generators."""
    L = liouvillian_matrix(generator)
    vec = expm(L * t) @ rho0.rho.reshape(-1)
    rho = vec.reshape(rho0.rho.shape)
    rho = 0.5 * (rho + rho.conj().T)
    return FockDensityMatrix(rho=rho, omega=rho0.omega, k=rho0.k)


def steady_state(ops: ModeOperators, rates: GKSLRates) -> FockDensityMatrix:
    """Normalized null vector of the vectorized GKSL generator.

    Solves the sparse bordered system (generator with one row replaced by
    the trace functional); a degenerate null space leaves a residual that
    is reported as an error.
    """
    if not (rates.gamma_plus > rates.gamma_minus > 0):
        raise ValueError("steady state requires gamma_plus > gamma_minus > 0")
    d = ops.dim
    a = sp.csr_matrix(ops.a)
    ad = sp.csr_matrix(ops.adag)
    eye = sp.identity(d, format="csr", dtype=complex)
    H = sp.csr_matrix(ops.H_mode)
    L = 1j / ops.hbar * (sp.kron(eye, H.T) - sp.kron(H, eye))
    for J, g in ((a, rates.gamma_plus), (ad, rates.gamma_minus)):
        Jd = J.conj().T
        JdJ = Jd @ J
        L = L - g / (2.0 * ops.hbar) * (
            sp.kron(JdJ, eye) + sp.kron(eye, JdJ.T) - 2.0 * sp.kron(J, Jd.T)
        )
    L = L.tolil()
    trace_cols = np.arange(d) * (d + 1)
    L[0, :] = 0.0
    L[0, trace_cols] = 1.0
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    vec = spsolve(L.tocsc(), rhs)
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    gen = GKSLGenerator(ops=ops, rates=rates)
    resid = np.linalg.norm(gen.rhs(rho, 0.0))
    scale = rates.gamma_plus / ops.hbar
    if not np.isfinite(resid) or resid > 1e-8 * max(scale, 1.0):
        raise NumericalError(f"degenerate or ill-conditioned null space (residual {resid:.3e})")
    return FockDensityMatrix(rho=rho, omega=ops.omega)


def steady_state_populations(rates: GKSLRates, hbar: float, M: int) -> np.ndarray:
    """Null vector of the population (birth-death) sector of the GKSL chain.

    The GKSL generator preserves diagonality, and on populations it is the
    tridiagonal chain  dP_n/dt = (1/hbar) [ gamma_+ ((n+1) P_{n+1} - n P_n)
    + gamma_- (n P_{n-1} - (n+1) P_n) ]; its stationary distribution obeys
    P_{n+1}/P_n = gamma_-/gamma_+ and is computed here by the recurrence,
    which scales to truncations far beyond dense solvers.
    """
    r = rates.gamma_minus / rates.gamma_plus
    if not 0 < r < 1:
        raise ValueError("populations need 0 < gamma_minus/gamma_plus < 1")
    p = r ** np.arange(M + 1)
    return p / p.sum()


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """(1/2) ||rho_a - rho_b||_1."""
    vals = np.linalg.eigvalsh(rho_a - rho_b)
    return 0.5 * float(np.sum(np.abs(vals)))
