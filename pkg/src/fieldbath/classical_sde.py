"""Mode-space Langevin dynamics of the thermostatted scalar field.

Each mode amplitude pair (phi, Pi) follows the coupled stochastic equations

    d phi(k) = dt/dk * [ dH/dPi(-k) - gamma_phi * dH/dphi(-k) ]
               + sqrt(2*gamma_phi/(dk*beta)) dB_phi(k),
    d Pi(k)  = -dt/dk * [ dH/dphi(-k) + gamma_pi * dH/dPi(-k) ]
               + sqrt(2*gamma_pi/(dk*beta)) dB_pi(k),

where the thermostat couples to *both* equations (gamma_phi modifies the
velocity/momentum relation; gamma_phi = 0 is the standard Brownian limit).
The complex mode noises satisfy E[dB(k_n) dB(-k_m)] = dt delta_nm, carry
the reality pairing dB(-k) = conj(dB(k)), and the phi/Pi streams are
independent.

Heat is the work done by the thermostat forces, accumulated per step with
midpoint (Stratonovich) evaluation of all state-dependent factors; work is
the response to the external mass schedule b_t(k).  The two together close
the per-trajectory first law dH = dQ + dW up to the integrator residual.

Integration is Euler-Maruyama: the noise is additive, so the Ito and
Stratonovich state dynamics coincide and only the heat functional needs
the midpoint rule.  The reality constraint is re-imposed by projection
after every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError
from .lattice import LatticeSpec, project_reality, reality_defect

ScheduleFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class CouplingSchedule:
    """Thermostat couplings gamma_phi(|k|, t) and gamma_pi(|k|, t).

    Both must evaluate to non-negative values for every queried (|k|, t);
    zero is allowed (the corresponding noise amplitude is exactly zero).
    """

    gamma_phi: ScheduleFn
    gamma_pi: ScheduleFn

    def rates(self, kabs: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        gphi = np.broadcast_to(np.asarray(self.gamma_phi(kabs, t), dtype=float), kabs.shape).copy()
        gpi = np.broadcast_to(np.asarray(self.gamma_pi(kabs, t), dtype=float), kabs.shape).copy()
        if np.any(gphi < 0) or np.any(gpi < 0):
            raise ValueError("thermostat couplings must be non-negative")
        return gphi, gpi

    @classmethod
    def constant(cls, gamma_phi: float, gamma_pi: float) -> "CouplingSchedule":
        return cls(
            gamma_phi=lambda kabs, t: np.full_like(kabs, float(gamma_phi)),
            gamma_pi=lambda kabs, t: np.full_like(kabs, float(gamma_pi)),
        )

    @classmethod
    def detailed_balance(cls, gamma_phi: ScheduleFn | float,
                         hamiltonian: "FreeFieldHamiltonian") -> "CouplingSchedule":
        """gamma_pi = (omega_t(k)^2/c^4) * gamma_phi, the CPTP-compatible tuning."""
        if not callable(gamma_phi):
            g0 = float(gamma_phi)
            gamma_phi = lambda kabs, t: np.full_like(kabs, g0)  # noqa: E731

        def gamma_pi(kabs, t):
            om2 = hamiltonian.omega_of_kabs(kabs, t) ** 2
            return om2 / hamiltonian.spec.c**4 * np.asarray(gamma_phi(kabs, t), dtype=float)

        return cls(gamma_phi=gamma_phi, gamma_pi=gamma_pi)


@dataclass(frozen=True)
class MassProtocol:
    """Externally prescribed mass schedule b(k, t), optionally frozen at tau.

    ``fn(kabs, t)`` returns the schedule value (scalar or per-mode array);
    ``dfn`` is its analytic time derivative when available, otherwise a
    central difference is used.  For t >= tau the schedule is clamped to
    its value at tau.
    """

    fn: ScheduleFn
    tau: float | None = None
    dfn: ScheduleFn | None = None

    def _clamp(self, t: float) -> float:
        if self.tau is not None and t > self.tau:
            return self.tau
        return t

    def b(self, kabs: np.ndarray, t: float) -> np.ndarray:
        val = np.asarray(self.fn(kabs, self._clamp(t)), dtype=float)
        return np.broadcast_to(val, np.shape(kabs)).copy()

    def db_dt(self, kabs: np.ndarray, t: float, h: float = 1e-6) -> np.ndarray:
        if self.tau is not None and t >= self.tau:
            return np.zeros_like(np.asarray(kabs, dtype=float))
        if self.dfn is not None:
            val = np.asarray(self.dfn(kabs, t), dtype=float)
            return np.broadcast_to(val, np.shape(kabs)).copy()
        return (self.b(kabs, t + h) - self.b(kabs, t - h)) / (2 * h)

    @classmethod
    def constant(cls, b0: float) -> "MassProtocol":
        return cls(fn=lambda kabs, t: np.full_like(kabs, float(b0)),
                   dfn=lambda kabs, t: np.zeros_like(kabs))

    @classmethod
    def linear_ramp(cls, b0: float, b1: float, t0: float, t1: float,
                    tau: float | None = None) -> "MassProtocol":
        if tau is None:
            tau = t1

        def fn(kabs, t):
            s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
            return np.full_like(kabs, b0 + (b1 - b0) * s)

        def dfn(kabs, t):
            inside = (t0 < t) and (t < t1)
            return np.full_like(kabs, (b1 - b0) / (t1 - t0) if inside else 0.0)

        return cls(fn=fn, tau=tau, dfn=dfn)

    @classmethod
    def smooth_ramp(cls, b0: float, b1: float, t0: float, t1: float,
                    tau: float | None = None) -> "MassProtocol":
        """Cosine-eased ramp, C^1 at both ends."""
        if tau is None:
            tau = t1

        def fn(kabs, t):
            s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
            ease = 0.5 * (1.0 - np.cos(np.pi * s))
            return np.full_like(kabs, b0 + (b1 - b0) * ease)

        def dfn(kabs, t):
            if t <= t0 or t >= t1:
                return np.zeros_like(kabs)
            s = (t - t0) / (t1 - t0)
            return np.full_like(kabs, (b1 - b0) * 0.5 * np.pi * np.sin(np.pi * s) / (t1 - t0))

        return cls(fn=fn, tau=tau, dfn=dfn)

    @classmethod
    def quench(cls, b0: float, b1: float, t_quench: float) -> "MassProtocol":
        return cls(
            fn=lambda kabs, t: np.full_like(kabs, b1 if t >= t_quench else b0),
            tau=t_quench,
            dfn=lambda kabs, t: np.zeros_like(kabs),
        )


@dataclass(frozen=True)
class FreeFieldHamiltonian:
    """Discrete free-field Hamiltonian with a scheduled mass term.

    H = dk * sum_n [ c^2/2 |Pi(k_n)|^2 + (lambda_n^2 + b_t(k_n)^2)/2 |phi(k_n)|^2 ]

    The mode gradients use the convention that the functional derivative
    delta/delta phi(k) is realized as (1/dk) d/d phi(k_n); all heat, work,
    and moment formulas in the package share this normalization, and the
    Gibbs-consistency checks pin it end to end.
    """

    spec: LatticeSpec
    protocol: MassProtocol

    kind = "free-field"

    def omega_of_kabs(self, kabs: np.ndarray, t: float) -> np.ndarray:
        lam = np.sin(kabs * self.spec.dx) / self.spec.dx
        return self.spec.c * np.sqrt(lam**2 + self.protocol.b(kabs, t) ** 2)

    def omega(self, t: float) -> np.ndarray:
        """Per-mode dispersion omega_t(k) = c*sqrt(lambda_k^2 + b_t^2)."""
        return self.omega_of_kabs(self.spec.kabs, t)

    def stiffness(self, t: float) -> np.ndarray:
        """omega^2/c^2 = lambda^2 + b_t^2 per mode."""
        b = self.protocol.b(self.spec.kabs, t)
        return self.spec.lambdas**2 + b**2

    def energy(self, phi: np.ndarray, pi: np.ndarray, t: float) -> np.ndarray:
        s = self.stiffness(t)
        dens = 0.5 * self.spec.c**2 * np.abs(pi) ** 2 + 0.5 * s * np.abs(phi) ** 2
        return self.spec.dk * np.sum(dens.real, axis=-1)

    # gradients with respect to the conjugate-index variables, as arrays over n:
    # grad_phi_minus[n] = dH/dphi(-k_n), grad_pi_minus[n] = dH/dPi(-k_n)
    def grad_phi_minus(self, phi: np.ndarray, pi: np.ndarray, t: float) -> np.ndarray:
        return self.spec.dk * self.stiffness(t) * phi

    def grad_pi_minus(self, phi: np.ndarray, pi: np.ndarray, t: float) -> np.ndarray:
        return self.spec.dk * self.spec.c**2 * pi

    def grad_b(self, phi: np.ndarray, t: float) -> np.ndarray:
        """dH/db(k_n) = dk * b_t(k_n) * |phi(k_n)|^2 (real)."""
        b = self.protocol.b(self.spec.kabs, t)
        return self.spec.dk * b * np.abs(phi) ** 2


@dataclass(frozen=True)
class UserHamiltonian:
    """User-supplied Hamiltonian: callables mirroring FreeFieldHamiltonian.

    The SDE integrator only needs the gradients and the energy; thermodynamic
    closed forms in ``classical_thermo`` reject this kind.
    """

    spec: LatticeSpec
    energy_fn: Callable
    grad_phi_minus_fn: Callable
    grad_pi_minus_fn: Callable
    grad_b_fn: Callable | None = None

    kind = "user-supplied"

    def energy(self, phi, pi, t):
        return self.energy_fn(phi, pi, t)

    def grad_phi_minus(self, phi, pi, t):
        return self.grad_phi_minus_fn(phi, pi, t)

    def grad_pi_minus(self, phi, pi, t):
        return self.grad_pi_minus_fn(phi, pi, t)

    def grad_b(self, phi, t):
        if self.grad_b_fn is None:
            return np.zeros_like(np.abs(phi))
        return self.grad_b_fn(phi, t)


@dataclass
class ClassicalModeState:
    """Complex mode amplitudes of the real field at one instant.

    The reality constraint phi(-k_n) = conj(phi(k_n)) (and likewise for Pi)
    is enforced after every integrator step; self-conjugate modes carry
    zero imaginary part.
    """

    phi: np.ndarray
    pi: np.ndarray
    time: float = 0.0

    def copy(self) -> "ClassicalModeState":
        return ClassicalModeState(self.phi.copy(), self.pi.copy(), self.time)

    def reality_defect(self, spec: LatticeSpec) -> float:
        return max(reality_defect(self.phi, spec), reality_defect(self.pi, spec))


@dataclass(frozen=True)
class ModeNoise:
    """One step of correlated complex mode noise for both field equations.

    Paired modes +-k carry independent real Gaussians of variance dt/2 in
    the real and imaginary parts; self-conjugate modes carry a single real
    Gaussian of variance dt.  The phi and Pi streams are independent.
    """

    dB_phi: np.ndarray
    dB_pi: np.ndarray
    dt: float


def _paired_complex_noise(spec: LatticeSpec, dt: float, rng: np.random.Generator,
                          shape: tuple = ()) -> np.ndarray:
    size = shape + (spec.npoints,)
    scale = np.sqrt(dt / 2.0)
    z = rng.normal(scale=scale, size=size) + 1j * rng.normal(scale=scale, size=size)
    # symmetrization under k -> -k preserves the per-mode variance and
    # turns self-conjugate entries into real N(0, dt) draws
    return (z + z[..., spec.conjugate_indices].conj()) / np.sqrt(2.0)


def generate_mode_noise(spec: LatticeSpec, dt: float, rng: np.random.Generator,
                        shape: tuple = ()) -> ModeNoise:
    """Draw reality-paired mode noise increments for one step.

    ``shape`` prepends batch axes (used by the vectorized ensemble driver).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return ModeNoise(
        dB_phi=_paired_complex_noise(spec, dt, rng, shape),
        dB_pi=_paired_complex_noise(spec, dt, rng, shape),
        dt=dt,
    )


def drift(state: ClassicalModeState, hamiltonian, sched: CouplingSchedule,
          proto: MassProtocol, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic part of the mode equations at time t.

    Returns (dphi_dt, dPi_dt); reality pairing of the input is preserved.
    """
    spec = hamiltonian.spec
    gphi, gpi = sched.rates(spec.kabs, t)
    g_phi_minus = hamiltonian.grad_phi_minus(state.phi, state.pi, t)
    g_pi_minus = hamiltonian.grad_pi_minus(state.phi, state.pi, t)
    dphi = (g_pi_minus - gphi * g_phi_minus) / spec.dk
    dpi = -(g_phi_minus + gpi * g_pi_minus) / spec.dk
    return dphi, dpi


def _noise_amplitudes(spec: LatticeSpec, sched: CouplingSchedule,
                      t: float) -> tuple[np.ndarray, np.ndarray]:
    gphi, gpi = sched.rates(spec.kabs, t)
    norm = spec.dk * spec.beta
    return np.sqrt(2.0 * gphi / norm), np.sqrt(2.0 * gpi / norm)


def step_em(state: ClassicalModeState, hamiltonian, sched: CouplingSchedule,
            proto: MassProtocol, dt: float, noise: ModeNoise) -> ClassicalModeState:
    """One Euler-Maruyama step; reality re-enforced by projection."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    spec = hamiltonian.spec
    t = state.time
    dphi_dt, dpi_dt = drift(state, hamiltonian, sched, proto, t)
    amp_phi, amp_pi = _noise_amplitudes(spec, sched, t)
    phi = state.phi + dphi_dt * dt + amp_phi * noise.dB_phi
    pi = state.pi + dpi_dt * dt + amp_pi * noise.dB_pi
    phi = project_reality(phi, spec)
    pi = project_reality(pi, spec)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
        raise NumericalError(
            f"non-finite mode amplitude at t={t + dt:.6g} (dt={dt:.3g}); trajectory aborted"
        )
    return ClassicalModeState(phi=phi, pi=pi, time=t + dt)


def accumulate_heat(state_before: ClassicalModeState, state_after: ClassicalModeState,
                    hamiltonian, sched: CouplingSchedule, proto: MassProtocol,
                    dt: float, noise: ModeNoise) -> float:
    """Stratonovich heat increment for one integrator step.

    Each mode gradient of H is evaluated at the midpoint (average of the
    before/after integrands) and paired with the thermostat impulse of its
    own equation over the step,

        dQ = sum_n mid(dH/dPi(k_n)) * [ -(gamma_pi/dk) mid(dH/dPi(-k_n)) dt
                                        + amp_pi dB_pi(k_n) ]
           + (phi-line alike),

    which is the increment pairing that makes the noise-times-gradient
    product well defined.  The midpoint evaluation carries the noise
    reinjection (the mean heat matches the friction-plus-diffusion closed
    form), and the mode sum makes dQ real.
    """
    spec = hamiltonian.spec
    t = state_before.time
    gphi, gpi = sched.rates(spec.kabs, t)
    amp_phi, amp_pi = _noise_amplitudes(spec, sched, t)

    g_phi_before = hamiltonian.grad_phi_minus(state_before.phi, state_before.pi, t)
    g_phi_after = hamiltonian.grad_phi_minus(state_after.phi, state_after.pi, t + dt)
    g_pi_before = hamiltonian.grad_pi_minus(state_before.phi, state_before.pi, t)
    g_pi_after = hamiltonian.grad_pi_minus(state_after.phi, state_after.pi, t + dt)
    # mid_g_*[n] approximates dH/d*(-k_n); indexing with the conjugate map
    # gives the +k_n gradient entering the Stratonovich products
    mid_g_phi = 0.5 * (g_phi_before + g_phi_after)
    mid_g_pi = 0.5 * (g_pi_before + g_pi_after)
    conj = spec.conjugate_indices

    impulse_pi = -(gpi / spec.dk) * mid_g_pi * dt + amp_pi * noise.dB_pi
    impulse_phi = -(gphi / spec.dk) * mid_g_phi * dt + amp_phi * noise.dB_phi
    total = np.sum(mid_g_pi[conj] * impulse_pi + mid_g_phi[conj] * impulse_phi)
    scale = max(abs(total), 1.0)
    if abs(total.imag) > 1e-10 * scale:
        raise NumericalError(f"heat increment not real: imag residue {total.imag:.3e}")
    return float(total.real)


def accumulate_work(state: ClassicalModeState, hamiltonian, proto: MassProtocol,
                    t: float, dt: float) -> float:
    """Work increment from the mass schedule over [t, t+dt].

    Evaluates sum_n dH/db(k_n) * db(k_n) with the midpoint value of b over
    the step, so a one-step quench db^2 = delta yields (delta/2)*dk*|phi|^2.
    """
    spec = hamiltonian.spec
    b0 = proto.b(spec.kabs, t)
    b1 = proto.b(spec.kabs, t + dt)
    b_mid = 0.5 * (b0 + b1)
    dh_db = spec.dk * b_mid * np.abs(state.phi) ** 2
    return float(np.sum(dh_db * (b1 - b0)))


@dataclass
class TrajectoryRecord:
    """Snapshots of one stochastic trajectory plus cumulative heat and work."""

    times: np.ndarray
    phis: np.ndarray
    pis: np.ndarray
    energies: np.ndarray
    heats: np.ndarray
    works: np.ndarray
    seed: int
    trajectory_index: int
    dt: float

    @property
    def first_law_residual(self) -> np.ndarray:
        """|H(t) - H(0) - Q(t) - W(t)| at every snapshot."""
        return np.abs(self.energies - self.energies[0] - self.heats - self.works)


def trajectory_rng(seed: int, trajectory_index: int = 0) -> np.random.Generator:
    """Private stream keyed by (seed, trajectory_index); disjoint across indices."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(trajectory_index))))


def run_trajectory(init: ClassicalModeState, hamiltonian, sched: CouplingSchedule,
                   proto: MassProtocol, dt: float, steps: int, seed: int,
                   trajectory_index: int = 0, snapshot_stride: int = 1) -> TrajectoryRecord:
    """Integrate one trajectory; deterministic for a fixed (seed, index)."""
    spec = hamiltonian.spec
    rng = trajectory_rng(seed, trajectory_index)
    state = init.copy()
    q = 0.0
    w = 0.0

    times = [state.time]
    phis = [state.phi.copy()]
    pis = [state.pi.copy()]
    energies = [float(hamiltonian.energy(state.phi, state.pi, state.time))]
    heats = [0.0]
    works = [0.0]

    for step in range(steps):
        noise = generate_mode_noise(spec, dt, rng)
        new_state = step_em(state, hamiltonian, sched, proto, dt, noise)
        q += accumulate_heat(state, new_state, hamiltonian, sched, proto, dt, noise)
        w += accumulate_work(state, hamiltonian, proto, state.time, dt)
        state = new_state
        if (step + 1) % snapshot_stride == 0 or step + 1 == steps:
            times.append(state.time)
            phis.append(state.phi.copy())
            pis.append(state.pi.copy())
            energies.append(float(hamiltonian.energy(state.phi, state.pi, state.time)))
            heats.append(q)
            works.append(w)

    return TrajectoryRecord(
        times=np.array(times),
        phis=np.array(phis),
        pis=np.array(pis),
        energies=np.array(energies),
        heats=np.array(heats),
        works=np.array(works),
        seed=seed,
        trajectory_index=trajectory_index,
        dt=dt,
    )


# --- vectorized ensemble driver -------------------------------------------

@dataclass
class EnsembleMoments:
    """Per-block first and second moments of an ensemble at checkpoints.

    ``means[c][b]`` is the mean quadrature vector of block b at checkpoint c
    and ``covs[c][b]`` the corresponding covariance; blocks follow the
    quadrature layout of :mod:`fieldbath.classical_thermo`.
    """

    times: np.ndarray
    means: list
    covs: list
    n_traj: int

    def mean_standard_error(self, c: int, b: int) -> np.ndarray:
        return np.sqrt(np.diag(self.covs[c][b]) / self.n_traj)

    def cov_standard_error(self, c: int, b: int) -> np.ndarray:
        s = self.covs[c][b]
        d = np.diag(s)
        return np.sqrt((np.outer(d, d) + s**2) / self.n_traj)


def _block_quadratures(phi: np.ndarray, pi: np.ndarray, spec: LatticeSpec) -> list:
    """Split batched mode arrays into real quadrature vectors per block.

    Self-conjugate blocks carry (phi, Pi); paired blocks carry
    (Re phi, Im phi, Re Pi, Im Pi) of the representative n > 0 mode.
    """
    out = []
    for j in np.flatnonzero(spec.self_conjugate_mask):
        out.append(np.stack([phi[..., j].real, pi[..., j].real], axis=-1))
    for n in range(1, spec.N):
        j = n + spec.N
        out.append(
            np.stack(
                [phi[..., j].real, phi[..., j].imag, pi[..., j].real, pi[..., j].imag],
                axis=-1,
            )
        )
    return out


def run_ensemble(init_sampler: Callable[[np.random.Generator, int], tuple],
                 hamiltonian, sched: CouplingSchedule, proto: MassProtocol,
                 dt: float, steps: int, n_traj: int, seed: int,
                 checkpoint_stride: int = 1, chunk_size: int = 8192,
                 threads: int = 1) -> EnsembleMoments:
    """Vectorized ensemble integration collecting moment statistics.

    ``init_sampler(rng, size)`` must return batched (phi, pi) arrays with
    the reality constraint already satisfied.  Trajectories are processed
    in fixed-size chunks; each chunk owns a private stream keyed by
    (seed, "chunk", index), so results are byte-identical for any thread
    count.
    """
    spec = hamiltonian.spec
    check_steps = [s for s in range(steps + 1)
                   if s % checkpoint_stride == 0 or s == steps]
    chunk_starts = list(range(0, n_traj, chunk_size))

    def run_chunk(chunk_index: int, start: int):
        size = min(chunk_size, n_traj - start)
        rng = np.random.default_rng(
            np.random.SeedSequence((int(seed), 0x63687565, int(chunk_index)))
        )
        phi, pi = init_sampler(rng, size)
        t = 0.0
        sums = []  # per checkpoint: list per block of (sum_z, sum_zzT)

        def collect():
            blocks = _block_quadratures(phi, pi, spec)
            sums.append(
                [(z.sum(axis=0), np.einsum("bi,bj->ij", z, z)) for z in blocks]
            )

        next_check = 0
        if check_steps[next_check] == 0:
            collect()
            next_check += 1
        for step in range(steps):
            noise = generate_mode_noise(spec, dt, rng, shape=(size,))
            state = ClassicalModeState(phi=phi, pi=pi, time=t)
            new = step_em(state, hamiltonian, sched, proto, dt, noise)
            phi, pi, t = new.phi, new.pi, new.time
            if next_check < len(check_steps) and step + 1 == check_steps[next_check]:
                collect()
                next_check += 1
        return sums

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            chunk_sums = list(ex.map(run_chunk, range(len(chunk_starts)), chunk_starts))
    else:
        chunk_sums = [run_chunk(i, s) for i, s in enumerate(chunk_starts)]

    n_blocks = len(chunk_sums[0][0])
    times = np.array([c * dt for c in check_steps])
    means, covs = [], []
    for ci in range(len(check_steps)):
        mean_c, cov_c = [], []
        for b in range(n_blocks):
            sz = sum(cs[ci][b][0] for cs in chunk_sums)
            szz = sum(cs[ci][b][1] for cs in chunk_sums)
            mu = sz / n_traj
            cov = szz / n_traj - np.outer(mu, mu)
            cov *= n_traj / (n_traj - 1) if n_traj > 1 else 1.0
            mean_c.append(mu)
            cov_c.append(cov)
        means.append(mean_c)
        covs.append(cov_c)
    return EnsembleMoments(times=times, means=means, covs=covs, n_traj=n_traj)


def gaussian_mode_sampler(spec: LatticeSpec, block_means: list, block_covs: list):
    """Sampler of reality-constrained mode states from per-block Gaussians.

    Blocks follow the layout of :func:`_block_quadratures`: the
    self-conjugate modes (n = 0 and Nyquist) first, then one 4-dim block
    per +-k pair.
    """
    sc_idx = list(np.flatnonzero(spec.self_conjugate_mask))
    chols = [np.linalg.cholesky(c) for c in block_covs]

    def sample(rng: np.random.Generator, size: int):
        phi = np.zeros((size, spec.npoints), dtype=complex)
        pi = np.zeros((size, spec.npoints), dtype=complex)
        for b, j in enumerate(sc_idx):
            z = block_means[b] + rng.normal(size=(size, 2)) @ chols[b].T
            phi[:, j] = z[:, 0]
            pi[:, j] = z[:, 1]
        for n in range(1, spec.N):
            b = len(sc_idx) + n - 1
            j = n + spec.N
            z = block_means[b] + rng.normal(size=(size, 4)) @ chols[b].T
            phi[:, j] = z[:, 0] + 1j * z[:, 1]
            pi[:, j] = z[:, 2] + 1j * z[:, 3]
            jc = spec.conjugate_indices[j]
            phi[:, jc] = phi[:, j].conj()
            pi[:, jc] = pi[:, j].conj()
        return phi, pi

    return sample
