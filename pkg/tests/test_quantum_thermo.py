import numpy as np
import pytest

from fieldbath.quantum_master import (
    FockDensityMatrix,
    GKSLGenerator,
    build_gksl_rates,
    build_mode_operators,
    evolve,
    gibbs_density,
    gksl_rhs,
)
from fieldbath.quantum_thermo import (
    ModeDrive,
    _populations_rhs,
    _quantum_energy_curve,
    classical_limit_check,
    log_partition,
    q_heat_rate,
    q_work_rate,
    relative_entropy,
    relative_entropy_suite,
    run_thermo_protocol,
    second_law_production,
    von_neumann_entropy,
)


def random_density(dim, seed, interior=None):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    if interior is not None:
        rho[interior:, :] = 0.0
        rho[:, interior:] = 0.0
    return rho / np.trace(rho).real


def constant_drive(b0, gamma_phi):
    return ModeDrive(b=lambda t: b0, db_dt=lambda t: 0.0, gamma_phi=lambda t: gamma_phi)


def ramp_drive(b0, b1, t0, t1, gamma_phi):
    def b(t):
        s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        return b0 + (b1 - b0) * 0.5 * (1 - np.cos(np.pi * s))

    def db_dt(t):
        if t <= t0 or t >= t1:
            return 0.0
        s = (t - t0) / (t1 - t0)
        return (b1 - b0) * 0.5 * np.pi * np.sin(np.pi * s) / (t1 - t0)

    return ModeDrive(b=b, db_dt=db_dt, gamma_phi=lambda t: gamma_phi)


# --- heat and work ------------------------------------------------------------

def test_heat_rate_zero_at_gibbs():
    ops = build_mode_operators(45, 1.0, 1.0)
    rates = build_gksl_rates(0.5, 1.0, 1.0, 1.0)
    rho = gibbs_density(ops, 1.0)
    rhs = gksl_rhs(rho.rho, ops, rates)
    assert abs(q_heat_rate(rho.rho, rhs, ops.H_mode)) < 1e-10


def test_heat_rate_negative_for_hot_state():
    beta, om, hbar = 1.0, 1.2, 0.9
    ops = build_mode_operators(50, om, hbar)
    rates = build_gksl_rates(0.4, om, beta, hbar)
    hot = gibbs_density(ops, beta / 2)
    rhs = gksl_rhs(hot.rho, ops, rates)
    assert q_heat_rate(hot.rho, rhs, ops.H_mode) < 0


def test_heat_rate_zero_in_unitary_limit():
    ops = build_mode_operators(20, 1.0, 1.0)
    rho = random_density(21, 5, interior=16)
    rhs = 1j / ops.hbar * (rho @ ops.H_mode - ops.H_mode @ rho)
    assert abs(q_heat_rate(rho, rhs, ops.H_mode)) < 1e-12


def test_work_rate_zero_for_frozen_mass():
    ops = build_mode_operators(20, 1.0, 1.0)
    rho = random_density(21, 6)
    dH_db = 0.8 * ops.phi @ ops.phi
    assert q_work_rate(rho, dH_db, 0.0) == 0.0


def test_work_rate_positive_for_stiffening_ground_state():
    ops = build_mode_operators(20, 1.0, 1.0)
    ground = np.zeros((21, 21), dtype=complex)
    ground[0, 0] = 1.0
    dH_db = 0.8 * ops.phi @ ops.phi  # <phi^2> > 0 in the ground state
    assert q_work_rate(ground, dH_db, db_dt=0.3) > 0


def test_first_law_closure_on_smooth_ramp():
    beta, om0, hbar, c, lam = 1.0, 1.0, 1.0, 1.0, 0.0
    ops = build_mode_operators(40, om0, hbar, c)
    drive = ramp_drive(1.0, 1.45, 0.2, 1.8, gamma_phi=0.4)
    rho0 = gibbs_density(ops, beta)
    traj = run_thermo_protocol(ops, lam, drive, beta, rho0, dt=2e-3, steps=1000,
                               snapshot_stride=50)
    dE = traj.energy[-1] - traj.energy[0]
    resid = abs(dE - traj.heat[-1] - traj.work[-1])
    assert resid < 1e-6 * max(abs(dE), np.max(np.abs(traj.energy)))


# --- entropy ---------------------------------------------------------------------

def test_entropy_pure_and_mixed():
    assert von_neumann_entropy(np.diag([1.0, 0.0, 0.0]).astype(complex)) == 0.0
    d = 7
    assert von_neumann_entropy(np.eye(d) / d) == pytest.approx(np.log(d), rel=1e-12)


def test_entropy_thermal_closed_form():
    # S/kB = (nbar+1) ln(nbar+1) - nbar ln nbar; at beta*hbar*omega = ln 2,
    # nbar = 1 and S = 2 ln 2
    beta, om, hbar = np.log(2.0), 1.0, 1.0
    ops = build_mode_operators(80, om, hbar)
    rho = gibbs_density(ops, beta)
    nbar = 1.0 / (np.exp(beta * hbar * om) - 1.0)
    expected = (nbar + 1) * np.log(nbar + 1) - nbar * np.log(nbar)
    assert nbar == pytest.approx(1.0, rel=1e-12)
    assert expected == pytest.approx(2 * np.log(2.0), rel=1e-12)
    assert von_neumann_entropy(rho.rho) == pytest.approx(expected, rel=1e-10)


def test_entropy_rejects_indefinite_matrix():
    bad = np.diag([1.1, -0.1]).astype(complex)
    with pytest.raises(ValueError):
        von_neumann_entropy(bad)


# --- second law -------------------------------------------------------------------

def test_production_zero_at_gibbs():
    beta, om, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(45, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    rho = gibbs_density(ops, beta)
    assert abs(second_law_production(rho.rho, rates, ops)) < 1e-9


def test_production_zero_without_jumps():
    ops = build_mode_operators(20, 1.0, 1.0)
    from fieldbath.quantum_master import GKSLRates

    rho = random_density(21, 8)
    assert second_law_production(rho, GKSLRates(0.0, 0.0), ops) == 0.0


def test_production_positive_for_fock_state():
    beta, om, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(30, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    one = np.zeros((31, 31), dtype=complex)
    one[1, 1] = 1.0 - 1e-9
    one += 1e-9 / 31 * np.eye(31)  # eps-mixing keeps populations in support
    sigma = second_law_production(one, rates, ops)
    assert sigma > 0.1


def test_production_matches_entropy_balance_finite_difference():
    # the closed-form production equals dS/dt - (1/T) dQ/dt for full-rank
    # states (exact zero populations make both sides singular)
    beta, om, hbar = 1.1, 0.9, 0.8
    ops = build_mode_operators(30, om, hbar)
    gphi = 0.35
    rates = build_gksl_rates(gphi, om, beta, hbar)
    gen = GKSLGenerator(ops=ops, rates=rates)
    # mixing in a hot thermal floor keeps all populations well above zero,
    # where the entropy is differentiable on finite-difference scales
    rho = 0.5 * random_density(31, 17, interior=22) + 0.5 * gibbs_density(ops, beta / 3).rho
    sigma = second_law_production(rho, rates, ops, kB=1.0)

    # 4th-order forward stencil: f'(0) = (-25 f0 + 48 f1 - 36 f2 + 16 f3 - 3 f4)/(12h)
    h = 5e-5
    svals = [von_neumann_entropy(rho)]
    for i in (1, 2, 3, 4):
        rec = evolve(FockDensityMatrix(rho=rho, omega=om), gen, dt=i * h / 32, steps=32)
        svals.append(von_neumann_entropy(rec.states[-1].rho))
    ds_dt = (-25 * svals[0] + 48 * svals[1] - 36 * svals[2]
             + 16 * svals[3] - 3 * svals[4]) / (12 * h)
    qdot = q_heat_rate(rho, gen.rhs(rho, 0.0), ops.H_mode)
    T = 1.0 / beta
    assert sigma == pytest.approx(ds_dt - qdot / T, rel=1e-6)


def test_production_nonnegative_random_cases():
    rng = np.random.default_rng(23)
    for trial in range(30):
        om = rng.uniform(0.3, 2.0)
        hbar = rng.uniform(0.3, 2.0)
        beta = rng.uniform(0.2, 2.0)
        gphi = rng.uniform(0.05, 1.0)
        ops = build_mode_operators(22, om, hbar)
        rates = build_gksl_rates(gphi, om, beta, hbar)
        rho = random_density(23, 1000 + trial, interior=18)
        assert second_law_production(rho, rates, ops) >= -1e-10


# --- relative entropy ---------------------------------------------------------------

def test_relative_entropy_zero_at_gibbs():
    beta, om, hbar = 1.0, 1.3, 0.7
    ops = build_mode_operators(50, om, hbar)
    rho = gibbs_density(ops, beta)
    assert abs(relative_entropy(rho.rho, ops.H_mode, beta)) < 1e-12


def test_log_partition_against_direct_sum():
    beta, om, hbar = 0.9, 1.1, 1.2
    ops = build_mode_operators(40, om, hbar)
    direct = np.log(np.sum(np.exp(-beta * hbar * om * (np.arange(41) + 0.5))))
    assert log_partition(ops.H_mode, beta) == pytest.approx(direct, rel=1e-12)


def test_s_rel_monotone_on_frozen_relaxation():
    beta, om, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(35, om, hbar)
    drive = constant_drive(1.0, 0.4)
    rho0 = FockDensityMatrix(rho=random_density(36, 3, interior=25), omega=om)
    traj = run_thermo_protocol(ops, 0.0, drive, beta, rho0, dt=5e-3, steps=800,
                               snapshot_stride=40)
    diffs = np.diff(traj.S_rel)
    assert np.all(diffs <= 1e-10)
    # frozen drive: tilde_S_rel = -S_rel and is non-decreasing
    np.testing.assert_allclose(traj.tilde_S_rel, -traj.S_rel, atol=1e-12)


def test_relative_entropy_identity_on_ramp():
    beta, om0, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(35, om0, hbar)
    drive = ramp_drive(1.0, 1.4, 0.3, 2.2, gamma_phi=0.5)
    rho0 = gibbs_density(ops, 0.55 * beta)
    traj = run_thermo_protocol(ops, 0.0, drive, beta, rho0, dt=2.5e-3, steps=1000,
                               snapshot_stride=1)
    _, _, resid = relative_entropy_suite(traj, beta)
    assert resid < 1e-5


# --- classical limit ------------------------------------------------------------------

def test_scalar_occupation_ode_matches_population_chain():
    # the closed <n> equation reproduces the full birth-death chain
    beta, om, hbar, gphi = 1.0, 1.0, 0.8, 0.3
    rates = build_gksl_rates(gphi, om, beta, hbar)
    M = 120
    x_hot = 0.5 * beta * hbar * om
    p = np.exp(-x_hot * np.arange(M + 1))
    p /= p.sum()
    times = np.linspace(0.0, 2.0, 400)
    n_grid = np.arange(M + 1)
    n_chain = [float(np.sum(n_grid * p))]
    for i in range(len(times) - 1):
        dt = times[i + 1] - times[i]
        k1 = _populations_rhs(p, rates, hbar)
        k2 = _populations_rhs(p + 0.5 * dt * k1, rates, hbar)
        k3 = _populations_rhs(p + 0.5 * dt * k2, rates, hbar)
        k4 = _populations_rhs(p + dt * k3, rates, hbar)
        p = p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        n_chain.append(float(np.sum(n_grid * p)))
    e_chain = hbar * om * (np.array(n_chain) + 0.5)
    e_scalar = _quantum_energy_curve(rates, hbar, om, n_chain[0], times)
    assert np.max(np.abs(e_chain - e_scalar)) < 1e-8


def test_classical_limit_stationary_ratio():
    report = classical_limit_check(0.4, omega=1.0, c=1.0, beta=1.0,
                                   hbar_sequence=[1.0, 0.3, 0.1, 0.03, 0.01])
    for row in report.rows:
        assert row.ratio_error < 1e-6
    small = report.rows[-1]
    assert small.beta_hbar_omega == pytest.approx(0.01)
    assert abs(small.energy_ratio - 1.0) < 0.01


def test_classical_limit_planck_factor_value():
    report = classical_limit_check(0.4, omega=1.0, c=1.0, beta=1.0, hbar_sequence=[1.0])
    row = report.rows[0]
    x = row.beta_hbar_omega
    assert row.planck_factor == pytest.approx(0.5 * x / np.tanh(0.5 * x), rel=1e-12)
    assert row.energy_ratio == pytest.approx(row.planck_factor, abs=1e-8)


def test_classical_limit_relaxation_converges_monotonically():
    report = classical_limit_check(0.4, omega=1.3, c=1.1, beta=0.9,
                                   hbar_sequence=[1.0, 0.5, 0.2, 0.1, 0.05, 0.01])
    assert report.supnorms_monotone
    assert report.rows[-1].relax_supnorm < 0.01
    assert report.rows[-1].relax_supnorm < report.rows[0].relax_supnorm / 10
