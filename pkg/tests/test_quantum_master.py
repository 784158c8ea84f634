import numpy as np
import pytest

from fieldbath.errors import NumericalError
from fieldbath.quantum_master import (
    FockDensityMatrix,
    GeneralQMEGenerator,
    GKSLGenerator,
    GKSLRates,
    build_gksl_rates,
    build_L_matrix,
    build_mode_operators,
    cptp_for_all_temperatures,
    detailed_balance_gamma_pi,
    evolve,
    general_qme_rhs,
    gibbs_density,
    gksl_rhs,
    hamiltonian_at,
    instantaneous_ladder,
    propagate_expm,
    steady_state,
    steady_state_populations,
    trace_distance,
)


def random_density(dim: int, seed: int, interior: int | None = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    if interior is not None:
        rho[interior:, :] = 0.0
        rho[:, interior:] = 0.0
    return rho / np.trace(rho).real


# --- operators ----------------------------------------------------------------

def test_number_operator_diagonal():
    ops = build_mode_operators(12, omega=1.3, hbar=0.7, c=1.1)
    np.testing.assert_allclose(np.diag(ops.number).real, np.arange(13), atol=1e-14)


def test_commutator_on_truncated_block():
    ops = build_mode_operators(10, omega=0.9, hbar=1.0)
    comm = ops.a @ ops.adag - ops.adag @ ops.a
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(10), atol=1e-13)


def test_quadrature_commutator_is_i_hbar():
    # [phi, Pi] = i*hbar on the low levels (mode measure absorbed in the
    # quadratures, so the conversion factor is exactly one)
    ops = build_mode_operators(14, omega=1.7, hbar=0.6, c=1.2)
    comm = ops.phi @ ops.pi - ops.pi @ ops.phi
    np.testing.assert_allclose(comm[:-1, :-1], 1j * 0.6 * np.eye(14), atol=1e-12)


def test_hamiltonian_from_quadratures():
    ops = build_mode_operators(12, omega=1.7, hbar=0.6, c=1.2)
    H = hamiltonian_at(ops, 1.7)
    np.testing.assert_allclose(H[:-1, :-1], ops.H_mode[:-1, :-1], atol=1e-12)


def test_instantaneous_ladder_is_bogoliubov():
    ops = build_mode_operators(16, omega=1.0, hbar=1.0)
    np.testing.assert_allclose(instantaneous_ladder(ops, 1.0), ops.a, atol=1e-13)
    a2 = instantaneous_ladder(ops, 2.3)
    comm = a2 @ a2.conj().T - a2.conj().T @ a2
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(16), atol=1e-12)


def test_operators_reject_small_truncation():
    with pytest.raises(ValueError):
        build_mode_operators(1, omega=1.0, hbar=1.0)


# --- dissipator matrix ----------------------------------------------------------

def test_L_matrix_detailed_balance_determinant():
    # at the detailed-balance tuning det L_H = 4 gamma_phi^2 omega^2/(c^4 beta^2 hbar^2)
    for (gphi, om, c, beta, hbar) in [(1.0, 1.0, 1.0, 1.0, 1.0), (0.3, 1.7, 1.2, 2.0, 0.5)]:
        gpi = detailed_balance_gamma_pi(gphi, om, c)
        spec = build_L_matrix(gphi, gpi, om, beta, hbar, c)
        expected = 4.0 * gphi**2 * om**2 / (c**4 * beta**2 * hbar**2)
        assert spec.det_LH == pytest.approx(expected, rel=1e-12)
        assert spec.cptp
    # unit-parameter spot value
    spec = build_L_matrix(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert spec.det_LH == pytest.approx(4.0, rel=1e-12)


def test_L_matrix_standard_brownian_is_not_cptp():
    spec = build_L_matrix(0.0, 0.7, omega=1.3, beta=0.8, hbar=1.0, c=1.0)
    assert spec.det_LH < 0
    assert not spec.cptp


def test_L_matrix_zero_couplings_unitary_limit():
    spec = build_L_matrix(0.0, 0.0, omega=1.0, beta=1.0, hbar=1.0)
    assert np.all(spec.L == 0)
    assert spec.cptp


def test_L_hermitian_part():
    spec = build_L_matrix(0.4, 0.9, omega=1.1, beta=1.3, hbar=0.7)
    np.testing.assert_allclose(spec.L_H, spec.L_H.conj().T, atol=1e-15)


def test_detailed_balance_gamma_pi_values():
    assert detailed_balance_gamma_pi(0.3, omega=1.0, c=1.0) == pytest.approx(0.3)
    assert detailed_balance_gamma_pi(1.0, omega=2.0, c=1.0) == pytest.approx(4.0)


def test_dbc_cptp_across_parameter_grid():
    rng = np.random.default_rng(5)
    for _ in range(25):
        gphi = rng.uniform(0.05, 3.0)
        om = rng.uniform(0.2, 4.0)
        c = rng.uniform(0.5, 2.0)
        hbar = rng.uniform(0.2, 2.0)
        gpi = detailed_balance_gamma_pi(gphi, om, c)
        assert cptp_for_all_temperatures(gphi, gpi, om, hbar, c)
        # off the line by 1 percent the all-temperature criterion fails
        assert not cptp_for_all_temperatures(gphi, 1.01 * gpi, om, hbar, c)
        assert not cptp_for_all_temperatures(gphi, 0.99 * gpi, om, hbar, c)


def test_fixed_beta_region_is_wider_than_dbc():
    # at fixed finite beta the admissible set strictly contains the line
    gphi, om, c, hbar = 0.5, 1.0, 1.0, 1.0
    gpi = detailed_balance_gamma_pi(gphi, om, c)
    beta = 0.5 / (hbar * om)  # hot: coth^2 >> 1
    assert build_L_matrix(gphi, 1.3 * gpi, om, beta, hbar, c).cptp
    assert not cptp_for_all_temperatures(gphi, 1.3 * gpi, om, hbar, c)


# --- rates ----------------------------------------------------------------------

def test_rates_detailed_balance_ratio():
    rng = np.random.default_rng(1)
    for _ in range(100):
        gphi = rng.uniform(0.01, 2.0)
        om = rng.uniform(0.1, 5.0)
        beta = rng.uniform(0.1, 5.0)
        hbar = rng.uniform(0.1, 2.0)
        r = build_gksl_rates(gphi, om, beta, hbar)
        assert r.gamma_plus >= 0 and r.gamma_minus >= 0
        assert r.gamma_minus / r.gamma_plus == pytest.approx(
            np.exp(-beta * hbar * om), rel=1e-12
        )


def test_rates_ratio_half_at_log2():
    hbar, om = 1.0, 1.0
    beta = np.log(2.0)
    r = build_gksl_rates(0.7, om, beta, hbar)
    assert r.gamma_minus / r.gamma_plus == pytest.approx(0.5, rel=1e-12)


def test_rates_small_theta_series():
    # gamma_+ - gamma_- -> 2 gamma_phi hbar omega^2/c^2 as beta*hbar*omega -> 0;
    # series oracle: base * 2*sinh(theta) with theta -> 0
    gphi, om, c = 0.4, 1.3, 1.1
    for hbar in (1e-3, 1e-4, 1e-5):
        beta = 1.0
        r = build_gksl_rates(gphi, om, beta, hbar, c)
        limit = 2.0 * gphi * hbar * om**2 / c**2
        assert (r.gamma_plus - r.gamma_minus) == pytest.approx(limit, rel=1e-5)


# --- generators -------------------------------------------------------------------

def test_gksl_gibbs_stationary():
    beta, om, hbar = 1.0, 1.0, 1.0
    M = 45  # Gibbs tail below 1e-12 for beta*hbar*omega = 1
    ops = build_mode_operators(M, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    rho = gibbs_density(ops, beta)
    assert np.linalg.norm(gksl_rhs(rho.rho, ops, rates)) < 1e-10


def test_gksl_unitary_limit_preserves_purity():
    ops = build_mode_operators(14, 1.0, 1.0)
    rates = GKSLRates(gamma_plus=0.0, gamma_minus=0.0)
    v = np.zeros(15, dtype=complex)
    v[0] = 1 / np.sqrt(2)
    v[3] = 1 / np.sqrt(2)
    rho0 = FockDensityMatrix(rho=np.outer(v, v.conj()), omega=1.0)
    rec = evolve(rho0, GKSLGenerator(ops=ops, rates=rates), dt=0.004, steps=1000,
                 snapshot_stride=1000)
    purity = np.trace(rec.states[-1].rho @ rec.states[-1].rho).real
    assert purity == pytest.approx(1.0, abs=1e-9)


def test_gksl_rhs_hermitian_traceless():
    ops = build_mode_operators(20, 1.2, 0.8)
    rates = build_gksl_rates(0.4, 1.2, 1.1, 0.8)
    rho = random_density(21, seed=3)
    out = gksl_rhs(rho, ops, rates)
    assert abs(np.trace(out)) < 1e-12
    assert np.linalg.norm(out - out.conj().T) < 1e-12


def test_mean_occupation_relaxation_ode():
    # d<n>/dt = -((gamma_+ - gamma_-)/hbar) <n> + gamma_-/hbar, toward the
    # Bose-Einstein value; symbolic expectation ODE cross-checked numerically
    beta, om, hbar = 0.9, 1.1, 0.8
    ops = build_mode_operators(50, om, hbar)
    rates = build_gksl_rates(0.3, om, beta, hbar)
    kappa = (rates.gamma_plus - rates.gamma_minus) / hbar
    nbar = 1.0 / (np.exp(beta * hbar * om) - 1.0)
    rho0 = gibbs_density(ops, beta / 2)  # hot start
    n0 = np.trace(rho0.rho @ ops.number).real
    t_end = 0.7 / kappa
    steps = 600
    rec = evolve(rho0, GKSLGenerator(ops=ops, rates=rates), dt=t_end / steps,
                 steps=steps, snapshot_stride=steps)
    n1 = np.trace(rec.states[-1].rho @ ops.number).real
    expected = nbar + (n0 - nbar) * np.exp(-kappa * t_end)
    assert n1 == pytest.approx(expected, rel=1e-6)


def test_general_qme_gibbs_stationary_any_couplings():
    beta, om, hbar = 1.3, 0.9, 1.0
    ops = build_mode_operators(40, om, hbar)
    rho = gibbs_density(ops, beta)
    for gphi, gpi in [(0.0, 0.0), (0.7, 0.0), (0.0, 0.9), (0.5, 0.4)]:
        out = general_qme_rhs(rho.rho, ops, gphi, gpi, beta, hbar)
        assert np.linalg.norm(out) < 1e-12


def test_general_qme_zero_coupling_is_commutator():
    ops = build_mode_operators(15, 1.0, 1.0)
    rho = random_density(16, seed=9)
    out = general_qme_rhs(rho, ops, 0.0, 0.0, 1.0, 1.0)
    expected = 1j * (rho @ ops.H_mode - ops.H_mode @ rho)
    np.testing.assert_allclose(out, expected, atol=1e-13)


def test_general_qme_matches_gksl_at_detailed_balance():
    # interior Fock block at M=40, tolerance 1e-8
    M = 40
    beta, om, c, hbar = 1.1, 0.9, 1.2, 0.8
    gphi = 0.45
    gpi = detailed_balance_gamma_pi(gphi, om, c)
    ops = build_mode_operators(M, om, hbar, c)
    rates = build_gksl_rates(gphi, om, beta, hbar, c)
    rho = random_density(M + 1, seed=12, interior=M - 4)
    r_general = general_qme_rhs(rho, ops, gphi, gpi, beta, hbar)
    r_gksl = gksl_rhs(rho, ops, rates)
    block = slice(0, M - 5)
    diff = np.linalg.norm((r_general - r_gksl)[block, block])
    assert diff < 1e-8 * np.linalg.norm(r_general[block, block])


def test_general_qme_rejects_nondiagonal_hamiltonian():
    from dataclasses import replace

    ops = build_mode_operators(10, 1.0, 1.0)
    bad = ops.H_mode.copy()
    bad[0, 1] = bad[1, 0] = 0.5
    ops_bad = replace(ops, H_mode=bad)
    with pytest.raises(ValueError):
        general_qme_rhs(random_density(11, 1), ops_bad, 0.3, 0.3, 1.0, 1.0)


# --- evolution --------------------------------------------------------------------

def test_evolve_trace_and_hermiticity_over_long_run():
    # |tr rho - 1| < 1e-9 over 1e4 RK4 steps under both generators
    ops = build_mode_operators(25, 1.0, 1.0)
    rho0 = FockDensityMatrix(rho=random_density(26, seed=21, interior=20), omega=1.0)
    gens = [
        GKSLGenerator(ops=ops, rates=build_gksl_rates(0.4, 1.0, 1.0, 1.0)),
        GeneralQMEGenerator(ops=ops, gamma_phi=0.3, gamma_pi=0.5, beta=1.0),
    ]
    for gen in gens:
        rec = evolve(rho0, gen, dt=5e-4, steps=10_000, snapshot_stride=2000)
        assert rec.trace_drift < 1e-9
        for st in rec.states:
            assert np.linalg.norm(st.rho - st.rho.conj().T) < 1e-11


def test_evolve_positivity_under_cptp_generator():
    # min eigenvalue >= -1e-10 for 50 random initial states
    ops = build_mode_operators(24, 1.0, 1.0)
    rates = build_gksl_rates(0.5, 1.0, 1.0, 1.0)
    gen = GKSLGenerator(ops=ops, rates=rates)
    for seed in range(50):
        rho0 = FockDensityMatrix(rho=random_density(25, seed=seed, interior=18), omega=1.0)
        rec = evolve(rho0, gen, dt=0.002, steps=300, snapshot_stride=60)
        for st in rec.states:
            assert np.linalg.eigvalsh(st.rho).min() >= -1e-10


def test_rk4_order_against_exponential_propagator():
    ops = build_mode_operators(10, 1.0, 1.0)
    rates = build_gksl_rates(0.6, 1.0, 1.0, 1.0)
    gen = GKSLGenerator(ops=ops, rates=rates)
    rho0 = FockDensityMatrix(rho=random_density(11, seed=2, interior=8), omega=1.0)
    exact = propagate_expm(rho0, gen, 0.5)
    errs = []
    for steps in (10, 20, 40):
        rec = evolve(rho0, gen, dt=0.5 / steps, steps=steps, snapshot_stride=steps)
        errs.append(np.linalg.norm(rec.states[-1].rho - exact.rho))
    order = np.polyfit(np.log([0.5 / 10, 0.5 / 20, 0.5 / 40]), np.log(errs), 1)[0]
    assert order > 3.8


def test_noncptp_standard_brownian_violates_positivity():
    # gamma_phi = 0 (standard Brownian quantization): some evolved pure state
    # acquires a negative eigenvalue below -1e-6
    ops = build_mode_operators(30, 1.0, 1.0)
    gen = GeneralQMEGenerator(ops=ops, gamma_phi=0.0, gamma_pi=0.8, beta=2.0)
    v = np.zeros(31, dtype=complex)
    v[0] = v[1] = 1 / np.sqrt(2)
    rho0 = FockDensityMatrix(rho=np.outer(v, v.conj()), omega=1.0)
    rec = evolve(rho0, gen, dt=0.005, steps=200, snapshot_stride=20)
    min_eig = min(np.linalg.eigvalsh(st.rho).min() for st in rec.states)
    assert min_eig < -1e-6


def test_evolve_aborts_on_trace_blowup():
    ops = build_mode_operators(8, 1.0, 1.0)

    class Bad:
        def rhs(self, rho, t):
            return np.eye(9, dtype=complex)  # injects trace

    rho0 = gibbs_density(ops, 1.0)
    with pytest.raises(NumericalError):
        evolve(rho0, Bad(), dt=0.1, steps=100)


# --- steady state -----------------------------------------------------------------

def test_steady_state_occupation_log2():
    # beta*hbar*omega = ln 2 => <n> = 1
    hbar, om = 1.0, 1.0
    beta = np.log(2.0)
    ops = build_mode_operators(60, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    ss = steady_state(ops, rates)
    n = np.trace(ss.rho @ ops.number).real
    assert n == pytest.approx(1.0, abs=1e-8)


def test_steady_state_bose_einstein():
    hbar, om, beta = 1.0, 1.0, 1.0
    ops = build_mode_operators(60, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    ss = steady_state(ops, rates)
    n = np.trace(ss.rho @ ops.number).real
    assert n == pytest.approx(1.0 / (np.e - 1.0), abs=1e-8)


def test_steady_state_is_gibbs_populations():
    hbar, om, beta = 0.7, 1.3, 0.9
    ops = build_mode_operators(50, om, hbar)
    rates = build_gksl_rates(0.4, om, beta, hbar)
    ss = steady_state(ops, rates)
    pops = np.diag(ss.rho).real
    x = np.exp(-beta * hbar * om)
    expected = x ** np.arange(51)
    expected /= expected.sum()
    np.testing.assert_allclose(pops, expected, atol=1e-10)
    offdiag = ss.rho - np.diag(np.diag(ss.rho))
    assert np.linalg.norm(offdiag) < 1e-10


def test_steady_state_matches_population_chain():
    rates = build_gksl_rates(0.4, 1.3, 0.9, 0.7)
    pops = steady_state_populations(rates, hbar=0.7, M=50)
    x = rates.gamma_minus / rates.gamma_plus
    np.testing.assert_allclose(pops[1:] / pops[:-1], x, rtol=1e-12)
    assert pops.sum() == pytest.approx(1.0)


def test_steady_state_requires_dissipation():
    ops = build_mode_operators(10, 1.0, 1.0)
    with pytest.raises(ValueError):
        steady_state(ops, GKSLRates(gamma_plus=0.0, gamma_minus=0.0))


def test_gksl_convergence_to_gibbs_trace_distance():
    beta, om, hbar = 1.0, 1.0, 1.0
    ops = build_mode_operators(30, om, hbar)
    rates = build_gksl_rates(0.5, om, beta, hbar)
    gen = GKSLGenerator(ops=ops, rates=rates)
    kappa = (rates.gamma_plus - rates.gamma_minus) / hbar
    gibbs = gibbs_density(ops, beta)
    rho0 = FockDensityMatrix(rho=random_density(31, seed=33, interior=12), omega=om)
    out = propagate_expm(rho0, gen, 45.0 / kappa)
    assert trace_distance(out.rho, gibbs.rho) < 1e-8
