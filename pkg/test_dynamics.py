"""
Tests for the Liouvillian, steady state, propagation and correlators
"""

import warnings

import numpy as np
import pytest
from scipy.linalg import LinAlgWarning

from twindot.core.data_models import IncoherentPumps, Params
from twindot.core.dynamics import (
    HBAR,
    check_fock_convergence,
    emission_spectrum,
    evolve_vector,
    fock_converged,
    g2_reflected,
    liouvillian,
    property_report,
    propagate,
    relative_residual,
    steady_state,
    steady_state_of,
    system_liouvillian,
    two_time_correlation,
)
from twindot.core.effective import analytic_mode_frequency, collective_rates, modes_of
from twindot.core.exceptions import ParameterError, SolverError
from twindot.core.experiments import find_peaks, peak_fwhm, reflectivity
from twindot.core.model import (
    build_layout,
    collapse_ops,
    drive_amplitude,
    hamiltonian,
    independent_collapse_ops,
    load_preset,
)
from twindot.core.qspace import (
    DensityMatrix,
    annihilator,
    expectation,
    identity,
    lowering,
    number_op,
)


def test_liouvillian_preserves_trace(small_pair):
    params = small_pair.replace(omega1=10.0, omega2=-10.0, Omega12=31.0,
                                gamma12=0.5, gamma_star=0.2, P_laser=1e-9)
    L = system_liouvillian(params, IncoherentPumps(P1=0.01, Pc=0.01))
    assert L.trace_error() < 1e-12


def test_liouvillian_spectrum_is_stable(small_pair):
    L = system_liouvillian(small_pair.replace(fock_dim=2))
    assert L.max_real_eigenvalue() < 1e-9


def test_collective_and_independent_dissipators_agree(small_pair):
    """With gamma12 = 0, D[S] + D[A] = D[s1] + D[s2]"""
    params = small_pair.replace(gamma_star=0.3)
    layout = build_layout(params)
    H = hamiltonian(params, layout)
    collective = liouvillian(H, collapse_ops(params, layout)).matrix
    independent = liouvillian(H, independent_collapse_ops(params, layout)).matrix
    assert np.max(np.abs(collective - independent)) < 1e-12 * np.max(np.abs(independent))


def test_undriven_steady_state_is_ground(small_pair):
    params = small_pair.replace(P_laser=0.0)
    rho = steady_state_of(params)
    ground = DensityMatrix.basis_state(rho.layout, 0, 0, 0)
    assert rho.trace_distance(ground) < 1e-9


def test_driven_steady_state_is_physical(small_pair):
    params = small_pair.replace(omega1=20.0, omega2=-20.0, Omega12=31.0,
                                gamma12=0.596, P_laser=1e-9)
    L = system_liouvillian(params)
    rho = steady_state(L)
    assert relative_residual(L, rho) < 1e-9
    assert rho.trace().real == pytest.approx(1.0, abs=1e-12)
    assert rho.hermiticity_error() < 1e-12
    assert rho.min_eigenvalue() > -1e-10


def test_degenerate_steady_state_raises():
    """No decay and no coupling: every dot population is stationary"""
    params = Params(g=0.0, gamma=0.0, fock_dim=2)
    with pytest.raises(SolverError) as info:
        steady_state_of(params)
    assert "condition_estimate" in info.value.diagnostics


def test_empty_cavity_amplitude(empty_cavity):
    """A resonantly driven bare cavity settles at <a> = -2 E_p / kappa"""
    rho = steady_state_of(empty_cavity)
    a = annihilator(rho.layout)
    expected = -2.0 * drive_amplitude(empty_cavity) / empty_cavity.kappa
    assert expectation(a, rho) == pytest.approx(expected, rel=1e-6)


def test_propagation_relaxes_to_steady_state():
    params = Params(gamma=10.0, fock_dim=3, P_laser=1e-9, omega1=5.0, omega2=-5.0)
    L = system_liouvillian(params)
    rho_ss = steady_state(L)
    ground = DensityMatrix.basis_state(L.layout, 0, 0, 0)
    t_end = 50.0 * HBAR / params.gamma
    states = propagate(L, ground, [0.0, 0.5 * t_end, t_end])
    assert len(states) == 3
    assert states[0].trace_distance(ground) < 1e-12
    assert states[-1].trace_distance(rho_ss) < 1e-6
    for state in states:
        assert state.trace().real == pytest.approx(1.0, abs=1e-7)


def test_propagation_methods_agree():
    params = Params(gamma=10.0, fock_dim=2, P_laser=1e-9)
    L = system_liouvillian(params)
    ground = DensityMatrix.basis_state(L.layout, 0, 0, 0)
    rk45 = propagate(L, ground, [0.0, 0.2], method="RK45")[-1]
    dop853 = propagate(L, ground, [0.0, 0.2], method="DOP853")[-1]
    assert rk45.trace_distance(dop853) < 1e-7


def test_evolve_vector_rejects_bad_grid(small_pair):
    L = system_liouvillian(small_pair.replace(fock_dim=2))
    v0 = DensityMatrix.basis_state(L.layout, 0, 0, 0).vec()
    with pytest.raises(ParameterError):
        evolve_vector(L, v0, [0.0, 2.0, 1.0])
    with pytest.raises(ParameterError):
        evolve_vector(L, v0, [-1.0, 1.0])
    with pytest.raises(ParameterError):
        evolve_vector(L, v0, [0.0, 1.0], method="Euler")


def test_correlator_at_zero_delay_is_expectation(small_pair):
    params = small_pair.replace(P_laser=1e-9)
    L = system_liouvillian(params)
    rho = steady_state(L)
    a = annihilator(rho.layout)
    corr = two_time_correlation(L, rho, a.dag(), a, [0.0, 0.1])
    n = np.real(np.trace(a.dag().matrix @ a.matrix @ rho.matrix))
    assert corr[0] == pytest.approx(n, rel=1e-10)


def test_identity_correlator_is_constant(small_pair):
    """Tr[e^{L tau} rho] = 1 for every tau"""
    params = small_pair.replace(P_laser=1e-9)
    L = system_liouvillian(params)
    rho = steady_state(L)
    one = identity(rho.layout)
    corr = two_time_correlation(L, rho, one, one, [0.0, 0.5, 2.0])
    assert np.allclose(corr, 1.0, atol=1e-7)


def test_g2_of_coherent_reflection():
    """A bare detuned cavity reflects a coherent state: g2 = 1 at every delay"""
    params = Params(g=0.0, fock_dim=4, P_laser=1e-12, omega_c=100.0)
    g2 = g2_reflected(params, np.linspace(0.0, 2.0, 5))
    assert np.allclose(g2, 1.0, atol=1e-4)


def test_g2_single_dot_recovers_at_long_delay(single_dot):
    g2 = g2_reflected(single_dot, np.linspace(0.0, 10.0, 21))
    assert np.all(np.isfinite(g2))
    assert g2[-1] == pytest.approx(1.0, abs=1e-3)


def test_g2_requires_drive(single_dot):
    with pytest.raises(ParameterError):
        g2_reflected(single_dot.replace(P_laser=0.0), [0.0, 1.0])


def test_emission_spectrum_peaks_at_dot(single_dot):
    """Far-detuned cavity: the emission line sits near the bare dot"""
    params = single_dot.replace(omega_c=200.0, P_laser=0.0)
    omega = np.linspace(-20.0, 20.0, 201)
    spectrum = emission_spectrum(params, omega)
    peaks = find_peaks(omega, spectrum)
    assert len(peaks) >= 1
    main = max(peaks, key=lambda p: p.height)
    assert abs(main.position) < 3.0
    assert main.height > 0


def test_fock_convergence_criterion():
    assert fock_converged(1.0, 1.004)
    assert not fock_converged(1.0, 1.01)
    assert fock_converged([0.0, 1.0], [5e-7, 1.0])
    assert not fock_converged([0.0, 1.0], [5e-6, 1.0])


def test_check_fock_convergence_on_reflectivity(single_dot):
    value, value_next, converged = check_fock_convergence(reflectivity, single_dot)
    assert converged
    assert value == pytest.approx(value_next, rel=5e-3)


def test_property_report_on_resonant_pair(small_pair):
    report = property_report(small_pair)
    assert report["residual"] < 1e-9
    assert report["trace_error"] < 1e-9
    assert report["min_eigenvalue"] > -1e-8
    assert report["generator_trace_error"] < 1e-12
    assert report["dissipator_difference"] < 1e-12
    assert report["propagation_distance"] < 1e-6


def test_property_report_propagates_the_coupled_generator():
    """gamma12 close to gamma leaves a slow dark state; the drive barely feeds it"""
    params = load_preset("case-d").replace(fock_dim=4)
    report = property_report(params)
    assert report["residual"] < 1e-9
    assert report["min_eigenvalue"] > -1e-8
    assert report["dissipator_difference"] < 1e-12
    assert report["propagation_distance"] < 1e-6


def test_emission_linewidth_of_bright_state():
    """Resonant identical dots: the bright-state line is about 8g^2/kappa + gamma wide"""
    params = load_preset("case-a").replace(fock_dim=3, P_laser=0.0)
    omega = np.linspace(-60.0, 60.0, 601)
    fwhm = peak_fwhm(omega, emission_spectrum(params, omega))
    assert fwhm == pytest.approx(8.0 * 20.0 ** 2 / 200.0 + 0.6, rel=0.15)


def test_emission_linewidth_of_minus_state():
    """Detuned coupled dots: the |-''> line width matches Gamma_- + gamma_-"""
    params = load_preset("case-d").replace(fock_dim=3, P_laser=0.0)
    rates = collective_rates(params)
    center = analytic_mode_frequency(params)
    omega = np.linspace(center - 8.0, center + 8.0, 641)
    spectrum = emission_spectrum(params, omega)
    main = max(find_peaks(omega, spectrum), key=lambda p: p.height)
    assert main.position == pytest.approx(center, abs=2.0)
    assert main.fwhm == pytest.approx(rates.Gamma_minus + rates.gamma_minus, rel=0.2)


def test_emission_spectrum_matches_direct_solve(single_dot):
    """Factored resolvent agrees with a dense solve away from the laser line"""
    params = single_dot.replace(P_laser=1e-10)
    pumps = IncoherentPumps(P1=1e-3 * params.gamma)
    omega = np.array([-15.0, -4.0, 3.0, 12.0])
    spectrum = emission_spectrum(params, omega, pumps)

    L = system_liouvillian(params, pumps)
    rho = steady_state(L)
    a = annihilator(L.layout)
    seed = (a.matrix - expectation(a, rho) * np.eye(L.layout.total_dim)) @ rho.matrix
    left = a.dag().matrix.T.reshape(-1, order="F")
    for value, w in zip(spectrum, omega / HBAR):
        y = np.linalg.solve(1j * w * np.eye(L.dim) - L.matrix, seed.reshape(-1, order="F"))
        assert value == pytest.approx(np.real(left @ y), rel=1e-6, abs=1e-12)


def test_emission_spectrum_at_laser_frequency_is_regular(single_dot):
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        spectrum = emission_spectrum(single_dot.replace(P_laser=1e-10), [-1.0, 0.0, 1.0])
    assert np.all(np.isfinite(spectrum))
    assert spectrum[1] > 0


def test_emission_linewidth_of_single_dot():
    """Resonant single dot: Purcell-broadened line of width 4g^2/kappa + gamma"""
    params = load_preset("single-qd").replace(fock_dim=3, P_laser=0.0)
    omega = np.linspace(-40.0, 40.0, 801)
    fwhm = peak_fwhm(omega, emission_spectrum(params, omega))
    assert fwhm == pytest.approx(4.0 * 20.0 ** 2 / 200.0 + 0.6, rel=0.15)


def test_emission_line_of_coupled_identical_dots():
    """Dipole coupling moves the bright line up by Omega12, plus a small cavity pull"""
    params = load_preset("case-b").replace(fock_dim=3, P_laser=0.0)
    omega = np.linspace(-20.0, 80.0, 1001)
    spectrum = emission_spectrum(params, omega)
    main = max(find_peaks(omega, spectrum), key=lambda p: p.height)
    assert main.position == pytest.approx(modes_of(params).plus.position, abs=1.0)
    assert main.position == pytest.approx(params.Omega12, abs=4.0)


def test_emission_linewidth_of_empty_cavity():
    params = Params(g=0.0, fock_dim=4, P_laser=0.0)
    omega = np.linspace(-500.0, 500.0, 2001)
    spectrum = emission_spectrum(params, omega, IncoherentPumps(Pc=0.01))
    assert peak_fwhm(omega, spectrum) == pytest.approx(params.kappa, rel=0.02)


def test_cavity_photon_decays_at_kappa():
    params = Params(g=0.0, fock_dim=3, P_laser=0.0)
    L = system_liouvillian(params)
    one_photon = DensityMatrix.basis_state(L.layout, 1, 0, 0)
    t = np.linspace(0.0, 0.01, 6)
    n = number_op(L.layout)
    photons = [expectation(n, s).real for s in propagate(L, one_photon, t)]
    np.testing.assert_allclose(photons, np.exp(-params.kappa * t / HBAR), rtol=1e-6)


def test_unitary_evolution_keeps_purity():
    params = load_preset("case-d").replace(fock_dim=3, P_laser=1e-9)
    layout = build_layout(params)
    L = liouvillian(hamiltonian(params, layout), [])
    start = DensityMatrix.basis_state(layout, 1, 1, 0)
    for state in propagate(L, start, np.linspace(0.0, 0.3, 7)):
        assert state.purity() == pytest.approx(1.0, abs=1e-6)


def test_vacuum_rabi_oscillation():
    """Lossless resonant dot: P_e(t) = cos^2(g t / hbar)"""
    params = load_preset("single-qd").replace(fock_dim=3, P_laser=0.0)
    layout = build_layout(params)
    L = liouvillian(hamiltonian(params, layout), [])
    excited = DensityMatrix.basis_state(layout, 0, 1, 0)
    t = np.linspace(0.0, np.pi * HBAR / params.g, 11)
    s1 = lowering(layout, 1)
    population = [expectation(s1.dag() @ s1, s).real for s in propagate(L, excited, t)]
    np.testing.assert_allclose(population, np.cos(params.g * t / HBAR) ** 2, atol=1e-6)
