"""
Tests for the effective linear model and collective-state quantities
"""

import numpy as np
import pytest

from twindot.core.data_models import IncoherentPumps, ModeTag, Params, TargetState
from twindot.core.effective import (
    EffectiveMatrix,
    analytic_mode_frequency,
    build_effective,
    coeffs_from_modes,
    collective_rates,
    eigenmodes,
    emission_decomposition,
    modes_of,
    munu_analytic,
    tune_to_mode,
)
from twindot.core.exceptions import ParameterError, SolverError
from twindot.core.model import detuned, load_preset


def test_effective_matrix_layout():
    params = detuned(Params(Omega12=31.0, gamma12=0.5), 20.0)
    M = build_effective(params, IncoherentPumps(P1=0.1, Pc=0.2)).matrix
    assert M[0, 0] == pytest.approx(20.0 - 0.3j - 0.1j)
    assert M[1, 1] == pytest.approx(-20.0 - 0.3j)
    assert M[2, 2] == pytest.approx(-100.0j + 0.2j)
    assert M[0, 1] == M[1, 0] == pytest.approx(31.0 - 0.25j)
    assert M[0, 2] == pytest.approx(-20.0j)
    assert M[2, 0] == pytest.approx(20.0j)


def test_single_dot_matrix_decouples_dot_two():
    M = build_effective(load_preset("single-qd")).matrix
    assert M[1, 2] == 0.0
    assert M[2, 1] == 0.0
    assert M[0, 1] == 0.0


def test_dark_state_of_resonant_coupled_pair():
    """Identical dots: the antisymmetric state is an exact mode at -Omega12"""
    modes = modes_of(load_preset("case-b"))
    minus = modes.minus
    assert minus.position == pytest.approx(-31.0, abs=1e-9)
    assert minus.linewidth == pytest.approx(0.6 - 0.596, abs=1e-9)
    assert abs(minus.symmetric) < 1e-9
    assert minus.cavity_weight < 1e-18


def test_mode_classification():
    modes = modes_of(load_preset("case-d"))
    assert {m.tag for m in modes.modes} == {ModeTag.PLUS, ModeTag.MINUS, ModeTag.CAVITY}
    assert modes.cavity.cavity_weight > max(m.cavity_weight for m in modes.excitonic)
    assert abs(modes.plus.symmetric) > abs(modes.plus.antisymmetric)
    assert abs(modes.minus.antisymmetric) > abs(modes.minus.symmetric)
    for mode in modes.modes:
        assert np.linalg.norm(mode.vector) == pytest.approx(1.0)
        assert mode.linewidth > 0


def test_phase_convention_symmetric_projection_real():
    for mode in modes_of(load_preset("case-d")).modes:
        s = mode.symmetric
        assert abs(s.imag) < 1e-12
        assert s.real >= 0


def test_defective_matrix_raises():
    jordan = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 5.0]], dtype=complex)
    with pytest.raises(SolverError) as info:
        eigenmodes(EffectiveMatrix(params=Params(), pumps=IncoherentPumps(), matrix=jordan))
    assert "eigvec_condition" in info.value.diagnostics


def test_munu_analytic_values():
    mu, nu = munu_analytic(20.0, 31.0)
    assert 2.0 * mu ** 2 == pytest.approx(0.1597, abs=5e-4)
    assert 2.0 * nu ** 2 == pytest.approx(1.840, abs=5e-4)
    assert mu ** 2 + nu ** 2 == pytest.approx(1.0)


def test_munu_analytic_limits():
    assert munu_analytic(0.0, 31.0) == pytest.approx((0.0, 1.0))
    mu, nu = munu_analytic(1e6, 31.0)
    assert mu == pytest.approx(np.sqrt(0.5), abs=1e-4)
    assert munu_analytic(-20.0, 31.0) == pytest.approx(munu_analytic(20.0, 31.0))
    with pytest.raises(ParameterError):
        munu_analytic(20.0, 0.0)


def test_coefficients_of_dark_state():
    mu, nu = coeffs_from_modes(modes_of(load_preset("case-b")), ModeTag.MINUS)
    assert mu == pytest.approx(0.0, abs=1e-9)
    assert nu == pytest.approx(1.0)


def test_coefficients_rejected_for_cavity_mode():
    with pytest.raises(ParameterError):
        coeffs_from_modes(modes_of(load_preset("case-d")), ModeTag.CAVITY)


def test_collective_rates_case_d():
    rates = collective_rates(load_preset("case-d"))
    assert rates.analytic
    assert rates.Gamma0 == pytest.approx(8.0)
    assert rates.Gamma_plus_resonant == pytest.approx(16.0)
    assert rates.Gamma_minus == pytest.approx(1.278, abs=2e-3)
    assert rates.nc0 == pytest.approx(1.125e-4)
    assert rates.nc_plus == pytest.approx(2.25e-4)
    assert rates.nc_minus == pytest.approx(0.1597 * 1.125e-4, rel=1e-3)
    assert rates.g_minus ** 2 + rates.g_plus ** 2 == pytest.approx(2.0 * 20.0 ** 2)
    assert rates.nc_minus_exact == pytest.approx(
        rates.mu ** 2 * (0.6 + 0.596) ** 2 / (16.0 * 400.0))


@pytest.mark.parametrize("delta, expected", [(3.0, 0.0372), (50.0, 3.785)])
def test_gamma_minus_versus_detuning(delta, expected):
    params = detuned(load_preset("case-d"), delta)
    assert collective_rates(params).Gamma_minus == pytest.approx(expected, rel=2e-3)


def test_collective_rates_numeric_path():
    """Without dipole-dipole coupling mu, nu come from the eigenmodes"""
    rates = collective_rates(load_preset("case-c"))
    assert not rates.analytic
    assert rates.mu ** 2 + rates.nu ** 2 == pytest.approx(1.0)


def test_collective_rates_need_two_emitters():
    with pytest.raises(ParameterError):
        collective_rates(load_preset("single-qd"))


def test_emission_decomposition():
    mu, nu = munu_analytic(20.0, 31.0)
    branches = {b.label: b for b in emission_decomposition(mu, nu, 0.6, 0.596)}
    assert branches["antisymmetric"].rate == pytest.approx(0.0955, abs=5e-4)
    assert branches["symmetric"].weight + branches["antisymmetric"].weight == pytest.approx(1.0)
    assert branches["cross"].weight == pytest.approx(mu * nu)
    with pytest.raises(ParameterError):
        emission_decomposition(0.5, 0.5, 0.6, 0.596)


def test_tune_single_dot_on_resonance():
    tuned = tune_to_mode(load_preset("single-qd"), TargetState.SINGLE_QD)
    assert tuned.omega_L == pytest.approx(0.0, abs=1e-6)
    assert tuned.omega_c == tuned.omega_L


def test_tune_to_minus_state():
    params = load_preset("case-d")
    tuned = tune_to_mode(params, TargetState.MINUS_DD)
    assert tuned.omega_c == tuned.omega_L
    assert tuned.omega_L == pytest.approx(analytic_mode_frequency(params), abs=2.0)
    assert tune_to_mode(tuned, TargetState.MINUS_DD).omega_L == pytest.approx(tuned.omega_L, abs=1e-5)


def test_tune_to_plus_state_lies_above_minus():
    params = load_preset("case-d")
    plus = tune_to_mode(params, TargetState.PLUS_DD).omega_L
    minus = tune_to_mode(params, TargetState.MINUS_DD).omega_L
    assert plus > 0 > minus


def test_tune_rejects_wrong_emitter_count():
    with pytest.raises(ParameterError):
        tune_to_mode(load_preset("case-d"), TargetState.SINGLE_QD)
    with pytest.raises(ParameterError):
        tune_to_mode(load_preset("single-qd"), TargetState.MINUS_DD)


def test_analytic_mode_frequency():
    params = load_preset("case-d")
    assert analytic_mode_frequency(params) == pytest.approx(-np.hypot(20.0, 31.0))


def test_numeric_coefficients_follow_closed_form():
    """The cavity barely perturbs mu, nu of the dipole-coupled pair"""
    base = load_preset("case-b")
    for delta in np.linspace(0.0, 50.0, 11):
        params = detuned(base, float(delta))
        mu, nu = coeffs_from_modes(modes_of(params), ModeTag.MINUS)
        mu_exact, nu_exact = munu_analytic(float(delta), 31.0)
        assert mu == pytest.approx(mu_exact, abs=0.02)
        assert nu == pytest.approx(nu_exact, abs=0.02)


def test_crossover_without_dipole_coupling():
    """Far detuned dots decouple into equal-weight superpositions; near resonance |A> stays dark"""
    base = load_preset("paper-default")
    for delta in (40.0, 50.0):
        A, B = coeffs_from_modes(modes_of(detuned(base, delta)), ModeTag.MINUS)
        assert A == pytest.approx(np.sqrt(0.5), abs=0.02)
        assert B == pytest.approx(np.sqrt(0.5), abs=0.02)
    for delta in (0.5, 1.0, 2.0):
        _, B = coeffs_from_modes(modes_of(detuned(base, delta)), ModeTag.MINUS)
        assert B > 0.9


def test_bright_and_dark_linewidths_of_identical_dots():
    """Identical uncoupled dots: the bright mode is cavity-enhanced, the dark one decays at gamma"""
    modes = modes_of(load_preset("case-a"))
    assert modes.plus.linewidth == pytest.approx(8.0 * 20.0 ** 2 / 200.0 + 0.6, rel=0.15)
    assert modes.minus.linewidth == pytest.approx(0.6, rel=1e-6)


def test_detuned_uncoupled_dots_share_the_purcell_rate():
    modes = modes_of(load_preset("case-c"))
    gamma0 = collective_rates(load_preset("case-c")).Gamma0
    for mode in modes.excitonic:
        assert mode.linewidth == pytest.approx(gamma0, rel=0.15)


@pytest.mark.parametrize("delta", [0.0, 10.0, 20.0, 50.0])
def test_excitonic_splitting(delta):
    params = detuned(load_preset("case-b"), delta)
    modes = modes_of(params)
    split = abs(modes.plus.position - modes.minus.position)
    assert split == pytest.approx(2.0 * np.hypot(delta, 31.0), rel=0.05)


def test_lossless_matrix_is_hermitian():
    params = Params(gamma=0.0, kappa_left=0.0, kappa_right=0.0,
                    omega1=20.0, omega2=-20.0, Omega12=31.0)
    M = build_effective(params).matrix
    np.testing.assert_allclose(M, M.conj().T, atol=1e-12)
    for mode in modes_of(params).modes:
        assert abs(mode.frequency.imag) < 1e-9


@pytest.mark.parametrize("preset", ["paper-default", "case-a", "case-b", "case-c",
                                    "case-d", "case-e", "single-qd"])
def test_unpumped_modes_decay(preset):
    for mode in modes_of(load_preset(preset)).modes:
        assert mode.frequency.imag <= 1e-12


def test_mu_grows_with_detuning():
    deltas = np.linspace(0.0, 50.0, 51)
    mu, nu = np.array([munu_analytic(float(d), 31.0) for d in deltas]).T
    assert np.all(np.diff(mu) > 0)
    assert np.all(np.diff(nu) < 0)
    assert np.all((mu >= 0) & (nu <= 1))
