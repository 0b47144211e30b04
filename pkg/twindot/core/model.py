"""
TWINDOT Physical Model
Units, dipole-dipole rates, drive amplitude, Hamiltonian and collapse channels
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data_models import IncoherentPumps, Params
from .exceptions import LayoutMismatchError, ParameterError
from .qspace import (
    Op,
    SpaceLayout,
    annihilator,
    antisymmetric_lowering,
    identity,
    lowering,
    number_op,
    symmetric_lowering,
)

logger = logging.getLogger(__name__)

PRESET_DIRECTORY = Path(__file__).parent.parent / "data" / "presets"

Channel = Tuple[float, Op]


class UnitSystem:
    """
    Conversions between the internal units (µeV for energies and rates,
    ns for time) and SI quantities
    """

    HBAR_UEV_NS = 0.6582119569  # µeV ns
    HBAR_UEV_S = 6.582119569e-10  # µeV s
    HBAR_EV_S = 6.582119569e-16  # eV s
    ELEMENTARY_CHARGE = 1.602176634e-19  # J per eV
    HC_EV_NM = 1239.841984  # eV nm

    @classmethod
    def ueV_to_per_ns(cls, energy_ueV: float) -> float:
        return energy_ueV / cls.HBAR_UEV_NS

    @classmethod
    def per_ns_to_ueV(cls, rate_per_ns: float) -> float:
        return rate_per_ns * cls.HBAR_UEV_NS

    @classmethod
    def photon_energy_eV(cls, wavelength_nm: float) -> float:
        if wavelength_nm <= 0:
            raise ParameterError(f"wavelength must be positive, got {wavelength_nm}")
        return cls.HC_EV_NM / wavelength_nm

    @classmethod
    def photon_flux(cls, power_W: float, photon_energy_eV: float) -> float:
        """Photons per second carried by a beam of the given power"""
        return power_W / (photon_energy_eV * cls.ELEMENTARY_CHARGE)


def dipole_coupling(d: float, lambda0: float, n_medium: float,
                    gamma: float) -> Tuple[float, float]:
    """
    Coherent and incoherent dipole-dipole rates of two parallel dipoles

    F(x) = -(3/4) e^{ix} [1/x + i/x^2 - 1/x^3], x = k d, k = 2 pi n / lambda0.
    Omega12 = Re{gamma F}; gamma12 = -2 Im{gamma F}, normalised so that
    gamma12 -> gamma as kd -> 0 (a -1/2 prefactor would give gamma/4).

    Args:
        d: dot separation (nm)
        lambda0: vacuum wavelength (nm)
        n_medium: refractive index
        gamma: single-dot free-space decay (µeV)

    Returns:
        (Omega12, gamma12) in µeV
    """
    if not d > 0:
        raise ParameterError(f"separation must be positive, got d={d}")
    if lambda0 <= 0 or n_medium <= 0:
        raise ParameterError("wavelength and refractive index must be positive")
    x = 2.0 * np.pi * n_medium / lambda0 * d
    with np.errstate(all="ignore"):
        F = -0.75 * np.exp(1j * x) * (1.0 / x + 1j / x ** 2 - 1.0 / x ** 3)
    if not np.isfinite(F):
        raise ParameterError(f"dipole coupling diverges at kd={x:.3e}")
    Omega12 = float(np.real(gamma * F))
    gamma12 = float(-2.0 * np.imag(gamma * F))
    return Omega12, gamma12


def pump_amplitude(P_laser: float, kappa: float, photon_energy_eV: float) -> float:
    """
    Drive amplitude E_p = hbar sqrt((kappa / 2 hbar) P / (hbar omega_L))

    Args:
        P_laser: incident power (W), >= 0
        kappa: cavity loss rate (µeV); kappa/2 is the input-mirror rate
        photon_energy_eV: laser photon energy (eV)

    Returns:
        E_p in µeV
    """
    if P_laser < 0:
        raise ParameterError(f"laser power must be non-negative, got {P_laser}")
    if kappa <= 0 or photon_energy_eV <= 0:
        raise ParameterError("kappa and photon energy must be positive")
    if P_laser == 0:
        return 0.0
    rate_per_s = 0.5 * kappa / UnitSystem.HBAR_UEV_S
    flux = UnitSystem.photon_flux(P_laser, photon_energy_eV)
    return float(UnitSystem.HBAR_UEV_S * np.sqrt(rate_per_s * flux))


def drive_amplitude(params: Params) -> float:
    """E_p for a parameter set, injected through the left mirror"""
    if params.P_laser == 0:
        return 0.0
    if params.kappa_left <= 0:
        raise ParameterError("a driven cavity needs kappa_left > 0")
    return pump_amplitude(
        params.P_laser,
        2.0 * params.kappa_left,
        UnitSystem.photon_energy_eV(params.lambda0),
    )


def input_amplitude(params: Params) -> float:
    """Input field amplitude alpha_in with E_p = sqrt(kappa_left) alpha_in (µeV^1/2)"""
    if params.kappa_left <= 0:
        raise ParameterError("input amplitude needs kappa_left > 0")
    return drive_amplitude(params) / np.sqrt(params.kappa_left)


def build_layout(params: Params) -> SpaceLayout:
    return SpaceLayout(fock_dim=params.fock_dim)


def _check_params_layout(params: Params, layout: SpaceLayout):
    if layout.fock_dim != params.fock_dim:
        raise LayoutMismatchError(
            f"layout has N={layout.fock_dim} but params.fock_dim={params.fock_dim}"
        )


def hamiltonian(params: Params, layout: SpaceLayout) -> Op:
    """
    Driven Tavis-Cummings Hamiltonian in the laser frame (µeV)

    H = (w1-wL) s1+s1 + (w2-wL) s2+s2 + (wc-wL) a+a
        + i sqrt(2) g (a+ S - a S+) + Omega12 (s1+ s2 + s1 s2+) - i E_p (a+ - a)

    with S = (s1 + s2)/sqrt(2). For the single-dot reference only dot 1
    couples to the cavity.
    """
    _check_params_layout(params, layout)
    a = annihilator(layout)
    ad = a.dag()
    s1, s2 = lowering(layout, 1), lowering(layout, 2)
    wl = params.omega_L

    H = (params.omega1 - wl) * (s1.dag() @ s1)
    H = H + (params.omega2 - wl) * (s2.dag() @ s2)
    H = H + (params.omega_c - wl) * number_op(layout)

    if params.n_emitters == 2:
        S = symmetric_lowering(layout)
        coupling = np.sqrt(2.0) * params.g * (ad @ S - a @ S.dag())
        H = H + 1j * coupling
        H = H + params.Omega12 * (s1.dag() @ s2 + s1 @ s2.dag())
    else:
        H = H + 1j * params.g * (ad @ s1 - a @ s1.dag())

    E_p = drive_amplitude(params)
    if E_p:
        H = H - 1j * E_p * (ad - a)
    return H


def collapse_ops(params: Params, layout: SpaceLayout) -> List[Channel]:
    """
    Lindblad channels as (rate in µeV, operator)

    (kappa, a), (gamma + gamma12, S), (gamma - gamma12, A) and, when
    gamma_star > 0, (gamma_star, s_i+ s_i) for each dot.
    """
    _check_params_layout(params, layout)
    plus_rate = params.gamma + params.gamma12
    minus_rate = params.gamma - params.gamma12
    # round-off from dipole_coupling can leave -1e-17
    if minus_rate < 0 and minus_rate > -1e-12 * max(params.gamma, 1.0):
        minus_rate = 0.0
    if plus_rate < 0 or minus_rate < 0:
        raise ParameterError(
            f"negative collective rate: gamma+gamma12={plus_rate}, gamma-gamma12={minus_rate}"
        )
    channels: List[Channel] = [
        (params.kappa, annihilator(layout)),
        (plus_rate, symmetric_lowering(layout)),
        (minus_rate, antisymmetric_lowering(layout)),
    ]
    if params.gamma_star > 0:
        for which in (1, 2):
            s = lowering(layout, which)
            channels.append((params.gamma_star, s.dag() @ s))
    return channels


def independent_collapse_ops(params: Params, layout: SpaceLayout) -> List[Channel]:
    """Channels with one decay operator per dot, before the collective rearrangement"""
    _check_params_layout(params, layout)
    channels: List[Channel] = [
        (params.kappa, annihilator(layout)),
        (params.gamma, lowering(layout, 1)),
        (params.gamma, lowering(layout, 2)),
    ]
    if params.gamma_star > 0:
        for which in (1, 2):
            s = lowering(layout, which)
            channels.append((params.gamma_star, s.dag() @ s))
    return channels


def pump_ops(pumps: IncoherentPumps, layout: SpaceLayout) -> List[Channel]:
    """
    Incoherent pump channels

    A channel (2P, s+) shifts <s> by -iP in the effective matrix, and
    (2Pc, a+) shifts <a> by +iPc.
    """
    channels: List[Channel] = []
    if pumps.P1 > 0:
        channels.append((2.0 * pumps.P1, lowering(layout, 1).dag()))
    if pumps.P2 > 0:
        channels.append((2.0 * pumps.P2, lowering(layout, 2).dag()))
    if pumps.Pc > 0:
        channels.append((2.0 * pumps.Pc, annihilator(layout).dag()))
    return channels


def reflected_field(params: Params, layout: SpaceLayout) -> Op:
    """
    Reflected-field operator a_out = sqrt(kappa_left) a + alpha_in

    The sign of alpha_in follows the drive term -iE_p(a+ - a), which leaves
    the empty resonant cavity at <a> = -2E_p/kappa, so the symmetric empty
    cavity reflects nothing on resonance.
    """
    _check_params_layout(params, layout)
    alpha = input_amplitude(params)
    return np.sqrt(params.kappa_left) * annihilator(layout) + alpha * identity(layout)


def detuned(params: Params, delta12: float, center: Optional[float] = None,
            **changes) -> Params:
    """
    Place the dots at center +/- delta12

    Args:
        params: base parameters
        delta12: half detuning (omega1 - omega2)/2 (µeV)
        center: mean dot frequency; defaults to the current mean
        changes: further field overrides

    Returns:
        New Params
    """
    c = params.omega_mean if center is None else center
    return params.replace(omega1=c + delta12, omega2=c - delta12, **changes)


def with_separation(params: Params, d: float) -> Params:
    """Derive Omega12 and gamma12 from the dot separation d (nm)"""
    Omega12, gamma12 = dipole_coupling(d, params.lambda0, params.n_medium, params.gamma)
    return params.replace(Omega12=Omega12, gamma12=gamma12)


def list_presets() -> List[str]:
    return sorted(p.stem for p in PRESET_DIRECTORY.glob("*.json"))


def load_preset(name: str) -> Params:
    """
    Load a named parameter preset

    Preset files hold Params fields plus the optional conveniences
    `delta12` (dot placement around `center`, default 0) and `d` (separation
    in nm, converted with dipole_coupling).
    """
    path = PRESET_DIRECTORY / f"{name}.json"
    if not path.exists():
        raise ParameterError(f"unknown preset {name!r}; available: {list_presets()}")
    with open(path, "r") as f:
        data: Dict = json.load(f)
    data.pop("description", None)
    delta12 = data.pop("delta12", None)
    center = data.pop("center", 0.0)
    d = data.pop("d", None)
    params = Params(**data)
    if delta12 is not None:
        params = detuned(params, delta12, center=center)
    if d is not None:
        params = with_separation(params, d)
    logger.debug("loaded preset %s", name)
    return params
