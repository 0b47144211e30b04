"""
TWINDOT Effective Linear Model
Eigenmodes of the 3x3 non-Hermitian matrix acting on (<s1>, <s2>, <a>)
and the collective-state quantities derived from them

Valid in the linear regime (<sigma_z> ~ -1). Modes evolve as e^{-i lambda t};
position = Re lambda, linewidth (FWHM) = -2 Im lambda.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eig

from .data_models import (
    CollectiveRates,
    EmissionBranch,
    IncoherentPumps,
    ModeTag,
    Params,
    TargetState,
)
from .exceptions import ConvergenceError, ParameterError, SolverError

logger = logging.getLogger(__name__)

EIGVEC_CONDITION_LIMIT = 1e12
TUNING_MAX_ITERATIONS = 8
TUNING_TOLERANCE = 1e-6  # µeV
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class EffectiveMatrix:
    params: Params
    pumps: IncoherentPumps
    matrix: np.ndarray


@dataclass(frozen=True)
class EffectiveMode:
    """One eigenmode; vector is unit-norm over (s1, s2, a)"""
    tag: ModeTag
    frequency: complex
    vector: np.ndarray

    @property
    def position(self) -> float:
        return float(self.frequency.real)

    @property
    def linewidth(self) -> float:
        return float(-2.0 * self.frequency.imag)

    @property
    def symmetric(self) -> complex:
        """Projection onto (s1 + s2)/sqrt(2)"""
        return complex((self.vector[0] + self.vector[1]) / _SQRT2)

    @property
    def antisymmetric(self) -> complex:
        """Projection onto (s1 - s2)/sqrt(2)"""
        return complex((self.vector[0] - self.vector[1]) / _SQRT2)

    @property
    def cavity_weight(self) -> float:
        return float(abs(self.vector[2]) ** 2)


@dataclass(frozen=True)
class EffectiveModes:
    modes: Tuple[EffectiveMode, EffectiveMode, EffectiveMode]
    params: Params

    def by_tag(self, tag: ModeTag) -> EffectiveMode:
        for mode in self.modes:
            if mode.tag == tag:
                return mode
        raise KeyError(tag)

    @property
    def plus(self) -> EffectiveMode:
        return self.by_tag(ModeTag.PLUS)

    @property
    def minus(self) -> EffectiveMode:
        return self.by_tag(ModeTag.MINUS)

    @property
    def cavity(self) -> EffectiveMode:
        return self.by_tag(ModeTag.CAVITY)

    @property
    def excitonic(self) -> List[EffectiveMode]:
        return [m for m in self.modes if m.tag != ModeTag.CAVITY]


def build_effective(params: Params, pumps: Optional[IncoherentPumps] = None) -> EffectiveMatrix:
    """
    Effective matrix over (s1, s2, a)

        [[w1~,            Omega12 - i gamma12/2, -i g],
         [Omega12 - i gamma12/2, w2~,            -i g],
         [i g,            i g,                   wc~ ]]

    w_j~ = w_j - i gamma/2 - i P_j, wc~ = w_c - i kappa/2 + i P_c. For the
    single-emitter reference dot 2 is decoupled from the cavity and from dot 1.
    """
    pumps = pumps or IncoherentPumps()
    p = params
    w1 = p.omega1 - 0.5j * p.gamma - 1j * pumps.P1
    w2 = p.omega2 - 0.5j * p.gamma - 1j * pumps.P2
    wc = p.omega_c - 0.5j * p.kappa + 1j * pumps.Pc
    dd = p.Omega12 - 0.5j * p.gamma12
    g2 = p.g if p.n_emitters == 2 else 0.0
    M = np.array(
        [
            [w1, dd, -1j * p.g],
            [dd, w2, -1j * g2],
            [1j * p.g, 1j * g2, wc],
        ],
        dtype=complex,
    )
    M.setflags(write=False)
    return EffectiveMatrix(params=params, pumps=pumps, matrix=M)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # symmetric projection real-positive; fall back on the antisymmetric one
    s = (v[0] + v[1]) / _SQRT2
    ref = s if abs(s) > 1e-12 else (v[0] - v[1]) / _SQRT2
    if abs(ref) > 1e-12:
        v = v * (abs(ref) / ref)
    return v


def eigenmodes(M: EffectiveMatrix) -> EffectiveModes:
    """
    Diagonalize and classify the three modes

    The mode with the largest cavity component is CAVITY. Of the other two,
    the one with the larger symmetric fraction is PLUS; on a tie the lower
    real part is MINUS.

    Raises:
        SolverError: eigenvector matrix ill-conditioned (defective matrix)
    """
    values, vectors = eig(M.matrix)
    cond = float(np.linalg.cond(vectors))
    if not np.isfinite(cond) or cond > EIGVEC_CONDITION_LIMIT:
        raise SolverError(
            "effective matrix is defective (exceptional point)",
            {"eigvec_condition": cond, "eigenvalues": [complex(x) for x in values]},
        )
    vectors = vectors / np.linalg.norm(vectors, axis=0)

    cavity_idx = int(np.argmax(np.abs(vectors[2, :])))
    rest = [i for i in range(3) if i != cavity_idx]

    def sym_fraction(i: int) -> float:
        v = vectors[:, i]
        s = abs(v[0] + v[1]) ** 2
        a = abs(v[0] - v[1]) ** 2
        return s / (s + a) if s + a > 0 else 0.0

    f0, f1 = sym_fraction(rest[0]), sym_fraction(rest[1])
    if abs(f0 - f1) > 1e-9:
        plus_idx, minus_idx = (rest[0], rest[1]) if f0 > f1 else (rest[1], rest[0])
    else:
        minus_idx, plus_idx = sorted(rest, key=lambda i: values[i].real)

    tags = {cavity_idx: ModeTag.CAVITY, plus_idx: ModeTag.PLUS, minus_idx: ModeTag.MINUS}
    modes = tuple(
        EffectiveMode(tag=tags[i], frequency=complex(values[i]),
                      vector=_fix_phase(vectors[:, i]))
        for i in range(3)
    )
    return EffectiveModes(modes=modes, params=M.params)


def modes_of(params: Params, pumps: Optional[IncoherentPumps] = None) -> EffectiveModes:
    return eigenmodes(build_effective(params, pumps))


def coeffs_from_modes(modes: EffectiveModes, tag: ModeTag = ModeTag.MINUS) -> Tuple[float, float]:
    """
    Collective coefficients read off one excitonic mode

    |-''> = mu |S> + nu |A> and |+''> = nu |S> - mu |A>, so the MINUS mode
    gives (|s|, |a|) and the PLUS mode (|a|, |s|), normalized pairwise. With
    Omega12 = 0 the same pair is (|A|, |B|) of the |+-'> states.

    Returns:
        (mu, nu)
    """
    if tag == ModeTag.CAVITY:
        raise ParameterError("coefficients are defined for excitonic modes only")
    mode = modes.by_tag(tag)
    s, a = abs(mode.symmetric), abs(mode.antisymmetric)
    norm = np.hypot(s, a)
    if norm == 0.0:
        raise ParameterError(f"{tag.value} mode has no excitonic weight")
    if tag == ModeTag.MINUS:
        return float(s / norm), float(a / norm)
    return float(a / norm), float(s / norm)


def munu_analytic(delta12: float, omega12: float) -> Tuple[float, float]:
    """
    Closed-form coefficients of the dipole-coupled pair, delta = Delta12/Omega12

        mu = delta / sqrt(delta^2 + (1 + sqrt(1 + delta^2))^2)
        nu = (1 + sqrt(1 + delta^2)) / sqrt(delta^2 + (1 + sqrt(1 + delta^2))^2)
    """
    if omega12 == 0:
        raise ParameterError("munu_analytic needs Omega12 != 0; use the numeric path")
    delta = abs(delta12 / omega12)
    root = 1.0 + np.sqrt(1.0 + delta ** 2)
    norm = np.hypot(delta, root)
    return float(delta / norm), float(root / norm)


def collective_rates(params: Params) -> CollectiveRates:
    """
    Couplings, decay rates, linewidths and critical photon numbers of |+-''>

    mu, nu come from munu_analytic when Omega12 != 0 and from the numeric
    eigenmodes otherwise.
    """
    if params.n_emitters != 2:
        raise ParameterError("collective rates need two emitters")
    if params.kappa <= 0:
        raise ParameterError("collective rates need kappa > 0")

    analytic = params.Omega12 != 0
    if analytic:
        mu, nu = munu_analytic(params.delta12, params.Omega12)
    else:
        mu, nu = coeffs_from_modes(modes_of(params), ModeTag.MINUS)

    g, kappa, gamma = params.g, params.kappa, params.gamma
    gamma_sum = gamma + params.gamma12
    purcell = 8.0 * g ** 2 / kappa
    if g > 0:
        nc0 = gamma ** 2 / (8.0 * g ** 2)
        nc_minus_exact = mu ** 2 * gamma_sum ** 2 / (16.0 * g ** 2)
        nc_plus_exact = nu ** 2 * gamma_sum ** 2 / (16.0 * g ** 2)
    else:
        nc0 = nc_minus_exact = nc_plus_exact = float("inf")

    return CollectiveRates(
        mu=mu,
        nu=nu,
        g_minus=mu * _SQRT2 * g,
        g_plus=nu * _SQRT2 * g,
        gamma_minus=mu ** 2 * gamma_sum,
        gamma_plus=nu ** 2 * gamma_sum,
        Gamma_minus=mu ** 2 * purcell,
        Gamma_plus=nu ** 2 * purcell,
        Gamma0=4.0 * g ** 2 / kappa,
        Gamma_plus_resonant=purcell,
        nc0=nc0,
        nc_plus=2.0 * nc0,
        nc_minus=2.0 * mu ** 2 * nc0,
        nc_plus_dd=2.0 * nu ** 2 * nc0,
        nc_minus_exact=nc_minus_exact,
        nc_plus_exact=nc_plus_exact,
        analytic=analytic,
    )


def emission_decomposition(mu: float, nu: float, gamma: float,
                           gamma12: float) -> List[EmissionBranch]:
    """Free-space emission of |-''> split into symmetric, antisymmetric and cross branches"""
    if abs(mu ** 2 + nu ** 2 - 1.0) > 1e-10:
        raise ParameterError("emission decomposition needs mu^2 + nu^2 = 1")
    total = gamma + gamma12
    return [
        EmissionBranch(label="symmetric", weight=nu ** 2, rate=nu ** 2 * total,
                       description="decay through the symmetric branch"),
        EmissionBranch(label="antisymmetric", weight=mu ** 2, rate=mu ** 2 * total,
                       description="decay through the antisymmetric branch"),
        EmissionBranch(label="cross", weight=mu * nu, rate=mu * nu * total,
                       description="coupling between the two branches"),
    ]


def _target_mode(modes: EffectiveModes, target: TargetState) -> EffectiveMode:
    if target == TargetState.SINGLE_QD:
        return max(modes.excitonic, key=lambda m: abs(m.vector[0]))
    if target == TargetState.MINUS_DD:
        return modes.minus
    return modes.plus


def tune_to_mode(params: Params, target: TargetState) -> Params:
    """
    Put cavity and laser on the target mode, omega_c = omega_L = Re(lambda)

    The mode frequency depends on where the cavity sits, so the placement is
    iterated to a fixed point.

    Raises:
        ConvergenceError: no fixed point within 8 iterations
    """
    if target == TargetState.SINGLE_QD and params.n_emitters != 1:
        raise ParameterError("single-qd target needs n_emitters = 1")
    if target != TargetState.SINGLE_QD and params.n_emitters != 2:
        raise ParameterError(f"target {target.value} needs two emitters")

    omega = _target_mode(modes_of(params), target).position
    for iteration in range(TUNING_MAX_ITERATIONS):
        params = params.replace(omega_c=omega, omega_L=omega)
        updated = _target_mode(modes_of(params), target).position
        if abs(updated - omega) < TUNING_TOLERANCE:
            logger.debug("tuned to %s at %.6f µeV after %d iterations",
                         target.value, updated, iteration + 1)
            return params.replace(omega_c=updated, omega_L=updated)
        omega = updated
    raise ConvergenceError(
        f"cavity tuning onto {target.value} did not converge",
        {"last_frequency": omega, "iterations": TUNING_MAX_ITERATIONS},
    )


def analytic_mode_frequency(params: Params) -> float:
    """Bare |-''> position of the dot pair, (w1 + w2)/2 - sqrt(Delta12^2 + Omega12^2)"""
    return params.omega_mean - float(np.hypot(params.delta12, params.Omega12))
