"""
TWINDOT Experiments
Reflectivity and the figure-level scans built on it: spectra, saturation
curves, the detuning-power map, g2 curves and the collective coefficients
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks
from scipy.signal import peak_widths

from .. import __version__
from .data_models import (
    FockPolicy,
    ModeTag,
    Params,
    ScanPoint,
    ScanResult,
    ScanSpec,
)
from .dynamics import fock_converged, g2_reflected, steady_state, system_liouvillian
from .effective import (
    analytic_mode_frequency,
    coeffs_from_modes,
    modes_of,
    munu_analytic,
    tune_to_mode,
)
from .exceptions import ParameterError
from .model import build_layout, detuned, input_amplitude, reflected_field
from .qspace import expectation
from .run_log import RunLogger

logger = logging.getLogger(__name__)


def reflectivity(params: Params) -> float:
    """
    Steady-state reflectivity on the driven mirror

    R = <a_out+ a_out> / |alpha_in|^2 with a_out = sqrt(kappa_left) a + alpha_in.
    The empty symmetric cavity on resonance gives R = 0.

    Raises:
        ParameterError: zero input amplitude
    """
    alpha = input_amplitude(params)
    if alpha == 0.0:
        raise ParameterError("reflectivity needs a non-zero drive (P_laser > 0)")
    layout = build_layout(params)
    rho = steady_state(system_liouvillian(params, layout=layout))
    a_out = reflected_field(params, layout)
    n_out = float(np.real(expectation(a_out.dag() @ a_out, rho)))
    return n_out / alpha ** 2


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    fwhm: float
    prominence: float


def find_peaks(x: Sequence[float], y: Sequence[float],
               min_prominence: float = 0.01) -> List[Peak]:
    """
    Local maxima with parabolic refinement and FWHM at half prominence

    The half-height level is taken against the local baseline (the higher
    of the minima on each side), linearly interpolated.

    Args:
        x: increasing abscissa
        y: ordinate
        min_prominence: prominence threshold as a fraction of max(y) - min(y)

    Returns:
        Peaks in increasing position
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ParameterError("peak search needs matching x, y with at least 3 points")
    span = float(np.max(y) - np.min(y))
    if span == 0.0:
        return []
    idx, props = _scipy_find_peaks(y, prominence=min_prominence * span)
    if idx.size == 0:
        return []
    _, _, left, right = peak_widths(
        y, idx, rel_height=0.5,
        prominence_data=(props["prominences"], props["left_bases"], props["right_bases"]),
    )
    samples = np.arange(x.size)
    x_left = np.interp(left, samples, x)
    x_right = np.interp(right, samples, x)

    peaks = []
    for k, i in enumerate(idx):
        position, height = float(x[i]), float(y[i])
        a, b, c = np.polyfit(x[i - 1:i + 2], y[i - 1:i + 2], 2)
        if a < 0:
            vertex = -b / (2.0 * a)
            if x[i - 1] <= vertex <= x[i + 1]:
                position, height = float(vertex), float(c - b ** 2 / (4.0 * a))
        peaks.append(Peak(position=position, height=height,
                          fwhm=float(x_right[k] - x_left[k]),
                          prominence=float(props["prominences"][k])))
    return peaks


def peak_fwhm(x: Sequence[float], y: Sequence[float]) -> float:
    """FWHM of the most prominent peak"""
    peaks = find_peaks(x, y)
    if not peaks:
        raise ParameterError("no peak found")
    return max(peaks, key=lambda p: p.prominence).fwhm


def p50(powers: Sequence[float], R: Sequence[float], level: float = 0.5) -> Optional[float]:
    """
    Power of the first downward crossing of R = level, interpolated in log P

    Returns:
        Crossing power (W) or None when the curve never crosses
    """
    P = np.asarray(powers, dtype=float)
    R = np.asarray(R, dtype=float)
    for i in range(P.size - 1):
        if R[i] >= level > R[i + 1]:
            t = (R[i] - level) / (R[i] - R[i + 1])
            logp = np.log10(P[i]) + t * (np.log10(P[i + 1]) - np.log10(P[i]))
            return float(10.0 ** logp)
    return None


def dip_fwhm(tau: Sequence[float], g2: Sequence[float]) -> Optional[float]:
    """
    Full width of the antibunching dip

    g2 is even in tau, so the width is twice the delay at which g2 has
    recovered half-way from g2(0) to 1. tau[0] must be 0.
    """
    tau = np.asarray(tau, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if tau[0] != 0.0:
        raise ParameterError("dip width needs tau[0] = 0")
    g0 = g2[0]
    level = g0 + 0.5 * (1.0 - g0)
    for i in range(tau.size - 1):
        if g2[i] < level <= g2[i + 1]:
            t = (level - g2[i]) / (g2[i + 1] - g2[i])
            return float(2.0 * (tau[i] + t * (tau[i + 1] - tau[i])))
    return None


def merge_results(results: Dict[str, ScanResult], kind: str) -> ScanResult:
    """Stack several results with the same columns into one, keyed by a `curve` column"""
    if not results:
        raise ParameterError("nothing to merge")
    columns = next(iter(results.values())).columns
    merged = ScanResult(kind=kind, label=kind, columns=["curve"] + columns,
                        metadata={"curves": {}})
    for label, result in results.items():
        if result.columns != columns:
            raise ParameterError(f"curve {label!r} has columns {result.columns}, expected {columns}")
        merged.metadata["curves"][label] = result.metadata
        for point in result.points:
            merged.points.append(ScanPoint(values={"curve": label, **point.values},
                                           converged=point.converged,
                                           fock_dim=point.fock_dim))
    return merged


class ScanEngine:
    """
    Runs scans point by point with a worker pool

    Each point is solved at the truncation policy of its ScanSpec; results
    come back in grid order whatever the completion order.
    """

    def __init__(self, jobs: int = 1, run_logger: Optional[RunLogger] = None):
        self.jobs = max(1, int(jobs))
        self.run_logger = run_logger

        self.fock_rtol = 5e-3
        self.fock_atol = 1e-6
        self.half_level = 0.5
        self.peak_prominence = 0.01

    def _map(self, fn: Callable, items: Sequence) -> List:
        if self.jobs == 1 or len(items) < 2:
            return [fn(item) for item in items]
        # LAPACK releases the GIL; map keeps input order
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(fn, items))

    def _evaluate(self, observable: Callable[[Params], Any], params: Params,
                  spec: ScanSpec, experiment: str, point: Dict[str, Any]) -> Tuple[Any, bool, int]:
        """
        Observable under the truncation policy

        Returns:
            (value, converged, fock_dim used)
        """
        cache: Dict[int, Any] = {}

        def at(n: int):
            if n not in cache:
                cache[n] = observable(params.replace(fock_dim=n))
            return cache[n]

        n = params.fock_dim
        if not spec.check_convergence:
            return at(n), True, n

        while True:
            converged = fock_converged(at(n), at(n + 2), self.fock_rtol, self.fock_atol)
            if converged or spec.fock_policy == FockPolicy.FIXED or n + 4 > spec.fock_max:
                break
            logger.warning("raising truncation", extra={"experiment": experiment,
                                                        "fock_dim": n + 2})
            if self.run_logger:
                self.run_logger.log_truncation_raised(experiment, n, n + 2)
            n += 2

        if not converged:
            logger.warning("point not converged in truncation",
                           extra={"experiment": experiment, "fock_dim": n})
            if self.run_logger:
                self.run_logger.log_point_unconverged(experiment, point, n)
        return at(n), converged, n

    def _base_metadata(self, spec: ScanSpec, params: Params) -> Dict[str, Any]:
        return {
            "params": params.model_dump(),
            "fock_policy": spec.fock_policy.value,
            "fock_max": spec.fock_max,
            "check_convergence": spec.check_convergence,
            "code_version": __version__,
        }

    @staticmethod
    def _require_axis(spec: ScanSpec, axis: str, secondary: Optional[str] = None):
        if spec.axis != axis:
            raise ParameterError(f"expected sweep axis {axis!r}, got {spec.axis!r}")
        if secondary and spec.secondary_axis != secondary:
            raise ParameterError(f"expected secondary axis {secondary!r}, got {spec.secondary_axis!r}")

    def spectrum_scan(self, spec: ScanSpec) -> ScanResult:
        """
        Reflectivity versus laser frequency at fixed power

        The axis `omega_rel` is omega_L - (omega1 + omega2)/2 in µeV.
        """
        self._require_axis(spec, "omega_rel")
        params = spec.params
        center = params.omega_mean

        def solve(x: float):
            p = params.replace(omega_L=center + x)
            return self._evaluate(reflectivity, p, spec, "spectrum", {"omega_rel": x})

        outcomes = self._map(solve, spec.grid)
        result = ScanResult(
            kind="spectrum",
            label=spec.label,
            columns=["omega_rel_ueV", "reflectivity"],
            metadata=self._base_metadata(spec, params),
        )
        for x, (R, ok, n) in zip(spec.grid, outcomes):
            result.points.append(ScanPoint(values={"omega_rel_ueV": x, "reflectivity": R},
                                           converged=ok, fock_dim=n))

        R = result.column("reflectivity")
        peaks = find_peaks(spec.grid, R, self.peak_prominence) if len(R) >= 3 else []
        result.metadata.update({
            "x_axis": "omega_L - (omega1 + omega2)/2",
            "cavity_at_dot_mean": params.omega_c == center,
            "peaks": [{"position_ueV": pk.position, "height": pk.height, "fwhm_ueV": pk.fwhm}
                      for pk in peaks],
        })
        return result

    def power_scan(self, spec: ScanSpec) -> ScanResult:
        """
        Reflectivity versus laser power with cavity and laser tuned onto the target state
        """
        self._require_axis(spec, "P_laser")
        if spec.target is None:
            raise ParameterError("power scan needs a target state")
        tuned = tune_to_mode(spec.params, spec.target)

        def solve(P: float):
            return self._evaluate(reflectivity, tuned.replace(P_laser=P), spec,
                                  "power", {"P_laser": P})

        outcomes = self._map(solve, spec.grid)
        result = ScanResult(
            kind="power",
            label=spec.label or spec.target.value,
            columns=["P_laser_W", "reflectivity"],
            metadata=self._base_metadata(spec, tuned),
        )
        for P, (R, ok, n) in zip(spec.grid, outcomes):
            result.points.append(ScanPoint(values={"P_laser_W": P, "reflectivity": R},
                                           converged=ok, fock_dim=n))

        R = result.column("reflectivity")
        threshold = p50(spec.grid, R, self.half_level)
        spans = R[0] > self.half_level > R[-1]
        if not spans:
            logger.warning("power grid does not span the saturation transition",
                           extra={"target": spec.target.value, "R_first": R[0], "R_last": R[-1]})
        result.metadata.update({
            "target": spec.target.value,
            "tuned_frequency_ueV": tuned.omega_L,
            "p50_W": threshold,
            "spans_transition": bool(spans),
        })
        return result

    def detuning_power_map(self, spec: ScanSpec) -> ScanResult:
        """
        Reflectivity over (Delta12, P_laser) with omega_c = omega_L on the bare |-''> position
        """
        self._require_axis(spec, "delta12", "P_laser")
        base = spec.params
        center = base.omega_mean
        powers = list(spec.secondary_grid)

        tuned = {}
        for delta in spec.grid:
            p = detuned(base, delta, center=center)
            omega = analytic_mode_frequency(p)
            tuned[delta] = p.replace(omega_c=omega, omega_L=omega)

        pairs = [(delta, P) for delta in spec.grid for P in powers]

        def solve(pair):
            delta, P = pair
            return self._evaluate(reflectivity, tuned[delta].replace(P_laser=P), spec,
                                  "map", {"delta12": delta, "P_laser": P})

        outcomes = self._map(solve, pairs)
        result = ScanResult(
            kind="map",
            label=spec.label,
            columns=["delta12_ueV", "P_laser_W", "reflectivity"],
            metadata=self._base_metadata(spec, base),
        )
        for (delta, P), (R, ok, n) in zip(pairs, outcomes):
            result.points.append(ScanPoint(
                values={"delta12_ueV": delta, "P_laser_W": P, "reflectivity": R},
                converged=ok, fock_dim=n,
            ))

        thresholds = []
        for row, delta in enumerate(spec.grid):
            R_row = [pt.values["reflectivity"]
                     for pt in result.points[row * len(powers):(row + 1) * len(powers)]]
            entry = {"delta12_ueV": delta, "p50_W": p50(powers, R_row, self.half_level)}
            if base.Omega12 != 0:
                entry["mu_squared"] = munu_analytic(delta, base.Omega12)[0] ** 2
            thresholds.append(entry)
        result.metadata["thresholds"] = thresholds
        return result

    def g2_scan(self, spec: ScanSpec) -> ScanResult:
        """
        g2(tau) of the reflected field, cavity and laser matched to the target state
        """
        self._require_axis(spec, "tau")
        params = spec.params
        if spec.target is not None:
            params = tune_to_mode(params, spec.target)
        tau = list(spec.grid)

        g2, ok, n = self._evaluate(lambda p: g2_reflected(p, tau), params, spec,
                                   "g2", {"target": spec.target.value if spec.target else None})
        result = ScanResult(
            kind="g2",
            label=spec.label or (spec.target.value if spec.target else ""),
            columns=["tau_ns", "g2"],
            metadata=self._base_metadata(spec, params),
        )
        for t, value in zip(tau, g2):
            result.points.append(ScanPoint(values={"tau_ns": t, "g2": float(value)},
                                           converged=ok, fock_dim=n))
        result.metadata.update({
            "target": spec.target.value if spec.target else None,
            "g2_zero": float(g2[0]),
            "dip_fwhm_ns": dip_fwhm(tau, g2) if tau[0] == 0.0 else None,
        })
        return result

    def coefficients_scan(self, spec: ScanSpec) -> ScanResult:
        """
        Collective coefficients versus Delta12 from the effective eigenmodes

        With Omega12 = 0 the pair is (|A|, |B|) of the |+-'> states; otherwise
        (|mu|, |nu|) with the closed form alongside.
        """
        self._require_axis(spec, "delta12")
        base = spec.params
        if base.n_emitters != 2:
            raise ParameterError("coefficient scan needs two emitters")
        center = base.omega_mean
        purcell = 8.0 * base.g ** 2 / base.kappa
        with_analytic = base.Omega12 != 0

        columns = ["delta12_ueV", "mu", "nu", "Gamma_minus_ueV", "nc_minus_ratio"]
        if with_analytic:
            columns += ["mu_analytic", "nu_analytic"]

        def solve(delta: float):
            p = detuned(base, delta, center=center)
            mu, nu = coeffs_from_modes(modes_of(p), ModeTag.MINUS)
            values = {"delta12_ueV": delta, "mu": mu, "nu": nu,
                      "Gamma_minus_ueV": mu ** 2 * purcell, "nc_minus_ratio": 2.0 * mu ** 2}
            if with_analytic:
                values["mu_analytic"], values["nu_analytic"] = munu_analytic(delta, base.Omega12)
            return values

        result = ScanResult(
            kind="eigen",
            label=spec.label,
            columns=columns,
            metadata=self._base_metadata(spec, base),
        )
        for values in self._map(solve, spec.grid):
            result.points.append(ScanPoint(values=values))

        Gamma0 = 4.0 * base.g ** 2 / base.kappa
        result.metadata.update({
            "coefficient_names": ["mu", "nu"] if with_analytic else ["A", "B"],
            "crossover_ueV": 0.5 * Gamma0,
            "guides_ueV": [0.5 * Gamma0, Gamma0],
            "check_convergence": False,
        })
        return result


def spectrum_scan(spec: ScanSpec, jobs: int = 1) -> ScanResult:
    return ScanEngine(jobs).spectrum_scan(spec)


def power_scan(spec: ScanSpec, jobs: int = 1) -> ScanResult:
    return ScanEngine(jobs).power_scan(spec)


def detuning_power_map(spec: ScanSpec, jobs: int = 1) -> ScanResult:
    return ScanEngine(jobs).detuning_power_map(spec)


def g2_scan(spec: ScanSpec, jobs: int = 1) -> ScanResult:
    return ScanEngine(jobs).g2_scan(spec)


def coefficients_scan(spec: ScanSpec, jobs: int = 1) -> ScanResult:
    return ScanEngine(jobs).coefficients_scan(spec)
