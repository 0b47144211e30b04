"""
TWINDOT Dynamics
Vectorized Liouvillian, steady state, time propagation and regression correlators

Vectorization is column-stacking: vec(A rho B) = (B^T (x) A) vec(rho). The
master equation is rho' = i[rho, H] + sum_k r_k D[c_k] rho with energies in
µeV, so every generator entry is divided by hbar to give ns^-1.
"""

import logging
import time
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, schur, solve_triangular

from .data_models import IncoherentPumps, Params
from .exceptions import LayoutMismatchError, ParameterError, SolverError
from .model import (
    Channel,
    UnitSystem,
    build_layout,
    collapse_ops,
    hamiltonian,
    independent_collapse_ops,
    input_amplitude,
    pump_ops,
    reflected_field,
)
from .qspace import DensityMatrix, Op, SpaceLayout, annihilator, expectation

logger = logging.getLogger(__name__)

HBAR = UnitSystem.HBAR_UEV_NS

STEADY_STATE_RESIDUAL = 1e-9
FOCK_RTOL = 5e-3
FOCK_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Generator of d vec(rho)/dt on a layout, in ns^-1"""
    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        D = self.layout.total_dim ** 2
        if m.shape != (D, D):
            raise ParameterError(f"superoperator shape {m.shape} != ({D}, {D})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, rho: DensityMatrix) -> np.ndarray:
        if rho.layout != self.layout:
            raise LayoutMismatchError("state and generator use different layouts")
        return self.matrix @ rho.vec()

    def trace_row(self) -> np.ndarray:
        """Row vector w with w . vec(rho) = Tr(rho)"""
        return identity_vec(self.layout).conj()

    def trace_error(self) -> float:
        """||vec(1)^dagger L||_inf relative to ||L||_inf"""
        scale = max(np.max(np.abs(self.matrix)), 1e-300)
        return float(np.max(np.abs(self.trace_row() @ self.matrix)) / scale)

    def max_real_eigenvalue(self) -> float:
        return float(np.max(np.linalg.eigvals(self.matrix).real))


def identity_vec(layout: SpaceLayout) -> np.ndarray:
    return np.eye(layout.total_dim, dtype=complex).reshape(-1, order="F")


def _check_channels(H: Op, channels: Sequence[Channel]):
    for rate, c in channels:
        if c.layout != H.layout:
            raise LayoutMismatchError("channel and Hamiltonian use different layouts")
        if rate < 0:
            raise ParameterError(f"negative channel rate {rate}")


def liouvillian(H: Op, channels: Sequence[Channel]) -> Superoperator:
    """
    Build L with d vec(rho)/dt = L vec(rho)

    Args:
        H: Hamiltonian (µeV), laser frame
        channels: (rate in µeV, operator) pairs

    Returns:
        Superoperator in ns^-1
    """
    _check_channels(H, channels)
    d = H.layout.total_dim
    eye = np.eye(d, dtype=complex)
    h = H.matrix

    L = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for rate, c in channels:
        if rate == 0:
            continue
        cm = c.matrix
        cdc = cm.conj().T @ cm
        L += rate * (
            np.kron(cm.conj(), cm)
            - 0.5 * np.kron(eye, cdc)
            - 0.5 * np.kron(cdc.T, eye)
        )
    return Superoperator(H.layout, L / HBAR)


def system_liouvillian(params: Params, pumps: Optional[IncoherentPumps] = None,
                       layout: Optional[SpaceLayout] = None) -> Superoperator:
    """Liouvillian of the full driven system, optionally with incoherent pumps"""
    layout = layout or build_layout(params)
    channels = list(collapse_ops(params, layout))
    if pumps is not None:
        channels.extend(pump_ops(pumps, layout))
    return liouvillian(hamiltonian(params, layout), channels)


def steady_state(L: Superoperator) -> DensityMatrix:
    """
    Unique null vector of L as a density matrix

    Row 0 of L is replaced by the trace functional and the system
    M x = e_0 is LU-solved.

    Raises:
        SolverError: degenerate null space (diagnostics carry a condition
            estimate) or residual above 1e-9 relative.
    """
    start = time.perf_counter()
    layout = L.layout
    M = np.array(L.matrix)
    M[0, :] = L.trace_row()
    rhs = np.zeros(L.dim, dtype=complex)
    rhs[0] = 1.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        with np.errstate(all="ignore"):
            lu, piv = lu_factor(M, check_finite=False)
            x = lu_solve((lu, piv), rhs, check_finite=False)

    pivots = np.abs(np.diag(lu))
    pivot_ratio = float(np.min(pivots) / max(np.max(pivots), 1e-300))
    if not np.all(np.isfinite(x)) or pivot_ratio < 1e-14:
        cond = float(np.linalg.cond(M)) if np.all(np.isfinite(M)) else float("inf")
        raise SolverError(
            "steady state is not unique (singular constrained Liouvillian)",
            {"condition_estimate": cond, "pivot_ratio": pivot_ratio, "dim": L.dim},
        )

    rho = x.reshape((layout.total_dim, layout.total_dim), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    v = rho.reshape(-1, order="F")

    scale = max(np.max(np.abs(L.matrix)), 1e-300)
    residual = float(np.max(np.abs(L.matrix @ v)) / scale)
    if residual > STEADY_STATE_RESIDUAL:
        raise SolverError(
            f"steady-state residual {residual:.3e} above {STEADY_STATE_RESIDUAL:.0e}",
            {
                "residual": residual,
                "condition_estimate": float(np.linalg.cond(M)),
                "dim": L.dim,
            },
        )

    state = DensityMatrix(layout, rho)
    try:
        state.validate()
    except ParameterError as e:
        raise SolverError(f"steady state is not a valid density matrix: {e}",
                          {"residual": residual, "min_eigenvalue": state.min_eigenvalue()})

    logger.debug(
        "steady state solved",
        extra={"dim": L.dim, "residual": residual,
               "seconds": round(time.perf_counter() - start, 4)},
    )
    return state


def steady_state_of(params: Params, pumps: Optional[IncoherentPumps] = None) -> DensityMatrix:
    return steady_state(system_liouvillian(params, pumps))


def evolve_vector(L: Superoperator, v0: np.ndarray, t_grid: Sequence[float],
                  method: str = "RK45", rtol: float = 1e-8, atol: float = 1e-10,
                  max_halvings: int = 4) -> np.ndarray:
    """
    Integrate d v/dt = L v for an arbitrary (not necessarily physical) vector

    Args:
        L: generator
        v0: initial vector at t = 0
        t_grid: non-negative, increasing output times (ns)
        method: "RK45" or "DOP853"
        rtol, atol: integrator tolerances
        max_halvings: retries with the maximum step halved after a failure

    Returns:
        Array of shape (len(t_grid), D)
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ParameterError("t_grid must be a non-empty 1-D sequence")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ParameterError("t_grid must be increasing and start at t >= 0")
    if method not in ("RK45", "DOP853"):
        raise ParameterError(f"unsupported integration method {method!r}")
    v0 = np.asarray(v0, dtype=complex)
    if v0.shape != (L.dim,):
        raise ParameterError(f"initial vector shape {v0.shape} != ({L.dim},)")

    t_end = float(t[-1])
    if t_end == 0.0:
        return np.tile(v0, (t.size, 1))

    # generators couple neighbouring Fock levels only
    M = sparse.csr_matrix(L.matrix)

    def rhs(_t, y):
        return M @ y

    max_step = np.inf
    diagnostics = {}
    for attempt in range(max_halvings + 1):
        sol = solve_ivp(rhs, (0.0, t_end), v0, method=method, t_eval=t,
                        rtol=rtol, atol=atol, max_step=max_step)
        if sol.success:
            if attempt:
                logger.debug("propagation succeeded after %d step halvings", attempt)
            return sol.y.T
        diagnostics = {
            "reason": sol.message,
            "nfev": int(sol.nfev),
            "t_reached": float(sol.t[-1]) if sol.t.size else 0.0,
            "max_step": float(max_step),
            "attempts": attempt + 1,
        }
        logger.warning("propagation failed, halving max step", extra=diagnostics)
        max_step = (t_end if np.isinf(max_step) else max_step) / 2.0

    raise SolverError("time propagation failed", diagnostics)


def propagate(L: Superoperator, rho0: DensityMatrix, t_grid: Sequence[float],
              method: str = "RK45") -> List[DensityMatrix]:
    """
    Density matrices rho(t_k) evolved from rho0 at t = 0

    Raises:
        SolverError: integrator failure or trace drift above 1e-7
    """
    if rho0.layout != L.layout:
        raise LayoutMismatchError("initial state and generator use different layouts")
    ys = evolve_vector(L, rho0.vec(), t_grid, method=method)
    states = [DensityMatrix.from_vec(L.layout, y) for y in ys]
    drift = max(abs(s.trace() - rho0.trace()) for s in states)
    if drift > 1e-7:
        raise SolverError(f"trace drifted by {drift:.3e} during propagation",
                          {"trace_drift": float(drift)})
    return states


def two_time_correlation(L: Superoperator, rho_ss: DensityMatrix, A: Op, B: Op,
                         tau_grid: Sequence[float], C: Optional[Op] = None,
                         method: str = "RK45") -> np.ndarray:
    """
    Regression correlator Tr[A e^{L tau}(B rho_ss C)]

    With C omitted this is <A(tau) B(0)>. With C = B^dagger-type operators it
    gives intensity correlations, e.g. A = a+a, B = a, C = a+ gives
    <a+(0) a+a(tau) a(0)>.

    Returns:
        complex array over tau_grid
    """
    for op in (A, B) + ((C,) if C is not None else ()):
        if op.layout != L.layout:
            raise LayoutMismatchError("operator and generator use different layouts")
    if rho_ss.layout != L.layout:
        raise LayoutMismatchError("state and generator use different layouts")

    seed = B.matrix @ rho_ss.matrix
    if C is not None:
        seed = seed @ C.matrix
    ys = evolve_vector(L, seed.reshape(-1, order="F"), tau_grid, method=method)
    # Tr(A X) = sum_ij A_ij X_ji = vec(A^T) . vec(X)
    left = A.matrix.T.reshape(-1, order="F")
    return ys @ left


def g2_reflected(params: Params, tau_grid: Sequence[float],
                 method: str = "RK45") -> np.ndarray:
    """
    Normalized intensity correlation of the reflected field

    g2(tau) = <a_out+(0) a_out+ a_out(tau) a_out(0)> / <a_out+ a_out>^2

    Raises:
        ParameterError: no drive (zero input amplitude)
        SolverError: reflected intensity vanishes
    """
    if input_amplitude(params) == 0.0:
        raise ParameterError("g2 of the reflected field needs a driven cavity")
    layout = build_layout(params)
    L = system_liouvillian(params, layout=layout)
    rho = steady_state(L)
    a_out = reflected_field(params, layout)
    n_out = a_out.dag() @ a_out

    intensity = float(np.real(expectation(n_out, rho)))
    floor = 1e-14 * input_amplitude(params) ** 2
    if intensity <= floor:
        raise SolverError(
            "reflected intensity vanishes; g2 is undefined",
            {"intensity": intensity, "floor": floor},
        )
    G2 = two_time_correlation(L, rho, n_out, a_out, tau_grid, C=a_out.dag(), method=method)
    imag = float(np.max(np.abs(G2.imag))) / intensity ** 2
    if imag > 1e-6:
        logger.warning("g2 carries an imaginary residue", extra={"imag_residue": imag})
    return G2.real / intensity ** 2


def default_spectrum_pumps(params: Params) -> IncoherentPumps:
    """Weak incoherent dot pumping that seeds the emission spectrum"""
    p = 1e-3 * params.gamma
    return IncoherentPumps(P1=p, P2=p if params.n_emitters == 2 else 0.0)


def emission_spectrum(params: Params, omega_grid: Sequence[float],
                      pumps: Optional[IncoherentPumps] = None) -> np.ndarray:
    """
    Cavity spectral function S(omega) = Re int_0^inf e^{-i(omega-omega_L)tau} <a+(tau) a(0)> dtau

    The regression seed is (a - <a>) rho_ss so the coherent part is removed.
    The Laplace transform is taken exactly:
    S = Re Tr[a+ (i w - L)^-1 vec(seed)] with w = (omega - omega_L)/hbar.
    The seed is traceless, so L may be replaced by L - |rho_ss><1|, which
    moves the null eigenvalue to -1 and leaves the solution unchanged. That
    matrix is Schur-factored once and each frequency costs one triangular solve.

    Args:
        params: system parameters; the laser is included only if P_laser > 0
        omega_grid: absolute frequencies (µeV)
        pumps: incoherent pumps; defaults to default_spectrum_pumps(params)

    Returns:
        S(omega) in ns (arbitrary normalization)
    """
    pumps = pumps or default_spectrum_pumps(params)
    layout = build_layout(params)
    L = system_liouvillian(params, pumps, layout)
    rho = steady_state(L)
    a = annihilator(layout)
    alpha = expectation(a, rho)
    seed = (a.matrix - alpha * np.eye(layout.total_dim)) @ rho.matrix
    x = seed.reshape(-1, order="F")
    left = a.dag().matrix.T.reshape(-1, order="F")

    start = time.perf_counter()
    T, Z = schur(L.matrix - np.outer(rho.vec(), L.trace_row()), output="complex")
    z0 = Z.conj().T @ x
    left_z = left @ Z
    eye = np.eye(L.dim, dtype=complex)

    out = np.empty(len(omega_grid))
    for k, omega in enumerate(omega_grid):
        w = (omega - params.omega_L) / HBAR
        y = solve_triangular(1j * w * eye - T, z0, check_finite=False)
        out[k] = float(np.real(left_z @ y))
    logger.debug("emission spectrum solved",
                 extra={"dim": L.dim, "points": len(out),
                        "seconds": round(time.perf_counter() - start, 4)})
    return out


def fock_converged(value, value_next, rtol: float = FOCK_RTOL,
                   atol: float = FOCK_ATOL) -> bool:
    """True when every component changes by at most rtol*|x| + atol between N and N+2"""
    x = np.atleast_1d(np.asarray(value, dtype=float))
    y = np.atleast_1d(np.asarray(value_next, dtype=float))
    return bool(np.all(np.abs(y - x) <= rtol * np.abs(x) + atol))


def check_fock_convergence(observable: Callable[[Params], object], params: Params):
    """
    Evaluate an observable at fock_dim and fock_dim + 2

    Returns:
        (value at fock_dim, value at fock_dim + 2, converged)
    """
    value = observable(params)
    value_next = observable(params.replace(fock_dim=params.fock_dim + 2))
    return value, value_next, fock_converged(value, value_next)


def relative_residual(L: Superoperator, rho: DensityMatrix) -> float:
    scale = max(np.max(np.abs(L.matrix)), 1e-300)
    return float(np.max(np.abs(L.apply(rho))) / scale)


def property_report(params: Params, settle_time: Optional[float] = None) -> Dict[str, float]:
    """
    Solver property checks for one parameter set, at params.fock_dim

    Steady-state residual, trace and positivity; the collective and
    independent dissipators compared with the dipole coupling switched off;
    and the steady state compared with the state propagated from |0,g,g>
    under the same generator for settle_time (default 50 hbar/gamma).
    """
    L = system_liouvillian(params)
    rho = steady_state(L)
    report = {
        "residual": relative_residual(L, rho),
        "trace_error": abs(rho.trace() - 1.0),
        "min_eigenvalue": rho.min_eigenvalue(),
        "generator_trace_error": L.trace_error(),
    }

    # the two dissipators coincide only without gamma12
    uncoupled = params.replace(Omega12=0.0, gamma12=0.0)
    layout = build_layout(uncoupled)
    H = hamiltonian(uncoupled, layout)
    collective = liouvillian(H, collapse_ops(uncoupled, layout)).matrix
    independent = liouvillian(H, independent_collapse_ops(uncoupled, layout)).matrix
    report["dissipator_difference"] = float(
        np.max(np.abs(collective - independent)) / max(np.max(np.abs(independent)), 1e-300)
    )

    t_end = settle_time if settle_time is not None else 50.0 * HBAR / max(params.gamma, 1e-12)
    ground = DensityMatrix.basis_state(L.layout, 0, 0, 0)
    final = propagate(L, ground, [0.0, t_end])[-1]
    report["propagation_distance"] = final.trace_distance(rho)
    return report
