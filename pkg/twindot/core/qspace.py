"""
TWINDOT Hilbert Space
Truncated cavity Fock space (x) dot 1 (x) dot 2 and dense operator algebra

Basis ordering is (cavity, dot1, dot2) row-major: the state |n, s1, s2>
with s = 0 (ground) or 1 (excited) sits at index 4*n + 2*s1 + s2.
"""

from dataclasses import dataclass
from typing import Iterator, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import LayoutMismatchError, ParameterError

Number = Union[int, float, complex]

# |g> = index 0, |e> = index 1; sigma = |g><e|
_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_DOT_DIM = 2


class SpaceLayout(BaseModel):
    """Truncated composite space: cavity (fock_dim levels), dot 1, dot 2"""
    model_config = ConfigDict(frozen=True)

    fock_dim: int = Field(..., ge=2, description="Cavity truncation N")

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.fock_dim, _DOT_DIM, _DOT_DIM)

    @property
    def total_dim(self) -> int:
        return self.fock_dim * _DOT_DIM * _DOT_DIM

    def index(self, n: int, s1: int, s2: int) -> int:
        """Basis index of |n, s1, s2>"""
        if not (0 <= n < self.fock_dim and s1 in (0, 1) and s2 in (0, 1)):
            raise ParameterError(f"no basis state ({n}, {s1}, {s2}) for N={self.fock_dim}")
        return (n * _DOT_DIM + s1) * _DOT_DIM + s2

    def labels(self, index: int) -> Tuple[int, int, int]:
        """Inverse of index(): (n_photon, s1, s2)"""
        if not 0 <= index < self.total_dim:
            raise ParameterError(f"index {index} outside 0..{self.total_dim - 1}")
        n, rest = divmod(index, _DOT_DIM * _DOT_DIM)
        s1, s2 = divmod(rest, _DOT_DIM)
        return n, s1, s2

    def basis(self) -> Iterator[Tuple[int, int, int]]:
        for i in range(self.total_dim):
            yield self.labels(i)

    def ket(self, n: int, s1: int, s2: int) -> np.ndarray:
        """Basis vector |n, s1, s2>"""
        v = np.zeros(self.total_dim, dtype=complex)
        v[self.index(n, s1, s2)] = 1.0
        return v


def _check_layout(a: "SpaceLayout", b: "SpaceLayout"):
    if a != b:
        raise LayoutMismatchError(f"layouts differ: N={a.fock_dim} vs N={b.fock_dim}")


@dataclass(frozen=True, eq=False)
class Op:
    """Dense complex operator on a SpaceLayout"""
    layout: SpaceLayout
    matrix: np.ndarray

    # numpy scalars defer to Op.__rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise ParameterError(f"operator shape {m.shape} does not match dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def _other(self, other: "Op") -> np.ndarray:
        if not isinstance(other, Op):
            raise TypeError(f"expected Op, got {type(other).__name__}")
        _check_layout(self.layout, other.layout)
        return other.matrix

    def __add__(self, other: "Op") -> "Op":
        return Op(self.layout, self.matrix + self._other(other))

    def __sub__(self, other: "Op") -> "Op":
        return Op(self.layout, self.matrix - self._other(other))

    def __neg__(self) -> "Op":
        return Op(self.layout, -self.matrix)

    def __mul__(self, scalar: Number) -> "Op":
        if isinstance(scalar, Op):
            raise TypeError("use @ to compose operators")
        return Op(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: Number) -> "Op":
        return Op(self.layout, self.matrix / scalar)

    def __matmul__(self, other: "Op") -> "Op":
        return Op(self.layout, self.matrix @ self._other(other))

    def dag(self) -> "Op":
        """Adjoint"""
        return Op(self.layout, self.matrix.conj().T)

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(vector, dtype=complex)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def allclose(self, other: "Op", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self._other(other), rtol=0.0, atol=atol))


def embed(layout: SpaceLayout, local: np.ndarray, slot: int) -> Op:
    """
    Tensor-embed a single-subsystem operator

    Args:
        layout: target layout
        local: operator on subsystem `slot` (0 = cavity, 1 = dot 1, 2 = dot 2)
        slot: subsystem position in the (cavity, dot1, dot2) order

    Returns:
        1 (x) ... (x) local (x) ... (x) 1
    """
    dims = layout.dims
    if slot not in (0, 1, 2):
        raise ParameterError(f"slot must be 0, 1 or 2, got {slot}")
    local = np.asarray(local, dtype=complex)
    if local.shape != (dims[slot], dims[slot]):
        raise ParameterError(f"local operator shape {local.shape} != {dims[slot]}")
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[slot] = local
    return Op(layout, np.kron(np.kron(factors[0], factors[1]), factors[2]))


def identity(layout: SpaceLayout) -> Op:
    return Op(layout, np.eye(layout.total_dim, dtype=complex))


def annihilator(layout: SpaceLayout) -> Op:
    """Cavity annihilation operator a (x) 1 (x) 1 with <n-1|a|n> = sqrt(n)"""
    n = layout.fock_dim
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1)
    return embed(layout, a, 0)


def creator(layout: SpaceLayout) -> Op:
    return annihilator(layout).dag()


def number_op(layout: SpaceLayout) -> Op:
    """a^dagger a"""
    n = layout.fock_dim
    return embed(layout, np.diag(np.arange(n, dtype=float)), 0)


def lowering(layout: SpaceLayout, which: int) -> Op:
    """sigma_i = |g_i><e_i| for dot `which` in {1, 2}"""
    if which not in (1, 2):
        raise ParameterError(f"dot index must be 1 or 2, got {which!r}")
    return embed(layout, _SIGMA, which)


def raising(layout: SpaceLayout, which: int) -> Op:
    return lowering(layout, which).dag()


def symmetric_lowering(layout: SpaceLayout) -> Op:
    """(sigma_1 + sigma_2) / sqrt(2)"""
    return (lowering(layout, 1) + lowering(layout, 2)) / np.sqrt(2.0)


def antisymmetric_lowering(layout: SpaceLayout) -> Op:
    """(sigma_1 - sigma_2) / sqrt(2)"""
    return (lowering(layout, 1) - lowering(layout, 2)) / np.sqrt(2.0)


def commutator(a: Op, b: Op) -> Op:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    System state on a SpaceLayout

    Construction only checks the shape; validate() checks the physical
    invariants (unit trace, Hermitian, positive semidefinite).
    """
    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.layout.total_dim
        if m.shape != (d, d):
            raise ParameterError(f"state shape {m.shape} does not match dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, layout: SpaceLayout, vector: np.ndarray) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ParameterError("cannot build a state from the zero vector")
        v = v / norm
        return cls(layout, np.outer(v, v.conj()))

    @classmethod
    def basis_state(cls, layout: SpaceLayout, n: int, s1: int, s2: int) -> "DensityMatrix":
        return cls.pure(layout, layout.ket(n, s1, s2))

    @classmethod
    def mixture(cls, states, weights) -> "DensityMatrix":
        states = list(states)
        if not states:
            raise ParameterError("empty mixture")
        layout = states[0].layout
        m = np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
        for state, w in zip(states, weights):
            _check_layout(layout, state.layout)
            m = m + w * state.matrix
        return cls(layout, m)

    @classmethod
    def from_vec(cls, layout: SpaceLayout, vec: np.ndarray) -> "DensityMatrix":
        """Inverse of vec(): column-stacked vector back to a matrix"""
        d = layout.total_dim
        return cls(layout, np.asarray(vec, dtype=complex).reshape((d, d), order="F"))

    def vec(self) -> np.ndarray:
        """Column-stacking vectorization"""
        return self.matrix.reshape(-1, order="F")

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.min(np.linalg.eigvalsh(herm)))

    def trace_distance(self, other: "DensityMatrix") -> float:
        """(1/2) || rho - sigma ||_1"""
        _check_layout(self.layout, other.layout)
        diff = self.matrix - other.matrix
        diff = 0.5 * (diff + diff.conj().T)
        return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))

    def validate(self, trace_tol: float = 1e-9, herm_tol: float = 1e-9,
                 eig_tol: float = 1e-8) -> "DensityMatrix":
        """Raise ParameterError unless the physical invariants hold"""
        if abs(self.trace() - 1.0) > trace_tol:
            raise ParameterError(f"trace {self.trace():.3e} differs from 1")
        if self.hermiticity_error() > herm_tol:
            raise ParameterError(f"state not Hermitian (error {self.hermiticity_error():.3e})")
        if self.min_eigenvalue() < -eig_tol:
            raise ParameterError(f"negative eigenvalue {self.min_eigenvalue():.3e}")
        return self


def expectation(op: Op, rho: DensityMatrix) -> complex:
    """Tr(op rho)"""
    _check_layout(op.layout, rho.layout)
    # Tr(A B) = sum_ij A_ij B_ji
    return complex(np.sum(op.matrix * rho.matrix.T))
