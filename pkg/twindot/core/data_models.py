"""
TWINDOT Data Models
Validated, serializable records for parameters, scans and the run ledger
"""

import math
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Union
from uuid import UUID, uuid4

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModeTag(str, Enum):
    """Classification of an eigenmode of the effective matrix"""
    PLUS = "plus"  # |+'>, |+''>: symmetric-dominated
    MINUS = "minus"  # |-'>, |-''>: antisymmetric-dominated
    CAVITY = "cavity"


class TargetState(str, Enum):
    """State the laser and cavity are tuned onto in power and g2 scans"""
    SINGLE_QD = "single-qd"
    PLUS = "plus"  # |+> of the resonant dipole-coupled pair
    PLUS_DD = "plus-dd"  # |+''>
    MINUS_DD = "minus-dd"  # |-''>


class FockPolicy(str, Enum):
    """How scans treat the cavity truncation"""
    FIXED = "fixed"  # check convergence, never change N
    AUTO = "auto"  # raise N by 2 until converged or fock_max is hit


class Params(BaseModel):
    """
    Physical parameter set

    Every energy and rate is in µeV. Frequencies are absolute, measured from
    an arbitrary common reference; the rotating frame is applied when the
    Hamiltonian is built.
    """
    model_config = ConfigDict(frozen=True, extra="forbid", protected_namespaces=())

    g: float = Field(20.0, ge=0.0, description="Emitter-cavity coupling (µeV)")
    kappa_left: float = Field(100.0, ge=0.0, description="Loss through the driven mirror (µeV)")
    kappa_right: float = Field(100.0, ge=0.0, description="Loss through the far mirror (µeV)")
    kappa_other: float = Field(0.0, ge=0.0, description="Other cavity losses (µeV)")
    gamma: float = Field(0.6, ge=0.0, description="Free-space decay of one dot (µeV)")
    gamma_star: float = Field(0.0, ge=0.0, description="Pure dephasing (µeV)")

    omega1: float = Field(0.0, description="Dot 1 transition frequency (µeV)")
    omega2: float = Field(0.0, description="Dot 2 transition frequency (µeV)")
    omega_c: float = Field(0.0, description="Cavity frequency (µeV)")
    omega_L: float = Field(0.0, description="Laser frequency (µeV)")

    Omega12: float = Field(0.0, description="Coherent dipole-dipole exchange (µeV)")
    gamma12: float = Field(0.0, description="Incoherent dipole-dipole cross decay (µeV)")

    P_laser: float = Field(1e-12, ge=0.0, description="Incident laser power (W)")
    lambda0: float = Field(930.0, gt=0.0, description="Vacuum wavelength (nm)")
    n_medium: float = Field(3.6, gt=0.0, description="Refractive index of the host")

    fock_dim: int = Field(12, ge=2, description="Cavity Fock-space truncation N")
    n_emitters: int = Field(2, ge=1, le=2, description="1 = single-QD reference, 2 = pair")

    @field_validator("omega1", "omega2", "omega_c", "omega_L", "Omega12", "gamma12")
    @classmethod
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("frequencies and rates must be finite")
        return v

    @model_validator(mode="after")
    def validate_collective_rates(self):
        # gamma +/- gamma12 are the rates of the two collective channels
        if abs(self.gamma12) > self.gamma * (1.0 + 1e-12):
            raise ValueError(
                f"|gamma12| = {abs(self.gamma12)} exceeds gamma = {self.gamma}"
            )
        if self.n_emitters == 1 and (self.Omega12 != 0.0 or self.gamma12 != 0.0):
            raise ValueError("single-emitter reference requires Omega12 = gamma12 = 0")
        return self

    @property
    def kappa(self) -> float:
        """Total cavity loss rate"""
        return self.kappa_left + self.kappa_right + self.kappa_other

    @property
    def delta12(self) -> float:
        """Half the dot-dot detuning, (omega1 - omega2) / 2"""
        return 0.5 * (self.omega1 - self.omega2)

    @property
    def omega_mean(self) -> float:
        """Mean dot frequency (omega1 + omega2) / 2"""
        return 0.5 * (self.omega1 + self.omega2)

    def replace(self, **changes) -> "Params":
        """Return a validated copy with some fields changed"""
        data = self.model_dump()
        data.update(changes)
        return Params(**data)


class IncoherentPumps(BaseModel):
    """Incoherent pump strengths (µeV) of dot 1, dot 2 and the cavity"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    P1: float = Field(0.0, ge=0.0)
    P2: float = Field(0.0, ge=0.0)
    Pc: float = Field(0.0, ge=0.0)


class CollectiveRates(BaseModel):
    """
    Derived collective-state quantities

    Rates in µeV, critical photon numbers dimensionless. The plain
    critical photon numbers use gamma12 ~ gamma; the *_exact variants use
    the actual gamma12.
    """
    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., ge=0.0, le=1.0)
    nu: float = Field(..., ge=0.0, le=1.0)
    g_minus: float = Field(..., ge=0.0)
    g_plus: float = Field(..., ge=0.0)
    gamma_minus: float = Field(..., ge=0.0)
    gamma_plus: float = Field(..., ge=0.0)
    Gamma_minus: float = Field(..., ge=0.0)
    Gamma_plus: float = Field(..., ge=0.0)
    Gamma0: float = Field(..., ge=0.0, description="Cavity-enhanced decay 4g^2/kappa")
    Gamma_plus_resonant: float = Field(
        ..., ge=0.0, description="Linewidth contribution of |+> for identical dots, 8g^2/kappa"
    )
    nc0: float = Field(..., ge=0.0)
    nc_plus: float = Field(..., ge=0.0, description="|+> of resonant coupled dots")
    nc_minus: float = Field(..., ge=0.0, description="|-''>")
    nc_plus_dd: float = Field(..., ge=0.0, description="|+''>")
    nc_minus_exact: float = Field(..., ge=0.0)
    nc_plus_exact: float = Field(..., ge=0.0)
    analytic: bool = Field(
        ..., description="True when mu, nu come from the dots-only closed form"
    )

    @model_validator(mode="after")
    def validate_normalization(self):
        if abs(self.mu ** 2 + self.nu ** 2 - 1.0) > 1e-10:
            raise ValueError("mu^2 + nu^2 must equal 1")
        return self


class EmissionBranch(BaseModel):
    """One entry of the free-space emission decomposition"""
    label: str
    weight: float = Field(..., description="Dimensionless prefactor (nu^2, mu^2 or mu*nu)")
    rate: float = Field(..., description="weight * (gamma + gamma12), µeV")
    description: str


class ScanSpec(BaseModel):
    """
    Description of one scan: parameter point, sweep axes and truncation policy
    """
    model_config = ConfigDict(frozen=True, extra="forbid", protected_namespaces=())

    params: Params
    axis: str = Field(..., description="Name of the swept variable")
    grid: List[float]
    secondary_axis: Optional[str] = None
    secondary_grid: Optional[List[float]] = None
    target: Optional[TargetState] = None
    label: str = ""
    fock_policy: FockPolicy = FockPolicy.AUTO
    fock_max: int = Field(20, ge=2)
    check_convergence: bool = True

    @field_validator("grid", "secondary_grid")
    @classmethod
    def validate_grid(cls, v):
        if v is None:
            return v
        if len(v) < 1:
            raise ValueError("grid must contain at least one point")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("grid values must be finite")
        diffs = [b - a for a, b in zip(v, v[1:])]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ValueError("grid must be strictly monotone")
        return v

    @model_validator(mode="after")
    def validate_axes(self):
        if (self.secondary_axis is None) != (self.secondary_grid is None):
            raise ValueError("secondary_axis and secondary_grid go together")
        if self.target == TargetState.SINGLE_QD and self.params.n_emitters != 1:
            raise ValueError("single-qd target needs n_emitters = 1")
        if self.target in (TargetState.PLUS_DD, TargetState.MINUS_DD, TargetState.PLUS) \
                and self.params.n_emitters != 2:
            raise ValueError(f"target {self.target.value} needs two emitters")
        return self


class ScanPoint(BaseModel):
    """One row of a scan; values keyed by column name"""
    values: Dict[str, Union[float, str]]
    converged: bool = True
    fock_dim: Optional[int] = None


class ScanResult(BaseModel):
    """
    Labeled series of points with full provenance

    `metadata` holds everything needed to reproduce the run; `created_at`
    is kept out of CSV output so identical configs give identical files.
    """
    model_config = ConfigDict(protected_namespaces=())

    kind: str
    label: str = ""
    columns: List[str]
    points: List[ScanPoint] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)
    created_at: datetime = Field(default_factory=datetime.utcnow)

    @property
    def all_converged(self) -> bool:
        return all(p.converged for p in self.points)

    def column(self, name: str) -> List[Any]:
        """Values of one column, in point order"""
        if name not in self.columns:
            raise KeyError(f"unknown column {name!r}; have {self.columns}")
        return [p.values[name] for p in self.points]


class RunLogEntry(BaseModel):
    """
    Ledger entry for one run event
    """
    log_id: UUID = Field(default_factory=uuid4)
    timestamp: datetime = Field(default_factory=datetime.utcnow)
    run_id: UUID
    action_type: str = Field(
        ..., description="run_started, run_completed, point_unconverged, truncation_raised, run_failed"
    )
    actor: str = Field(..., description="Component that produced the event")
    experiment: Optional[str] = None
    detail: str = ""
    code_version: str
    metadata: Dict[str, Any] = Field(default_factory=dict)
