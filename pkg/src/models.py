"""Pydantic models for results, reports and job configuration."""

import math
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config import settings


class Record(BaseModel):
    """Base record: infinities serialise as JSON constants (a determinant may be 0)."""
    model_config = ConfigDict(ser_json_inf_nan="constants", use_enum_values=False)


# ==================== Spectral ====================

class SpectralSummary(Record):
    """Spectrum of one finite section and the data needed to normalise it."""
    eigenvalues: List[float] = Field(..., description="Ascending eigenvalues")
    logdet: float = Field(..., description="Sum of log eigenvalues, -inf with a kernel")
    kernel_dim: int = Field(..., description="Number of eigenvalues with |lambda| <= keps")
    size: int = Field(..., description="Matrix order d*|F|")
    blocks: int = Field(default=1, description="Block count d")
    sites: int = Field(..., description="Følner set size |F|")
    keps: float = Field(default=0.0, description="Numerical-kernel threshold")

    @model_validator(mode="after")
    def _count_matches(self):
        if len(self.eigenvalues) != self.size:
            raise ValueError("eigenvalue count must equal the matrix order")
        return self


class TruncatedProduct(Record):
    """Product of section eigenvalues in (0, kappa], kept in log form."""
    kappa: float
    log_product: float = Field(default=0.0, description="Sum of log lambda over (0, kappa]")
    count: int = Field(default=0, description="Eigenvalues in (0, kappa]")


# ==================== Følner approximation ====================

class Verdict(str, Enum):
    CONVERGED = "converged"
    UPPER_BOUND_ONLY = "upper_bound_only"
    KERNEL_DETECTED = "kernel_detected"


class TracePoint(Record):
    n: int = Field(..., description="Schedule index (box parameter)")
    sites: int = Field(..., description="|F_n|")
    size: int = Field(..., description="Section order d*|F_n|")
    logdet_per_site: float = Field(..., description="log det(g_F) / |F|")
    kernel_dim: int = Field(default=0)
    kernel_fraction: float = Field(default=0.0)
    wall_ms: float = Field(default=0.0, description="Wall time for this point")


class ApproximationTrace(Record):
    """Per-site log-determinants along a Følner schedule and the resulting verdict."""
    operator: str = Field(default="", description="Printed form of the sectioned operator")
    points: List[TracePoint] = Field(default_factory=list)
    running_inf: float = Field(default=float("inf"))
    verdict: Verdict = Verdict.UPPER_BOUND_ONLY
    value: float = Field(default=float("inf"), description="Reported log-determinant")
    est_error: float = Field(default=float("inf"))
    scale: float = Field(default=1.0, description="0.5 when the trace reports det(f) through f*f")
    exact: bool = Field(default=False, description="F = Gamma, no approximation involved")
    slow_convergence: bool = False
    extrapolated: Optional[float] = Field(default=None, description="Opt-in Richardson estimate, never certified")
    warnings: List[str] = Field(default_factory=list)

    @property
    def determinant(self) -> float:
        return math.exp(self.value) if self.value != float("-inf") else 0.0


class KernelPoint(Record):
    n: int
    sites: int
    kernel_dim: int
    fraction: float = Field(..., ge=0.0, le=1.0)


class KernelEstimate(Record):
    """Elek-style kernel fractions dim ker(g_F) / (d |F|)."""
    fractions: List[KernelPoint] = Field(default_factory=list)
    limit_est: float = Field(default=0.0, ge=0.0, le=1.0)
    error: float = Field(default=0.0)


class EpsilonPoint(Record):
    epsilon: float
    value: float
    verdict: Verdict


class TailPoint(Record):
    n: int
    ratio: float = Field(..., description="D_{g,F,kappa}^(-1/|F|)")
    count: int


class TailDiagnostic(Record):
    lam: float
    kappa: Optional[float] = None
    points: List[TailPoint] = Field(default_factory=list)
    passed: bool = False
    message: str = ""


# ==================== Invariants ====================

class QuadratureResult(Record):
    value: float
    error_estimate: float
    grid: int = Field(..., description="Points per axis (or total samples for quasi-random)")
    converged: bool
    method: str = "midpoint"


class EntropyKind(str, Enum):
    FINITE = "finite"
    UPPER_BOUND = "upper_bound"
    INFINITE = "infinite"


class ExactEntropy(Record):
    """(1/|Gamma|) log |coker f_Gamma| for a finite group."""
    group_order: int
    cokernel_order: int = Field(..., description="|det f_Gamma|; 0 for a singular section")
    value: float
    infinite: bool = False


class EntropyResult(Record):
    kind: EntropyKind
    value: float
    est_error: float = 0.0
    method: str = Field(..., description="exact-cokernel or folner")
    kernel_fraction: float = 0.0
    trace: Optional[ApproximationTrace] = None


class ComplexValidation(Record):
    euler: int
    chain_ok: bool


class LevelAcyclicity(Record):
    level: int
    kernel: KernelEstimate
    acyclic: bool


class TorsionLevel(Record):
    level: int
    log_det: float = Field(..., description="log det(f_j* f_j + q_{f_j})")
    est_error: float
    method: str = Field(..., description="direct, adjoint or kernel-cut")
    kernel_fraction: float = 0.0
    converged: bool = True
    flagged: bool = False


class LaplacianLevel(Record):
    level: int
    log_det: float
    est_error: float
    converged: bool = True


class TorsionReport(Record):
    method: str
    per_level: List[TorsionLevel] = Field(default_factory=list)
    rho: float = 0.0
    rho_error: float = 0.0
    laplacian_levels: List[LaplacianLevel] = Field(default_factory=list)
    laplacian_rho: Optional[float] = None
    laplacian_error: Optional[float] = None
    discrepancy: Optional[float] = None
    notes: List[str] = Field(default_factory=list)

    @property
    def interval(self) -> Tuple[float, float]:
        return self.rho - self.rho_error, self.rho + self.rho_error


# ==================== Jobs and reports ====================

class Operation(str, Enum):
    FKDET = "fkdet"
    MAHLER = "mahler"
    ENTROPY = "entropy"
    TORSION = "torsion"
    SPECTRUM = "spectrum"
    SELFTEST = "selftest"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    SVG = "svg"


class JobConfig(Record):
    """One batch job; output locations are excluded from the job hash."""
    operation: Operation
    group: str = Field(default="Z", description="Group spec, e.g. 'Z^2; theta=0.25'")
    expr: Optional[str] = Field(default=None, description="Ring expression or matrix")
    complex_file: Optional[str] = Field(default=None, description="Chain complex file for torsion")
    cap: Optional[int] = Field(default=None, ge=1, description="Largest box parameter")
    tol: float = Field(default_factory=lambda: settings.tol, gt=0)
    theta: Optional[float] = None
    method: str = Field(default="both", description="Torsion method: pseudo, laplacian or both")
    eps_sweep: List[float] = Field(default_factory=list)
    seed: int = 0
    out: str = Field(default="reports", description="Output directory")
    cache_dir: Optional[str] = None
    format: OutputFormat = OutputFormat.JSON

    HASH_EXCLUDE: ClassVar[Set[str]] = {"out", "cache_dir", "format"}

    @field_validator("method")
    @classmethod
    def _known_method(cls, value: str) -> str:
        if value not in {"pseudo", "laplacian", "both"}:
            raise ValueError(f"unknown method {value!r}")
        return value

    @field_validator("eps_sweep")
    @classmethod
    def _decreasing(cls, value: List[float]) -> List[float]:
        if any(e <= 0 for e in value) or any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError("eps_sweep must be strictly decreasing positive values")
        return value

    @model_validator(mode="after")
    def _needs_input(self):
        if self.operation == Operation.TORSION and not self.complex_file:
            raise ValueError("torsion needs complex_file")
        if self.operation not in (Operation.TORSION, Operation.SELFTEST) and not self.expr:
            raise ValueError(f"{self.operation.value} needs expr")
        return self


class ReportValue(Record):
    value: float
    error: float = 0.0


class ReportRecord(Record):
    """Content-addressed record of one job."""
    job_hash: str
    operation: Operation
    group: str
    input: str = ""
    verdict: str
    values: Dict[str, ReportValue] = Field(default_factory=dict)
    details: Dict[str, Any] = Field(default_factory=dict)
    trace_path: Optional[str] = Field(default=None, description="Trace or spectrum CSV, relative to the report directory")
    warnings: List[str] = Field(default_factory=list)
    tool_version: str
    seed: int = 0
    nonconverged: bool = False
    created_at: datetime = Field(default_factory=datetime.now)
    finished_at: Optional[datetime] = None


class CacheConfig(Record):
    """Configuration model for the report cache."""
    cache_dir: str = Field(default_factory=lambda: settings.cache_dir, description="Directory holding the cache database")
    db_name: str = Field(default="reports.sqlite3", description="SQLite file name")
    timeout: float = Field(default=10.0, description="SQLite connection timeout in seconds")

    @property
    def db_path(self) -> str:
        return str(Path(self.cache_dir) / self.db_name)


class SelftestCase(Record):
    name: str
    passed: bool
    detail: str = ""
