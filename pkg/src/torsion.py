"""Finite free chain complexes over Z Gamma, weak acyclicity and L2-torsion.

Boundaries act on row vectors: d_j(x) = x f_j with f_j of shape d_j x d_{j-1}.
"""

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import settings
from src.exceptions import ComplexError, ShapeError
from src.expressions import parse_group, parse_ring_matrix
from src.fk import (
    fk_det_positive,
    kernel_persists,
    map_sections,
    resolve_schedule,
    vn_kernel_dim_positive,
)
from src.groupring import RingMatrix, block_diag, star
from src.groups import GroupDescriptor
from src.logger import get_logger
from src.models import (
    ApproximationTrace,
    ComplexValidation,
    LaplacianLevel,
    LevelAcyclicity,
    TorsionLevel,
    TorsionReport,
    Verdict,
)
from src.restrict import FiniteSection
from src.spectral import eigs_sym

logger = get_logger(__name__)

METHODS = ("pseudo", "laplacian", "both")


@dataclass(frozen=True)
class ChainComplex:
    """0 -> (Z Gamma)^{d_k} -> ... -> (Z Gamma)^{d_0} -> 0 given by f_1, ..., f_k."""
    boundaries: Tuple[RingMatrix, ...]

    def __post_init__(self):
        if not self.boundaries:
            raise ComplexError("A chain complex needs at least one boundary map")
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        group = self.boundaries[0].group
        for j, (lower, upper) in enumerate(zip(self.boundaries, self.boundaries[1:]), start=2):
            if upper.group != group:
                raise ComplexError(f"f_{j} lives over {upper.group}, f_1 over {group}")
            if upper.cols != lower.rows:
                raise ShapeError(f"f_{j} has {upper.cols} columns but f_{j - 1} has {lower.rows} rows")

    @property
    def group(self) -> GroupDescriptor:
        return self.boundaries[0].group

    @property
    def length(self) -> int:
        return len(self.boundaries)

    @property
    def ranks(self) -> List[int]:
        """d_0, ..., d_k."""
        return [self.boundaries[0].cols] + [f.rows for f in self.boundaries]

    def boundary(self, j: int) -> Optional[RingMatrix]:
        """f_j, or None outside 1..k."""
        return self.boundaries[j - 1] if 1 <= j <= self.length else None


def validate_complex(C: ChainComplex) -> ComplexValidation:
    """Euler characteristic sum (-1)^j d_j and exact composition-zero check."""
    euler = sum((-1) ** j * d for j, d in enumerate(C.ranks))
    chain_ok = all((C.boundary(j) @ C.boundary(j - 1)).is_zero() for j in range(2, C.length + 1))
    if not chain_ok:
        logger.warning(f"Boundary composition is not zero for the complex over {C.group}")
    return ComplexValidation(euler=euler, chain_ok=chain_ok)


def laplacians(C: ChainComplex) -> List[RingMatrix]:
    """Combined Laplacians Delta_j = f_{j+1}* f_{j+1} + f_j f_j* for j = 0..k."""
    result = []
    for j, d in enumerate(C.ranks):
        delta = RingMatrix.zeros(C.group, d, d)
        upper, lower = C.boundary(j + 1), C.boundary(j)
        if upper is not None:
            delta = delta + star(upper) @ upper
        if lower is not None:
            delta = delta + lower @ star(lower)
        result.append(delta)
    return result


def direct_sum(C: ChainComplex, D: ChainComplex) -> ChainComplex:
    """Levelwise block-diagonal sum of two complexes of the same length."""
    if C.group != D.group:
        raise ComplexError("Direct sum of complexes over different groups")
    if C.length != D.length:
        raise ComplexError(f"Direct sum needs equal lengths, got {C.length} and {D.length}")
    return ChainComplex(tuple(block_diag(f, g) for f, g in zip(C.boundaries, D.boundaries)))


def weak_acyclicity(
    C: ChainComplex,
    cap: Optional[int] = None,
    points: Optional[Sequence[int]] = None
) -> List[LevelAcyclicity]:
    """
    von Neumann kernel dimension of every combined Laplacian.

    The complex is weakly acyclic exactly when every Delta_j is injective,
    which the kernel fractions of its sections detect.
    """
    validation = validate_complex(C)
    if not validation.chain_ok:
        raise ComplexError("Boundary maps do not compose to zero")
    verdicts = []
    for j, delta in enumerate(laplacians(C)):
        estimate = vn_kernel_dim_positive(delta, cap=cap, points=points)
        acyclic = not kernel_persists([p.fraction for p in estimate.fractions])
        verdicts.append(LevelAcyclicity(level=j, kernel=estimate, acyclic=acyclic))
        logger.info(f"Delta_{j}: kernel fraction {estimate.limit_est:.4f} ({'injective' if acyclic else 'kernel'})")
    return verdicts


# ==================== Torsion ====================

def _level_error(trace: ApproximationTrace) -> float:
    return trace.est_error if math.isfinite(trace.est_error) else abs(trace.value)


def _cut_point(fraction: float):
    """Per-site log pseudo-determinant dropping round(fraction * size) smallest eigenvalues."""
    def evaluate(section: FiniteSection) -> float:
        summary = eigs_sym(section)
        drop = int(round(fraction * summary.size))
        kept = np.asarray(summary.eigenvalues[drop:])
        kept = kept[kept > summary.keps]
        return float(np.sum(np.log(kept))) / summary.sites
    return evaluate


def _kernel_cut_level(j: int, g: RingMatrix, fraction: float, grid: List[int], tol: float) -> TorsionLevel:
    values = map_sections(g, grid, _cut_point(fraction))
    error = abs(values[-1] - values[-2]) if len(values) >= 2 else 0.0
    exact = g.group.is_finite
    converged = exact or (len(values) >= 2 and error <= tol)
    logger.warning(f"Level {j}: neither side injective, count-based kernel cut at fraction {fraction:.4f}")
    return TorsionLevel(
        level=j,
        log_det=values[-1],
        est_error=0.0 if exact else error,
        method="kernel-cut",
        kernel_fraction=fraction,
        converged=converged,
        flagged=True,
    )


def _pseudo_level(j: int, f: RingMatrix, cap, points, tol: float) -> TorsionLevel:
    """log det(f* f + q_f), moved to the injective side of f* f / f f* when there is one."""
    direct = fk_det_positive(star(f) @ f, cap=cap, tol=tol, points=points)
    fraction = direct.points[-1].kernel_fraction
    chosen, method = direct, "direct"
    if direct.verdict == Verdict.KERNEL_DETECTED:
        adjoint = fk_det_positive(f @ star(f), cap=cap, tol=tol, points=points)
        if adjoint.verdict == Verdict.KERNEL_DETECTED:
            grid = resolve_schedule(f.group, f.cols, cap, points)
            return _kernel_cut_level(j, star(f) @ f, fraction, grid, tol)
        chosen, method = adjoint, "adjoint"
    converged = chosen.verdict == Verdict.CONVERGED
    return TorsionLevel(
        level=j,
        log_det=chosen.value,
        est_error=_level_error(chosen),
        method=method,
        kernel_fraction=fraction,
        converged=converged,
        flagged=not converged,
    )


def _laplacian_level(j: int, delta: RingMatrix, cap, points, tol: float) -> LaplacianLevel:
    trace = fk_det_positive(delta, cap=cap, tol=tol, points=points)
    if trace.verdict == Verdict.KERNEL_DETECTED:
        raise ComplexError(f"Delta_{j} has a kernel; the complex is not weakly acyclic")
    return LaplacianLevel(
        level=j,
        log_det=trace.value,
        est_error=_level_error(trace),
        converged=trace.verdict == Verdict.CONVERGED,
    )


def _parallel(jobs: Dict[int, tuple], fn) -> Dict[int, object]:
    workers = max(1, min(len(jobs), settings.workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {j: pool.submit(fn, j, *args) for j, args in jobs.items()}
        return {j: futures[j].result() for j in sorted(futures)}


def l2_torsion(
    C: ChainComplex,
    cap: Optional[int] = None,
    tol: Optional[float] = None,
    method: str = "both",
    points: Optional[Sequence[int]] = None,
    check_acyclic: bool = True
) -> TorsionReport:
    """
    L2-torsion rho = 1/2 sum_j (-1)^{j+1} log det(f_j* f_j + q_{f_j}) of a weakly acyclic complex.

    Args:
        C: chain complex
        cap: largest box parameter
        tol: per-site tolerance of rho; level traces use 2 * tol on the unhalved determinants
        method: pseudo, laplacian or both
        points: explicit schedule
        check_acyclic: run weak_acyclicity first

    Returns:
        TorsionReport with rho +- rho_error; both methods also report their discrepancy

    Raises:
        ComplexError: composition non-zero or the complex is not weakly acyclic
    """
    if method not in METHODS:
        raise ValueError(f"Unknown torsion method {method!r}; expected one of {METHODS}")
    tol = settings.tol if tol is None else tol
    level_tol = 2.0 * tol
    if check_acyclic:
        failing = [v.level for v in weak_acyclicity(C, cap=cap, points=points) if not v.acyclic]
        if failing:
            raise ComplexError(f"Complex is not weakly acyclic: Laplacian kernel at levels {failing}")
    elif not validate_complex(C).chain_ok:
        raise ComplexError("Boundary maps do not compose to zero")

    report = TorsionReport(method=method)
    if method in ("pseudo", "both"):
        jobs = {j: (C.boundary(j), cap, points, level_tol) for j in range(1, C.length + 1)}
        levels = _parallel(jobs, _pseudo_level)
        report.per_level = [levels[j] for j in sorted(levels)]
        report.rho = 0.5 * sum((-1) ** (lvl.level + 1) * lvl.log_det for lvl in report.per_level)
        report.rho_error = 0.5 * sum(lvl.est_error for lvl in report.per_level)
        for lvl in report.per_level:
            if lvl.method == "kernel-cut":
                report.notes.append(f"Level {lvl.level}: count-based kernel cut (no injective side)")
            elif not lvl.converged:
                report.notes.append(f"Level {lvl.level}: not converged, error bar widened")

    if method in ("laplacian", "both"):
        # Delta_0 carries weight 0 in the alternating sum
        deltas = laplacians(C)
        jobs = {j: (deltas[j], cap, points, level_tol) for j in range(1, C.length + 1)}
        levels = _parallel(jobs, _laplacian_level)
        report.laplacian_levels = [levels[j] for j in sorted(levels)]
        report.laplacian_rho = 0.5 * sum((-1) ** (lvl.level + 1) * lvl.level * lvl.log_det for lvl in report.laplacian_levels)
        report.laplacian_error = 0.5 * sum(lvl.level * lvl.est_error for lvl in report.laplacian_levels)
        if method == "laplacian":
            report.rho, report.rho_error = report.laplacian_rho, report.laplacian_error

    if method == "both":
        report.discrepancy = abs(report.rho - report.laplacian_rho)
        if report.discrepancy > 2.0 * tol:
            report.notes.append(f"Pseudo and Laplacian routes differ by {report.discrepancy:.3e}")
            logger.warning(report.notes[-1])
    logger.info(f"L2-torsion ({method}): {report.rho:.6f} ± {report.rho_error:.2e}")
    return report


# ==================== Complex files ====================

_ASSIGNMENT_RE = re.compile(r"^\s*(?P<key>group|f(?P<index>\d+))\s*=\s*(?P<value>.*)$")


def parse_complex(text: str, source: str = "<string>") -> ChainComplex:
    """
    Parse a complex description::

        group = Z^2
        f1 = [[x-1], [y-1]]
        f2 = [[y-1, -(x-1)]]

    Lines not starting with an assignment continue the previous value; '#' starts a comment.
    """
    values: Dict[str, str] = {}
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        match = _ASSIGNMENT_RE.match(line)
        if match:
            current = match.group("key")
            if current in values:
                raise ComplexError(f"{source}:{number}: duplicate entry {current!r}")
            values[current] = match.group("value")
        elif current is None:
            raise ComplexError(f"{source}:{number}: expected 'group = ...' or 'f<j> = ...'")
        else:
            values[current] += " " + line.strip()
    if "group" not in values:
        raise ComplexError(f"{source}: missing 'group = ...' header")
    group = parse_group(values.pop("group"))
    indices = sorted(int(key[1:]) for key in values)
    if indices != list(range(1, len(indices) + 1)):
        raise ComplexError(f"{source}: boundaries must be numbered f1..fk without gaps, got {indices}")
    boundaries = tuple(parse_ring_matrix(values[f"f{j}"], group) for j in indices)
    return ChainComplex(boundaries)


def load_complex(path: Union[str, Path]) -> ChainComplex:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read complex file {path}: {e}")
        raise
    return parse_complex(text, source=str(path))
