"""Følner-limit Fuglede–Kadison determinants, kernel dimensions and tail diagnostics.

For a positive g in M_d(Z Gamma) the per-site log-determinants
v_F = log det(g_F) / |F| decrease to log det g along a Følner net, and the
limit equals the infimum, so every computed v_F is an upper bound.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from src.config import settings
from src.exceptions import NotPositiveDefiniteError, NotPositiveError, ScheduleError, ShapeError
from src.groupring import RingMatrix, as_matrix, evaluate_symbol, l1_norm, star
from src.groups import GroupDescriptor, GroupKind, folner_box, limit_order, schedule
from src.logger import get_logger
from src.models import (
    ApproximationTrace,
    EpsilonPoint,
    KernelEstimate,
    KernelPoint,
    TailDiagnostic,
    TailPoint,
    TracePoint,
    Verdict,
)
from src.restrict import FiniteSection, Side, sections
from src.spectral import cholesky_factor, eigs_sym, kernel_count, kernel_eps, truncated_log_product

logger = get_logger(__name__)

T = TypeVar("T")

STAR_SYMMETRY_TOL = 1e-12
# Symbol grid points per axis, by lattice rank
SYMBOL_GRID = {1: 256, 2: 64, 3: 16}
TAIL_KAPPA_STEPS = 12


# ==================== Helpers ====================

def resolve_schedule(
    group: GroupDescriptor,
    blocks: int,
    cap: Optional[int] = None,
    points: Optional[Sequence[int]] = None
) -> List[int]:
    """Explicit points win over cap; the section-order limit applies to both."""
    if points is not None:
        points = sorted(set(int(n) for n in points))
        if any(n < 1 for n in points):
            raise ScheduleError(f"Box parameters must be positive, got {points}")
        if group.is_finite:
            points = [1]
        points = limit_order(group, points, blocks, settings.max_section_order)
    else:
        points = schedule(group, cap, blocks=blocks, max_order=settings.max_section_order)
    if not points:
        raise ScheduleError(f"Empty Følner schedule for {group} with {blocks} block(s)")
    return points


def map_sections(
    g: RingMatrix,
    points: Sequence[int],
    fn: Callable[[FiniteSection], T],
    workers: Optional[int] = None
) -> List[T]:
    """
    Build left sections along the schedule and evaluate fn on each in a thread pool.

    Sections are grown sequentially from the previous box; results come back
    ordered by schedule point.
    """
    folners = [folner_box(g.group, n) for n in points]
    with ThreadPoolExecutor(max_workers=workers or settings.workers) as pool:
        futures = [pool.submit(fn, section) for section in sections(g, folners, Side.LEFT)]
        return [future.result() for future in futures]


def check_star_symmetric(g: RingMatrix):
    """Require g = g* up to rounding in complex coefficients."""
    if not g.is_square:
        raise ShapeError(f"A positive operator must be square, got {g.shape}")
    if g.is_star_symmetric():
        return
    adjoint = star(g)
    scale = max(1.0, l1_norm(g))
    for row, adjoint_row in zip(g.entries, adjoint.entries):
        for entry, adjoint_entry in zip(row, adjoint_row):
            difference = entry - adjoint_entry
            if any(abs(c) > STAR_SYMMETRY_TOL * scale for _, c in difference.terms):
                raise NotPositiveError("Operator is not star-symmetric, so it cannot be positive")


def shifted(g: RingMatrix, epsilon: float) -> RingMatrix:
    """g + epsilon * identity, keeping exact coefficients exact."""
    shift = RingMatrix.identity(g.group, g.rows).scale(Fraction(epsilon))
    return g + shift


def symbol_floor_ratio(g: RingMatrix) -> Optional[float]:
    """
    Smallest over largest symbol eigenvalue of a positive g over untwisted Z^d, d <= 3.

    The grid includes theta = 0, where the symbols of most singular inputs vanish.
    Returns None for groups without a computable symbol.
    """
    group = g.group
    if group.kind != GroupKind.INTEGER_LATTICE or group.twist is not None or group.rank not in SYMBOL_GRID:
        return None
    n = SYMBOL_GRID[group.rank]
    axis = 2.0 * np.pi * np.arange(n) / n
    grid = np.stack(np.meshgrid(*([axis] * group.rank), indexing="ij"), axis=-1).reshape(-1, group.rank)
    values = evaluate_symbol(g, grid)
    values = 0.5 * (values + np.conj(np.swapaxes(values, 1, 2)))
    eigenvalues = np.linalg.eigvalsh(values)
    top = float(np.max(eigenvalues))
    if top <= 0:
        return 0.0
    return max(float(np.min(eigenvalues)), 0.0) / top


# ==================== Determinants ====================

def _trace_point(section: FiniteSection) -> TracePoint:
    """Per-site log-determinant of one positive section; Cholesky first, spectrum on a small pivot."""
    start = time.perf_counter()
    A = section.float_matrix()
    size, sites = section.size, section.sites
    norm = float(np.max(np.sum(np.abs(A), axis=1))) if size else 0.0
    kernel_dim = 0
    try:
        logdet, min_pivot = cholesky_factor(A)
        needs_spectrum = min_pivot <= kernel_eps(size, norm)
    except NotPositiveDefiniteError:
        needs_spectrum = True
    if needs_spectrum:
        summary = eigs_sym(A, blocks=section.col_blocks, sites=sites)
        if summary.eigenvalues and summary.eigenvalues[0] < -summary.keps:
            raise NotPositiveError(
                f"Section on |F|={sites} has eigenvalue {summary.eigenvalues[0]:.3e} below -keps"
            )
        kernel_dim = summary.kernel_dim
        logdet = summary.logdet
    return TracePoint(
        n=section.folner.label,
        sites=sites,
        size=size,
        logdet_per_site=logdet / sites,
        kernel_dim=kernel_dim,
        kernel_fraction=kernel_dim / size if size else 0.0,
        wall_ms=1000.0 * (time.perf_counter() - start),
    )


def kernel_persists(fractions: Sequence[float]) -> bool:
    """Kernel fraction above the floor at the last two points (the only point for F = Gamma)."""
    floor = settings.kernel_fraction_floor
    tail = list(fractions)[-2:]
    return bool(tail) and all(f > floor for f in tail)


def _judge(trace: ApproximationTrace, tol: float) -> ApproximationTrace:
    points = trace.points
    values = [p.logdet_per_site for p in points]
    trace.running_inf = min(values)
    if kernel_persists([p.kernel_fraction for p in points]):
        trace.verdict = Verdict.KERNEL_DETECTED
        trace.value = -math.inf
        trace.est_error = 0.0
        return trace
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        trace.verdict = Verdict.KERNEL_DETECTED
        trace.value = -math.inf
        trace.est_error = 0.0
        trace.warnings.append("Every section is singular although the kernel fraction is below the floor")
        return trace
    if len(finite) < len(values):
        trace.warnings.append("Transient numerical kernel at small boxes ignored")
        trace.running_inf = min(finite)
    if trace.exact:
        trace.verdict = Verdict.CONVERGED
        trace.value = finite[-1]
        trace.est_error = 0.0
        return trace
    if len(finite) >= 2:
        gap = abs(finite[-1] - finite[-2])
        trace.est_error = gap
        if gap <= tol:
            trace.verdict = Verdict.CONVERGED
            trace.value = finite[-1]
            return trace
    trace.verdict = Verdict.UPPER_BOUND_ONLY
    trace.value = trace.running_inf
    trace.slow_convergence = True
    trace.warnings.append(
        f"No two successive schedule points within tol={tol:g}; reporting the running infimum"
    )
    return trace


def _richardson(points: Sequence[TracePoint]) -> Optional[float]:
    """Eliminate a C/n boundary term from the last two points."""
    usable = [p for p in points if math.isfinite(p.logdet_per_site)]
    if len(usable) < 2:
        return None
    first, last = usable[-2], usable[-1]
    if last.n == first.n:
        return None
    return (last.n * last.logdet_per_site - first.n * first.logdet_per_site) / (last.n - first.n)


def fk_det_positive(
    g: RingMatrix,
    cap: Optional[int] = None,
    tol: Optional[float] = None,
    points: Optional[Sequence[int]] = None,
    extrapolate: bool = False
) -> ApproximationTrace:
    """
    Fuglede–Kadison log-determinant of a positive ring matrix through Følner sections.

    Args:
        g: star-symmetric positive d x d ring matrix
        cap: largest box parameter. If None, uses the group's default cap
        tol: convergence tolerance per site. If None, uses settings.tol
        points: explicit schedule overriding cap
        extrapolate: also report a Richardson estimate (never used as the value)

    Returns:
        ApproximationTrace whose running_inf is an upper bound on log det g

    Raises:
        NotPositiveError: g is not star-symmetric or a section has a clearly negative eigenvalue
        ScheduleError: the schedule is empty
    """
    g = as_matrix(g)
    tol = settings.tol if tol is None else tol
    check_star_symmetric(g)
    group = g.group
    grid = resolve_schedule(group, g.rows, cap, points)
    logger.info(f"FK determinant over {group}: {g.rows}x{g.rows} operator, schedule {grid}")

    trace = ApproximationTrace(operator=str(g), exact=group.is_finite)
    try:
        trace.points = map_sections(g, grid, _trace_point)
    except NotPositiveError as e:
        logger.error(f"Positivity check failed: {e}")
        raise
    for point in trace.points:
        logger.debug(f"n={point.n} |F|={point.sites} v={point.logdet_per_site:.6f} ({point.wall_ms:.0f} ms)")

    ratio = symbol_floor_ratio(g)
    _judge(trace, tol)
    if ratio is not None and ratio < settings.singular_symbol_ratio and trace.verdict != Verdict.KERNEL_DETECTED:
        trace.slow_convergence = True
        trace.warnings.append(
            f"Singular symbol (floor ratio {ratio:.2e}); convergence is slow, consider an epsilon sweep"
        )
    if extrapolate and trace.verdict != Verdict.KERNEL_DETECTED and not trace.exact:
        trace.extrapolated = _richardson(trace.points)
    for warning in trace.warnings:
        logger.warning(warning)
    logger.info(f"Verdict {trace.verdict.value}: value={trace.value:.6f} ± {trace.est_error:.2e}")
    return trace


def halve_trace(trace: ApproximationTrace, operator: str) -> ApproximationTrace:
    """Report det(f) from a trace of f*f: every log value is halved."""
    points = [p.model_copy(update={"logdet_per_site": 0.5 * p.logdet_per_site}) for p in trace.points]
    return trace.model_copy(update={
        "operator": operator,
        "points": points,
        "running_inf": 0.5 * trace.running_inf,
        "value": 0.5 * trace.value,
        "est_error": 0.5 * trace.est_error,
        "extrapolated": None if trace.extrapolated is None else 0.5 * trace.extrapolated,
        "scale": 0.5,
    })


def fk_det_general(
    f,
    cap: Optional[int] = None,
    tol: Optional[float] = None,
    points: Optional[Sequence[int]] = None,
    extrapolate: bool = False
) -> ApproximationTrace:
    """log det f = (1/2) log det(f* f); only f* f is ever sectioned."""
    f = as_matrix(f)
    tol = settings.tol if tol is None else tol
    trace = fk_det_positive(star(f) @ f, cap=cap, tol=2.0 * tol, points=points, extrapolate=extrapolate)
    return halve_trace(trace, str(f))


# ==================== Kernel dimension ====================

def _kernel_point(section: FiniteSection) -> KernelPoint:
    kernel_dim, size = kernel_count(section)
    return KernelPoint(
        n=section.folner.label,
        sites=section.sites,
        kernel_dim=kernel_dim,
        fraction=kernel_dim / size if size else 0.0,
    )


def vn_kernel_dim_positive(
    g: RingMatrix,
    cap: Optional[int] = None,
    points: Optional[Sequence[int]] = None
) -> KernelEstimate:
    """Kernel fractions dim ker(g_F) / (d |F|) of a positive g; limit by last value."""
    g = as_matrix(g)
    grid = resolve_schedule(g.group, g.rows, cap, points)
    fractions = map_sections(g, grid, _kernel_point)
    last = fractions[-1].fraction
    error = abs(last - fractions[-2].fraction) if len(fractions) >= 2 else 0.0
    logger.info(f"Kernel fraction over {g.group}: {last:.4f} ± {error:.1e}")
    return KernelEstimate(fractions=fractions, limit_est=last, error=error)


def vn_kernel_dim(
    f,
    cap: Optional[int] = None,
    points: Optional[Sequence[int]] = None
) -> KernelEstimate:
    """von Neumann dimension of ker f, normalised by d, via sections of f* f."""
    f = as_matrix(f)
    return vn_kernel_dim_positive(star(f) @ f, cap=cap, points=points)


# ==================== Regularisation and tails ====================

def epsilon_sweep(
    g: RingMatrix,
    epsilons: Sequence[float],
    cap: Optional[int] = None,
    tol: Optional[float] = None,
    points: Optional[Sequence[int]] = None
) -> List[EpsilonPoint]:
    """
    FK log-determinants of g + epsilon for a decreasing list of epsilons.

    Args:
        g: star-symmetric positive ring matrix
        epsilons: strictly decreasing positive shifts

    Returns:
        One EpsilonPoint per shift, nonincreasing in epsilon up to tol
    """
    g = as_matrix(g)
    epsilons = [float(e) for e in epsilons]
    if not epsilons:
        raise ScheduleError("epsilon_sweep needs at least one epsilon")
    if any(e <= 0 for e in epsilons):
        raise ScheduleError(f"Epsilons must be positive, got {epsilons}")
    if any(a <= b for a, b in zip(epsilons, epsilons[1:])):
        raise ScheduleError(f"Epsilons must be strictly decreasing, got {epsilons}")
    result = []
    for epsilon in epsilons:
        trace = fk_det_positive(shifted(g, epsilon), cap=cap, tol=tol, points=points)
        result.append(EpsilonPoint(epsilon=epsilon, value=trace.value, verdict=trace.verdict))
        logger.info(f"epsilon={epsilon:g}: {trace.value:.6f} ({trace.verdict.value})")
    return result


def tail_diagnostic(
    g: RingMatrix,
    lam: float,
    cap: Optional[int] = None,
    points: Optional[Sequence[int]] = None
) -> TailDiagnostic:
    """
    Search kappa = kappa_max / 2^k, k = 1..TAIL_KAPPA_STEPS, for a kappa whose tail ratio stays <= lam.

    The tail ratio at F is D_{g,F,kappa}^(-1/|F|), D being the product of the
    section eigenvalues in (0, kappa]. A kappa passes when the ratio is at most
    lam at the two largest boxes. kappa_max = min(1, ||g||_1).

    The search runs downward and returns the first passing kappa, which is the
    LARGEST passing grid value, not the smallest. Once the tail above keps is
    empty every smaller kappa passes trivially, so the smallest passing value
    would always sit at the bottom of the grid.

    Returns:
        TailDiagnostic; passed=False with a message when no kappa qualifies
    """
    if lam <= 1:
        raise ValueError(f"lam must exceed 1, got {lam}")
    g = as_matrix(g)
    check_star_symmetric(g)
    grid = resolve_schedule(g.group, g.rows, cap, points)
    summaries = map_sections(g, grid, eigs_sym)
    if kernel_persists([s.kernel_dim / s.size for s in summaries]):
        return TailDiagnostic(lam=lam, message="Kernel detected; the tail bound assumes det g > 0")

    kappa_max = min(1.0, l1_norm(g))
    if kappa_max <= 0:
        return TailDiagnostic(lam=lam, message="Zero operator has no spectral tail")

    def tail_points(kappa: float) -> List[TailPoint]:
        result = []
        for n, summary in zip(grid, summaries):
            product = truncated_log_product(summary, kappa)
            result.append(TailPoint(n=n, ratio=math.exp(-product.log_product / summary.sites), count=product.count))
        return result

    tried = []
    for k in range(1, TAIL_KAPPA_STEPS + 1):
        kappa = kappa_max / 2 ** k
        tried = tail_points(kappa)
        if all(p.ratio <= lam for p in tried[-2:]):
            logger.info(f"Tail diagnostic passed at kappa={kappa:g} for lam={lam:g}")
            return TailDiagnostic(lam=lam, kappa=kappa, points=tried, passed=True)
    message = f"No kappa >= {kappa_max / 2 ** TAIL_KAPPA_STEPS:.2e} keeps the tail ratio below {lam:g}"
    logger.warning(message)
    return TailDiagnostic(lam=lam, points=tried, passed=False, message=message)
