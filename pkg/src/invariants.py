"""Mahler measures and entropies of principal algebraic actions."""

import math
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from src.config import settings
from src.exceptions import DomainMismatchError, ShapeError
from src.fk import fk_det_general, vn_kernel_dim
from src.groupring import CoefficientDomain, RingElement, RingMatrix, as_matrix, evaluate_symbol
from src.groups import GroupKind, folner_box
from src.logger import get_logger
from src.models import EntropyKind, EntropyResult, ExactEntropy, QuadratureResult, Verdict
from src.restrict import assemble
from src.spectral import smith_abs_det

logger = get_logger(__name__)

# Midpoint refinement: starting and largest points per axis, by lattice rank
QUADRATURE_START = {1: 64, 2: 32}
QUADRATURE_CAP = {1: 2 ** 20, 2: 4096}
# Quasi-random fallback for rank >= 3: samples 2^m for m in this range
SOBOL_LOG2_RANGE = (12, 20)
SOBOL_TOL = 1e-3
CLT_Z = 1.96
# Symbol evaluations per chunk
CHUNK = 1 << 18


def _lattice_matrix(f: Union[RingElement, RingMatrix]) -> RingMatrix:
    f = as_matrix(f)
    group = f.group
    if group.kind != GroupKind.INTEGER_LATTICE or group.twist is not None:
        raise DomainMismatchError(f"Mahler measures need an untwisted Z^d, got {group}")
    if not f.is_square:
        raise ShapeError(f"Mahler measure of a {f.shape} matrix is undefined")
    if f.is_zero():
        raise DomainMismatchError("Mahler measure of the zero polynomial is undefined")
    return f


def mahler_jensen(f: Union[RingElement, RingMatrix]) -> float:
    """
    Logarithmic Mahler measure of a one-variable Laurent polynomial by Jensen's formula.

    log M(f) = log|lead| + sum over roots of log max(1, |root|).

    Args:
        f: nonzero element over Z (a 1x1 matrix is accepted)

    Returns:
        log M(f)
    """
    f = _lattice_matrix(f)
    if f.group.rank != 1 or f.shape != (1, 1):
        raise DomainMismatchError("Jensen's formula needs a single polynomial in one variable")
    terms = f[0, 0].terms
    low = terms[0][0][0]
    high = terms[-1][0][0]
    coefficients = np.zeros(high - low + 1, dtype=np.complex128)
    for (k,), c in terms:
        coefficients[high - k] = complex(c)
    lead = abs(coefficients[0])
    roots = np.roots(coefficients) if len(coefficients) > 1 else np.array([])
    value = math.log(lead) + float(np.sum(np.log(np.maximum(1.0, np.abs(roots)))))
    logger.debug(f"Jensen: degree {len(coefficients) - 1}, log M = {value:.12f}")
    return value


def _log_abs_det(f: RingMatrix, angles: np.ndarray) -> np.ndarray:
    values = evaluate_symbol(f, angles)
    if f.rows == 1:
        magnitudes = np.abs(values[:, 0, 0])
    else:
        magnitudes = np.abs(np.linalg.det(values))
    with np.errstate(divide="ignore"):
        return np.log(magnitudes)


def _midpoint_mean(f: RingMatrix, n: int) -> float:
    """Mean of log|det f| over the offset grid 2 pi (j + 1/2) / n, evaluated in chunks."""
    d = f.group.rank
    axis = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    total = 0.0
    if d == 1:
        for start in range(0, n, CHUNK):
            total += float(np.sum(_log_abs_det(f, axis[start:start + CHUNK].reshape(-1, 1))))
        return total / n
    rows_per_chunk = max(1, CHUNK // n)
    for start in range(0, n, rows_per_chunk):
        first = axis[start:start + rows_per_chunk]
        grid = np.stack(np.meshgrid(first, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        total += float(np.sum(_log_abs_det(f, grid)))
    return total / (n * n)


def _sobol(f: RingMatrix, seed: int, tol: float) -> QuadratureResult:
    d = f.group.rank
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    samples = np.empty(0)
    previous = None
    error = math.inf
    low, high = SOBOL_LOG2_RANGE
    for m in range(low, high + 1):
        target = 2 ** m
        fresh = sampler.random(target - samples.size)
        samples = np.concatenate([samples, _log_abs_det(f, 2.0 * np.pi * fresh)])
        value = float(np.mean(samples))
        clt = CLT_Z * float(np.std(samples)) / math.sqrt(samples.size)
        error = clt if previous is None else max(clt, abs(value - previous))
        previous = value
        if error <= max(tol, SOBOL_TOL):
            return QuadratureResult(value=value, error_estimate=error, grid=samples.size, converged=True, method="sobol")
    logger.warning(f"Quasi-random quadrature stopped at {samples.size} samples, error {error:.2e}")
    return QuadratureResult(value=previous, error_estimate=error, grid=samples.size, converged=False, method="sobol")


def mahler_quadrature(
    f: Union[RingElement, RingMatrix],
    grid: Optional[int] = None,
    refine: Optional[int] = None,
    tol: Optional[float] = None,
    seed: int = 0
) -> QuadratureResult:
    """
    Torus quadrature of log|det f(z)| over Z^d.

    Args:
        f: nonzero element, or square matrix, over untwisted Z^d
        grid: starting points per axis. If None, 64 (d=1) or 32 (d=2)
        refine: largest number of doublings. If None, refine up to the per-axis cap
        tol: stop once two successive grids differ by at most tol
        seed: scrambling seed of the quasi-random fallback for d >= 3

    Returns:
        QuadratureResult; converged=False with the last difference as error bar at the cap
    """
    f = _lattice_matrix(f)
    tol = settings.quadrature_tol if tol is None else tol
    d = f.group.rank
    if d >= 3:
        return _sobol(f, seed, tol)
    n = grid or QUADRATURE_START[d]
    cap = QUADRATURE_CAP[d]
    if refine is not None:
        cap = min(cap, n * 2 ** refine)
    value = _midpoint_mean(f, n)
    error = math.inf
    while n * 2 <= cap:
        n *= 2
        refined = _midpoint_mean(f, n)
        error = abs(refined - value)
        value = refined
        logger.debug(f"Midpoint rule N={n}: {value:.12f} (change {error:.2e})")
        if error <= tol:
            return QuadratureResult(value=value, error_estimate=error, grid=n, converged=True)
    logger.warning(f"Midpoint rule reached N={n} per axis with change {error:.2e} > {tol:g}")
    return QuadratureResult(value=value, error_estimate=error, grid=n, converged=False)


def _require_integer(f: RingMatrix):
    if f.domain != CoefficientDomain.INTEGER or f.group.twist is not None:
        raise DomainMismatchError("Entropy of a principal action needs integer coefficients and no twist")


def entropy_finite_group_oracle(f: Union[RingElement, RingMatrix]) -> ExactEntropy:
    """
    Exact entropy (1/|Gamma|) log |coker f_Gamma| for a finite group.

    The section on F = Gamma is the whole operator, and |det| of that integer
    matrix is the order of its cokernel.
    """
    f = as_matrix(f)
    _require_integer(f)
    group = f.group
    if not group.is_finite:
        raise DomainMismatchError(f"The exact oracle needs a finite group, got {group}")
    if not f.is_square:
        raise ShapeError(f"The exact oracle needs a square matrix, got {f.shape}")
    section = assemble(f, folner_box(group, 1), exact=True)
    order = smith_abs_det(section.matrix)
    if order == 0:
        logger.info(f"Section of {f} over {group} is singular: infinite entropy")
        return ExactEntropy(group_order=group.order, cokernel_order=0, value=math.inf, infinite=True)
    value = math.log(order) / group.order
    return ExactEntropy(group_order=group.order, cokernel_order=order, value=value)


def entropy_principal(
    f: Union[RingElement, RingMatrix],
    cap: Optional[int] = None,
    tol: Optional[float] = None,
    points: Optional[Sequence[int]] = None
) -> EntropyResult:
    """
    Entropy of the principal algebraic action X_f through log det f.

    Args:
        f: d' x d integer ring matrix
        cap: largest box parameter
        tol: per-site convergence tolerance
        points: explicit schedule

    Returns:
        infinite when f has a von Neumann kernel, finite for square f,
        upper_bound for rectangular f
    """
    f = as_matrix(f)
    _require_integer(f)
    if f.group.is_finite and f.is_square:
        exact = entropy_finite_group_oracle(f)
        if exact.infinite:
            return EntropyResult(kind=EntropyKind.INFINITE, value=math.inf, method="exact-cokernel", kernel_fraction=vn_kernel_dim(f).limit_est)
        return EntropyResult(kind=EntropyKind.FINITE, value=exact.value, method="exact-cokernel")

    # the trace sections f*f, so its kernel fractions are those of vn_kernel_dim(f)
    trace = fk_det_general(f, cap=cap, tol=tol, points=points)
    fraction = trace.points[-1].kernel_fraction
    if trace.verdict == Verdict.KERNEL_DETECTED:
        return EntropyResult(kind=EntropyKind.INFINITE, value=math.inf, method="folner", kernel_fraction=fraction, trace=trace)
    kind = EntropyKind.FINITE if f.is_square else EntropyKind.UPPER_BOUND
    return EntropyResult(
        kind=kind,
        value=trace.value,
        est_error=trace.est_error,
        method="folner",
        kernel_fraction=fraction,
        trace=trace,
    )