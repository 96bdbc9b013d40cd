"""Finite-dimensional spectral computations on finite sections."""

import math
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from sympy.polys.domains import ZZ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import invariant_factors

from src.config import settings
from src.exceptions import NotHermitianError, NotPositiveDefiniteError
from src.logger import get_logger
from src.models import SpectralSummary, TruncatedProduct
from src.restrict import FiniteSection

logger = get_logger(__name__)

MatrixLike = Union[FiniteSection, np.ndarray]

# Exact determinant switches from Bareiss elimination to Smith normal form above this order
BAREISS_MAX_ORDER = 512
HERMITIAN_TOL = 1e-10


def _unwrap(H: MatrixLike) -> Tuple[np.ndarray, int, int]:
    """Return (float matrix, blocks d, sites |F|)."""
    if isinstance(H, FiniteSection):
        return H.float_matrix(), H.col_blocks, H.sites
    H = np.asarray(H)
    if H.dtype == object:
        H = H.astype(np.float64)
    return H, 1, H.shape[0]


def kernel_eps(size: int, norm: float) -> float:
    """Numerical-kernel threshold keps = size * ||H|| * 2^-45 (exponent configurable)."""
    return size * norm * settings.kernel_eps_scale


def cholesky_factor(H: MatrixLike) -> Tuple[float, float]:
    """
    Cholesky log-determinant of a Hermitian positive definite matrix.

    Args:
        H: Hermitian matrix or finite section

    Returns:
        (log det H, smallest squared pivot)

    Raises:
        NotPositiveDefiniteError: a pivot was non-positive; `singular` is True
            when that pivot lies within the numerical-kernel threshold
    """
    A, _, _ = _unwrap(H)
    n = A.shape[0]
    if n == 0:
        return 0.0, math.inf
    potrf, = lapack.get_lapack_funcs(("potrf",), (A,))
    c, info = potrf(A, lower=True, clean=True, overwrite_a=False)
    if info < 0:
        raise ValueError(f"potrf: illegal argument {-info}")
    if info > 0:
        # the rejected leading minor is singular when its lowest eigenvalue sits in the numerical kernel
        minor = A[:info, :info]
        pivot = float(scipy.linalg.eigh(minor, eigvals_only=True, subset_by_index=[0, 0], check_finite=False)[0])
        norm = float(np.max(np.sum(np.abs(minor), axis=1)))
        singular = pivot >= -kernel_eps(n, norm)
        kind = "singular" if singular else "indefinite"
        raise NotPositiveDefiniteError(
            f"{info}-th leading minor is not positive definite ({kind}, pivot {pivot:.3e})",
            order=info, pivot=pivot, singular=singular
        )
    diag = np.real(np.diag(c))
    return 2.0 * float(np.sum(np.log(diag))), float(np.min(diag) ** 2)


def logdet_cholesky(H: MatrixLike) -> float:
    """log det H as twice the summed log-diagonal of the Cholesky factor."""
    return cholesky_factor(H)[0]


def _check_hermitian(A: np.ndarray):
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.shape[0] != A.shape[1] or (A.size and np.max(np.abs(A - A.conj().T)) > HERMITIAN_TOL * scale):
        raise NotHermitianError("Matrix is not Hermitian")


def eigs_sym(H: MatrixLike, blocks: Optional[int] = None, sites: Optional[int] = None) -> SpectralSummary:
    """
    Full ascending spectrum of a Hermitian section.

    Args:
        H: Hermitian matrix or finite section
        blocks: d used for measure normalisation (taken from the section if omitted)
        sites: |F| used for measure normalisation (taken from the section if omitted)

    Returns:
        SpectralSummary
    """
    A, d, F = _unwrap(H)
    d = blocks or d
    F = sites or (A.shape[0] // d if isinstance(H, np.ndarray) else F)
    _check_hermitian(A)
    size = A.shape[0]
    if size == 0:
        return SpectralSummary(eigenvalues=[], logdet=0.0, kernel_dim=0, size=0, blocks=d, sites=F, keps=0.0)
    eigenvalues = scipy.linalg.eigh(A, eigvals_only=True, check_finite=False)
    norm = float(np.max(np.abs(eigenvalues)))
    keps = kernel_eps(size, norm)
    kernel_dim = int(np.count_nonzero(np.abs(eigenvalues) <= keps))
    if eigenvalues[0] > keps:
        logdet = float(np.sum(np.log(eigenvalues)))
    else:
        logdet = -math.inf
    return SpectralSummary(
        eigenvalues=eigenvalues.tolist(),
        logdet=logdet,
        kernel_dim=kernel_dim,
        size=size,
        blocks=d,
        sites=F,
        keps=keps,
    )


def smith_abs_det(M) -> int:
    """
    Exact |det M| of a square integer matrix.

    Fraction-free Bareiss elimination up to BAREISS_MAX_ORDER, the product of
    the Smith invariant factors beyond; 0 signals a singular matrix.
    """
    rows = [[int(v) for v in row] for row in np.asarray(M, dtype=object).tolist()]
    n = len(rows)
    if n == 0:
        return 1
    if any(len(row) != n for row in rows):
        raise ValueError("smith_abs_det needs a square matrix")
    dm = DomainMatrix([[ZZ(v) for v in row] for row in rows], (n, n), ZZ)
    if n <= BAREISS_MAX_ORDER:
        return abs(int(dm.det()))
    factors = invariant_factors(dm)
    if len(factors) < n:
        return 0
    return abs(math.prod(int(f) for f in factors))


def truncated_log_product(summary: SpectralSummary, kappa: float) -> TruncatedProduct:
    """Sum of log(lambda) over eigenvalues in (keps, kappa], the numerical kernel excluded."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    lam = np.asarray(summary.eigenvalues)
    selected = lam[(lam > summary.keps) & (lam <= kappa)]
    return TruncatedProduct(
        kappa=kappa,
        log_product=float(np.sum(np.log(selected))) if selected.size else 0.0,
        count=int(selected.size),
    )


def empirical_moments(summary: SpectralSummary, k_max: int) -> List[float]:
    """m_k = (d / size) sum lambda_i^k, moments of the section's spectral measure."""
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    lam = np.asarray(summary.eigenvalues, dtype=np.float64)
    if summary.size == 0:
        return [0.0] * (k_max + 1)
    scale = summary.blocks / summary.size
    return [float(scale * np.sum(lam ** k)) for k in range(k_max + 1)]


def kernel_count(H: MatrixLike) -> Tuple[int, int]:
    """
    Numerical kernel dimension of a positive semidefinite section.

    A Cholesky factor with every squared pivot above keps certifies a trivial
    kernel; otherwise the full spectrum is counted.

    Returns:
        (kernel dimension, matrix order)
    """
    A, _, _ = _unwrap(H)
    size = A.shape[0]
    norm_bound = float(np.max(np.sum(np.abs(A), axis=1))) if size else 0.0
    try:
        _, min_pivot = cholesky_factor(A)
        if min_pivot > kernel_eps(size, norm_bound):
            return 0, size
    except NotPositiveDefiniteError:
        pass
    summary = eigs_sym(A)
    return summary.kernel_dim, size
