"""Built-in suite of small cases with known answers."""

import math
from typing import Callable, List, Tuple

import numpy as np

from src.expressions import parse_ring_expr, parse_ring_matrix
from src.fk import epsilon_sweep, fk_det_general, fk_det_positive, vn_kernel_dim
from src.groupring import RingElement, RingMatrix, l1_norm, star, trace
from src.groups import Cocycle, FolnerSet, GroupDescriptor, cocycle_eval, folner_box, invariance_ratio
from src.invariants import entropy_principal, mahler_jensen, mahler_quadrature
from src.logger import get_logger
from src.models import EntropyKind, SelftestCase, Verdict
from src.restrict import assemble
from src.spectral import eigs_sym, empirical_moments, logdet_cholesky, smith_abs_det, truncated_log_product
from src.torsion import ChainComplex, parse_complex, validate_complex, weak_acyclicity

logger = get_logger(__name__)

SMALL_SCHEDULE = [4, 8]
CLOSE = 1e-9

Z = GroupDescriptor.lattice(1)
Z2 = GroupDescriptor.lattice(2)
Z4 = GroupDescriptor.finite(4)


def _close(a: float, b: float, tol: float = CLOSE) -> bool:
    return abs(a - b) <= tol


def _group_law() -> bool:
    return Z2.mul((1, 2), (3, 4)) == (4, 6) and Z4.mul((3,), (2,)) == (1,) and Z2.inv((1, -3)) == (-1, 3)


def _folner_box() -> bool:
    return folner_box(Z, 3).elements == ((0,), (1,), (2,)) and \
        folner_box(Z2, 2).elements == ((0, 0), (0, 1), (1, 0), (1, 1))


def _invariance() -> bool:
    F = folner_box(Z2, 5)
    return invariance_ratio(Z2, F, FolnerSet.from_elements([(0, 0)])) == 1.0


def _cocycle() -> bool:
    return cocycle_eval(Cocycle(0.0), (1, 2), (3, 5)) == 1 and cocycle_eval(Cocycle(0.3), (2, 7), (2, 7)) == 1


def _convolution() -> bool:
    f = parse_ring_expr("x-2", Z)
    return f * f == parse_ring_expr("x^2 - 4*x + 4", Z)


def _involution() -> bool:
    return star(parse_ring_expr("x-2", Z)) == parse_ring_expr("x^-1 - 2", Z)


def _trace_and_norm() -> bool:
    identity = RingMatrix.identity(Z, 3)
    return trace(identity) == 3 and l1_norm(parse_ring_expr("5 - 2*x - 2/x", Z)) == 9.0


def _parser() -> bool:
    element = parse_ring_expr("5 - x - 1/x - y - 1/y", Z2)
    matrix = parse_ring_matrix("[[x-1],[y-1]]", Z2)
    return len(element.support) == 5 and matrix.shape == (2, 1)


def _identity_section() -> bool:
    section = assemble(RingElement.one(Z2), folner_box(Z2, 3))
    return np.array_equal(section.matrix, np.eye(9))


def _dense_linear_algebra() -> bool:
    return _close(logdet_cholesky(np.diag([2.0, 3.0])), math.log(6)) and \
        smith_abs_det([[2, 0], [0, 3]]) == 6


def _spectral_helpers() -> bool:
    summary = eigs_sym(np.diag([3.0, 7.0]))
    product = truncated_log_product(summary, 0.5)
    moments = empirical_moments(eigs_sym(np.eye(4)), 3)
    return product.count == 0 and product.log_product == 0.0 and all(_close(m, 1.0) for m in moments)


def _identity_determinant() -> bool:
    trace_ = fk_det_positive(RingMatrix.identity(Z2, 1), points=SMALL_SCHEDULE)
    return trace_.verdict == Verdict.CONVERGED and _close(trace_.value, 0.0)


def _scalar_determinant() -> bool:
    trace_ = fk_det_general(parse_ring_matrix("2", Z), points=SMALL_SCHEDULE)
    return trace_.verdict == Verdict.CONVERGED and _close(trace_.value, math.log(2))


def _zero_kernel() -> bool:
    return _close(vn_kernel_dim(RingMatrix.zeros(Z, 1, 1), points=SMALL_SCHEDULE).limit_est, 1.0)


def _epsilon_shift() -> bool:
    sweep = epsilon_sweep(RingMatrix.identity(Z, 1), [0.5, 0.25], points=SMALL_SCHEDULE)
    return all(_close(p.value, math.log(1 + p.epsilon)) for p in sweep)


def _mahler() -> bool:
    x = parse_ring_expr("x - 1", Z)
    two = parse_ring_expr("2", Z)
    return _close(mahler_jensen(x), 0.0, 1e-7) and _close(mahler_quadrature(two).value, math.log(2))


def _entropy() -> bool:
    finite = entropy_principal(parse_ring_expr("3", GroupDescriptor.finite(2)))
    scalar = entropy_principal(parse_ring_expr("2", Z2), points=SMALL_SCHEDULE)
    return finite.kind == EntropyKind.FINITE and _close(finite.value, 0.5 * math.log(9)) and \
        scalar.kind == EntropyKind.FINITE and _close(scalar.value, math.log(2))


def _complexes() -> bool:
    single = ChainComplex((parse_ring_matrix("[[x-2]]", Z),))
    wide = ChainComplex((parse_ring_matrix("[[1], [1]]", Z),))
    return validate_complex(single).euler == 0 and validate_complex(wide).euler == -1


def _zero_map_not_acyclic() -> bool:
    C = parse_complex("group = Z\nf1 = [[0]]")
    return not all(v.acyclic for v in weak_acyclicity(C, points=SMALL_SCHEDULE))


CASES: List[Tuple[str, Callable[[], bool]]] = [
    ("group law", _group_law),
    ("folner box", _folner_box),
    ("invariance ratio", _invariance),
    ("cocycle", _cocycle),
    ("convolution", _convolution),
    ("involution", _involution),
    ("trace and l1 norm", _trace_and_norm),
    ("parser", _parser),
    ("identity section", _identity_section),
    ("dense linear algebra", _dense_linear_algebra),
    ("spectral helpers", _spectral_helpers),
    ("identity determinant", _identity_determinant),
    ("scalar determinant", _scalar_determinant),
    ("zero operator kernel", _zero_kernel),
    ("epsilon shift", _epsilon_shift),
    ("mahler measure", _mahler),
    ("entropy", _entropy),
    ("chain complexes", _complexes),
    ("zero map", _zero_map_not_acyclic),
]


def run_selftest() -> List[SelftestCase]:
    """Run every case; an exception counts as a failure."""
    results = []
    for name, case in CASES:
        try:
            passed = bool(case())
            detail = "" if passed else "unexpected value"
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        if not passed:
            logger.error(f"Selftest case {name!r} failed: {detail}")
        results.append(SelftestCase(name=name, passed=passed, detail=detail))
    logger.info(f"Selftest: {sum(r.passed for r in results)}/{len(results)} passed")
    return results
