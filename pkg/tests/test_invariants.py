import math

import numpy as np
import pytest

from src.exceptions import DomainMismatchError, ShapeError
from src.groupring import RingElement
from src.groups import GroupDescriptor
from src.invariants import (
    entropy_finite_group_oracle,
    entropy_principal,
    mahler_jensen,
    mahler_quadrature,
)
from src.models import EntropyKind

LEHMER = "x^10+x^9-x^7-x^6-x^5-x^4-x^3+x+1"
LOG_LEHMER = 0.162357612007738
# log det of the Z^2 Laplacian: 4 G / pi with Catalan's constant G
CATALAN = 0.915965594177219
TOL = 5e-3


@pytest.mark.parametrize("text, expected", [
    ("x - 2", math.log(2)),
    ("2*x - 1", math.log(2)),
    ("x - 1", 0.0),
    ("3", math.log(3)),
    ("x^2 - 3*x + 1/x", None),
    (LEHMER, LOG_LEHMER),
])
def test_jensen(ring, text, expected):
    value = mahler_jensen(ring(text))
    if expected is None:
        # x^-1 (x^3 - 3x^2 + 1) has the same measure as x^3 - 3x^2 + 1
        expected = mahler_jensen(ring("x^3 - 3*x^2 + 1"))
    assert value == pytest.approx(expected, abs=1e-9)


def test_jensen_rejects_bad_input(ring, matrix):
    with pytest.raises(DomainMismatchError):
        mahler_jensen(ring("x - x"))
    with pytest.raises(DomainMismatchError):
        mahler_jensen(ring("x - 2", "Z^2"))
    with pytest.raises(DomainMismatchError):
        mahler_jensen(ring("x - 2", "Z/4"))


def test_quadrature_one_variable(ring):
    result = mahler_quadrature(ring("x - 2"))
    assert result.converged
    assert result.value == pytest.approx(math.log(2), abs=1e-9)
    assert mahler_quadrature(ring("2")).value == pytest.approx(math.log(2))


def test_quadrature_two_variables(ring, matrix):
    assert mahler_quadrature(ring("3 + x + y", "Z^2")).value == pytest.approx(math.log(3), abs=1e-8)
    assert mahler_quadrature(ring("5 - x - 1/x - y - 1/y", "Z^2")).converged
    # determinant of a matrix over Z^2 is the measure of its determinant
    diagonal = matrix("[[3 + x + y, 0], [0, 2]]", "Z^2")
    assert mahler_quadrature(diagonal).value == pytest.approx(math.log(6), abs=1e-8)


def test_quadrature_singular_symbol(ring):
    result = mahler_quadrature(ring("4 - x - 1/x - y - 1/y", "Z^2"), tol=1e-6)
    assert result.value == pytest.approx(4 * CATALAN / math.pi, abs=1e-4)


def test_quadrature_three_variables(ring):
    result = mahler_quadrature(ring("7 + x + y + z", "Z^3"), seed=3)
    assert result.method == "sobol"
    assert result.converged
    assert result.value == pytest.approx(math.log(7), abs=1e-3)


def test_quadrature_reports_nonconvergence(ring):
    result = mahler_quadrature(ring("x - 1"), grid=64, refine=2, tol=1e-15)
    assert not result.converged
    assert result.grid == 256
    assert result.error_estimate > 0


def test_quadrature_domain(ring, matrix):
    with pytest.raises(DomainMismatchError):
        mahler_quadrature(ring("x - 2", "H3"))
    with pytest.raises(ShapeError):
        mahler_quadrature(matrix("[[x-1], [y-1]]", "Z^2"))


def test_finite_group_oracle(ring):
    exact = entropy_finite_group_oracle(ring("x - 2", "Z/4"))
    assert exact.cokernel_order == 15
    assert exact.value == pytest.approx(math.log(15) / 4)
    assert entropy_finite_group_oracle(ring("3", "Z/2")).value == pytest.approx(0.5 * math.log(9))
    singular = entropy_finite_group_oracle(ring("1 + x", "Z/2"))
    assert singular.infinite and singular.cokernel_order == 0
    with pytest.raises(DomainMismatchError):
        entropy_finite_group_oracle(ring("x - 2"))


def test_entropy_on_finite_groups(ring):
    result = entropy_principal(ring("x - 2", "Z/4"))
    assert result.kind == EntropyKind.FINITE
    assert result.method == "exact-cokernel"
    assert result.value == entropy_finite_group_oracle(ring("x - 2", "Z/4")).value
    infinite = entropy_principal(ring("1 + x", "Z/2"))
    assert infinite.kind == EntropyKind.INFINITE
    assert infinite.value == math.inf
    assert infinite.kernel_fraction == pytest.approx(0.5)


def test_entropy_through_folner_sections(ring, matrix):
    result = entropy_principal(ring("x - 2"), cap=64)
    assert result.kind == EntropyKind.FINITE
    assert result.value == pytest.approx(math.log(2), abs=TOL)
    assert entropy_principal(ring("2", "Z^2"), points=[4, 8]).value == pytest.approx(math.log(2))
    rectangular = entropy_principal(matrix("[[x-1], [y-1]]", "Z^2"), points=[8, 16])
    assert rectangular.kind == EntropyKind.UPPER_BOUND
    assert rectangular.value >= 0.0


def test_entropy_needs_integer_coefficients(ring):
    with pytest.raises(DomainMismatchError):
        entropy_principal(ring("i*x - 2"))
    with pytest.raises(DomainMismatchError):
        entropy_principal(ring("x - 2", "Z^2; theta=0.25"))


def _polynomial_corpus(count: int, seed: int = 11):
    """Random integer Laurent polynomials in one variable with no root near the unit circle."""
    rng = np.random.default_rng(seed)
    Z = GroupDescriptor.lattice(1)
    corpus = []
    while len(corpus) < count:
        degree = int(rng.integers(1, 7))
        coefficients = rng.integers(-5, 6, size=degree + 1)
        if coefficients[0] == 0 or coefficients[-1] == 0:
            continue
        roots = np.roots(coefficients[::-1].astype(float))
        if np.min(np.abs(np.abs(roots) - 1.0)) < 0.05:
            continue
        shift = int(rng.integers(-3, 2))
        terms = {(k + shift,): int(c) for k, c in enumerate(coefficients)}
        corpus.append(RingElement.from_dict(Z, terms))
    return corpus


@pytest.mark.parametrize("f", _polynomial_corpus(20), ids=str)
def test_jensen_agrees_with_quadrature(f):
    result = mahler_quadrature(f)
    assert result.converged
    assert result.value == pytest.approx(mahler_jensen(f), abs=1e-7)
