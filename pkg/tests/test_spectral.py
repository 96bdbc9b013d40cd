import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import src.spectral as spectral
from src.exceptions import NotHermitianError, NotPositiveDefiniteError
from src.groupring import RingElement, RingMatrix, l1_norm, poly_apply, star, trace
from src.groups import FolnerSet, GroupDescriptor, folner_box, invariance_ratio
from src.restrict import assemble
from src.spectral import (
    cholesky_factor,
    eigs_sym,
    empirical_moments,
    kernel_count,
    logdet_cholesky,
    smith_abs_det,
    truncated_log_product,
)

POSITIVE = np.array([[5.0, -2.0], [-2.0, 5.0]])


def test_logdet_cholesky():
    assert logdet_cholesky(np.eye(4)) == 0.0
    assert logdet_cholesky(np.diag([2.0, 3.0])) == pytest.approx(math.log(6))
    assert logdet_cholesky(POSITIVE) == pytest.approx(math.log(21))


def test_cholesky_classifies_failures():
    with pytest.raises(NotPositiveDefiniteError) as singular:
        cholesky_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert singular.value.singular
    with pytest.raises(NotPositiveDefiniteError) as indefinite:
        cholesky_factor(np.diag([1.0, -1.0]))
    assert not indefinite.value.singular
    assert indefinite.value.order == 2


def test_eigs_sym():
    summary = eigs_sym(POSITIVE)
    assert summary.eigenvalues == pytest.approx([3.0, 7.0])
    assert summary.logdet == pytest.approx(math.log(21))
    projector = eigs_sym(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert projector.eigenvalues == pytest.approx([0.0, 2.0], abs=1e-12)
    assert projector.kernel_dim == 1
    assert projector.logdet == -math.inf
    identity = eigs_sym(np.eye(3))
    assert identity.eigenvalues == pytest.approx([1.0] * 3)
    assert identity.kernel_dim == 0


def test_eigs_sym_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        eigs_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigs_sym_on_sections(matrix, Z):
    section = assemble(matrix("[[5 - 2*x - 2/x, 0], [0, 1]]"), folner_box(Z, 3))
    summary = eigs_sym(section)
    assert summary.blocks == 2
    assert summary.sites == 3
    assert summary.size == 6


def test_smith_abs_det():
    assert smith_abs_det(np.eye(3, dtype=int)) == 1
    assert smith_abs_det([[2, 0], [0, 3]]) == 6
    assert smith_abs_det([[1, 1], [1, 1]]) == 0
    circulant = [[-2, 0, 0, 1], [1, -2, 0, 0], [0, 1, -2, 0], [0, 0, 1, -2]]
    assert smith_abs_det(circulant) == 15


def test_smith_path_beyond_bareiss(monkeypatch):
    monkeypatch.setattr(spectral, "BAREISS_MAX_ORDER", 0)
    assert smith_abs_det([[2, 0], [0, 3]]) == 6
    assert smith_abs_det([[4, 2], [2, 1]]) == 0


@given(arrays(np.int64, (3, 3), elements=st.integers(-5, 5)))
@settings(max_examples=60)
def test_smith_abs_det_matches_float_determinant(M):
    assert smith_abs_det(M) == round(abs(np.linalg.det(M.astype(float))))


def test_truncated_log_product():
    summary = eigs_sym(np.diag([0.1, 0.2, 3.0]))
    product = truncated_log_product(summary, 0.5)
    assert product.log_product == pytest.approx(math.log(0.02))
    assert product.count == 2
    assert truncated_log_product(eigs_sym(POSITIVE), 0.5).count == 0
    kernel = truncated_log_product(eigs_sym(np.diag([0.0, 2.0])), 0.5)
    assert (kernel.log_product, kernel.count) == (0.0, 0)
    with pytest.raises(ValueError):
        truncated_log_product(summary, 0.0)


def test_empirical_moments():
    assert empirical_moments(eigs_sym(POSITIVE), 2) == pytest.approx([1.0, 5.0, 29.0])
    assert empirical_moments(eigs_sym(np.eye(4)), 3) == pytest.approx([1.0, 1.0, 1.0, 1.0])
    zero = eigs_sym(np.zeros((3, 3)), blocks=3, sites=1)
    assert empirical_moments(zero, 2) == pytest.approx([3.0, 0.0, 0.0])


def test_kernel_count():
    assert kernel_count(POSITIVE) == (0, 2)
    assert kernel_count(np.array([[2.0, 2.0], [2.0, 2.0]])) == (1, 2)
    assert kernel_count(np.zeros((3, 3))) == (3, 3)


def test_principal_minors_are_submultiplicative(ring, Z2):
    # log det A_{S u T} + log det A_{S n T} <= log det A_S + log det A_T for positive A
    A = assemble(ring("5 - x - 1/x - y - 1/y + x*y + x^-1*y^-1", "Z^2"), folner_box(Z2, 4)).matrix
    rng = np.random.default_rng(17)
    size = A.shape[0]

    def logdet(indices):
        indices = sorted(indices)
        return logdet_cholesky(A[np.ix_(indices, indices)]) if indices else 0.0

    for trial in range(200):
        S = set(rng.choice(size, size=rng.integers(1, size), replace=False).tolist())
        if trial % 2:
            T = set(range(size)) - S
        else:
            T = set(rng.choice(size, size=rng.integers(1, size), replace=False).tolist())
        assert logdet(S | T) + logdet(S & T) <= logdet(S) + logdet(T) + 1e-9


@pytest.mark.parametrize("n", [8, 16, 32])
def test_section_moments_match_ring_traces(ring, Z2, n):
    g = ring("3 - x - 1/y + 2*x*y", "Z^2")
    norm = l1_norm(g)
    F = folner_box(Z2, n)
    A = assemble(g, F).matrix
    reach = RingElement.from_dict(Z2, {s: 1 for s in [Z2.identity, *g.support]})
    power = np.eye(len(F))
    for k in range(1, 5):
        power = power @ A
        section_moment = np.trace(power) / len(F)
        ring_moment = trace(poly_apply([0] * k + [1], RingMatrix.from_element(g)))
        # paths of length k from t stay in F when (reach^k) t is inside F
        K = FolnerSet.from_elements((reach ** k).support)
        bound = norm ** k * (1 - invariance_ratio(Z2, F, K))
        assert abs(section_moment - ring_moment) <= bound + 1e-9


laurent2 = st.dictionaries(
    st.tuples(st.integers(-2, 2), st.integers(-2, 2)), st.integers(-3, 3), min_size=1, max_size=4
)


@given(laurent2)
@settings(max_examples=30, deadline=None)
def test_cholesky_agrees_with_spectrum(terms):
    Z2 = GroupDescriptor.lattice(2)
    f = RingElement.from_dict(Z2, terms)
    g = star(f) * f + 1
    A = assemble(g, folner_box(Z2, 4)).matrix
    assert logdet_cholesky(A) == pytest.approx(eigs_sym(A).logdet, rel=1e-9, abs=1e-9)


@given(st.integers(1, 12).flatmap(lambda n: arrays(np.int64, (n, n), elements=st.integers(-2, 2))))
@settings(max_examples=60, deadline=None)
def test_smith_abs_det_matches_lu_up_to_order_twelve(M):
    assert smith_abs_det(M) == round(abs(np.linalg.det(M.astype(float))))
