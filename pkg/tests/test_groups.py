import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.exceptions import GroupError
from src.groups import (
    Cocycle,
    FolnerSet,
    GroupDescriptor,
    box_size,
    cocycle_eval,
    folner_box,
    invariance_ratio,
    schedule,
)

small = st.integers(min_value=-6, max_value=6)
h3_elements = st.tuples(small, small, small)


def unitriangular(a):
    return np.array([[1, a[0], a[2]], [0, 1, a[1]], [0, 0, 1]])


def test_group_laws():
    Z2 = GroupDescriptor.lattice(2)
    Z4 = GroupDescriptor.finite(4)
    H3 = GroupDescriptor.heisenberg()
    assert Z2.mul((1, 2), (3, 4)) == (4, 6)
    assert Z4.mul((3,), (2,)) == (1,)
    assert H3.mul((1, 0, 0), (0, 1, 0)) == (1, 1, 1)
    assert Z2.inv((1, -3)) == (-1, 3)
    assert Z4.inv((3,)) == (1,)
    assert H3.inv((1, 1, 1)) == (-1, -1, 0)


@given(h3_elements, h3_elements)
def test_heisenberg_matches_matrix_model(a, b):
    H3 = GroupDescriptor.heisenberg()
    product = H3.mul(a, b)
    assert np.array_equal(unitriangular(product), unitriangular(a) @ unitriangular(b))


@given(h3_elements, h3_elements, h3_elements)
def test_heisenberg_associative_with_inverses(a, b, c):
    H3 = GroupDescriptor.heisenberg()
    assert H3.mul(H3.mul(a, b), c) == H3.mul(a, H3.mul(b, c))
    assert H3.mul(a, H3.inv(a)) == H3.identity


@given(st.tuples(small, small), st.tuples(small, small))
def test_finite_product_is_canonical(a, b):
    G = GroupDescriptor.finite(3, 5)
    product = G.mul(G.canonical(a), G.canonical(b))
    assert product == G.canonical((a[0] + b[0], a[1] + b[1]))


def test_folner_boxes():
    Z = GroupDescriptor.lattice(1)
    Z2 = GroupDescriptor.lattice(2)
    assert folner_box(Z, 3).elements == ((0,), (1,), (2,))
    assert folner_box(Z2, 2).elements == ((0, 0), (0, 1), (1, 0), (1, 1))
    assert len(folner_box(GroupDescriptor.heisenberg(), 2)) == 16
    assert len(folner_box(GroupDescriptor.finite(2, 3), 7)) == 6
    assert box_size(GroupDescriptor.heisenberg(), 3) == 81


def test_folner_set_rejects_duplicates():
    with pytest.raises(GroupError):
        FolnerSet.from_elements([(0,), (0,)])
    with pytest.raises(GroupError):
        folner_box(GroupDescriptor.lattice(1), 0)


def test_invariance_ratio():
    Z = GroupDescriptor.lattice(1)
    Z2 = GroupDescriptor.lattice(2)
    assert invariance_ratio(Z, folner_box(Z, 10), FolnerSet.from_elements([(0,), (1,)])) == pytest.approx(0.9)
    assert invariance_ratio(Z2, folner_box(Z2, 2), folner_box(Z2, 2)) == pytest.approx(0.25)
    assert invariance_ratio(Z2, folner_box(Z2, 7), FolnerSet.from_elements([(0, 0)])) == 1.0


def test_cocycle_values():
    assert cocycle_eval(Cocycle(0.25), (1, 0), (0, 1)) == pytest.approx(1j)
    assert cocycle_eval(Cocycle(0.0), (3, -1), (2, 5)) == 1
    with pytest.raises(GroupError):
        cocycle_eval(Cocycle(0.25), (1, 0, 0), (0, 1, 0))


@given(st.floats(min_value=0, max_value=1), st.tuples(small, small), st.tuples(small, small), st.tuples(small, small))
def test_cocycle_identity(theta, r, s, t):
    alpha = Cocycle(theta)
    Z2 = GroupDescriptor.lattice(2)
    # alpha(r, s) alpha(rs, t) = alpha(r, st) alpha(s, t)
    left = alpha(r, s) * alpha(Z2.mul(r, s), t)
    right = alpha(r, Z2.mul(s, t)) * alpha(s, t)
    assert cmath.isclose(left, right, abs_tol=1e-9)
    assert cmath.isclose(alpha(s, s), 1)


def test_twist_only_on_z2():
    with pytest.raises(GroupError):
        GroupDescriptor.lattice(3, theta=0.1)


def test_schedule():
    Z = GroupDescriptor.lattice(1)
    assert schedule(Z, 64) == [4, 8, 16, 32, 64]
    assert schedule(Z, 6) == [4, 6]
    assert schedule(Z, 3) == [3]
    assert schedule(GroupDescriptor.finite(4), 100) == [1]
    assert schedule(Z) == [4, 8, 16, 32, 64, 128, 256, 512]


def test_schedule_respects_section_order():
    Z2 = GroupDescriptor.lattice(2)
    assert schedule(Z2, 64, blocks=2, max_order=2048) == [4, 8, 16, 32]


def test_invariance_ratio_tends_to_one():
    Z2 = GroupDescriptor.lattice(2)
    K = folner_box(Z2, 2)
    ratios = [invariance_ratio(Z2, folner_box(Z2, n), K) for n in (4, 8, 16, 32)]
    assert ratios == pytest.approx([((n - 1) / n) ** 2 for n in (4, 8, 16, 32)])
    deficits = [1 - r for r in ratios]
    # the boundary share roughly halves with every doubling
    assert all(b < 0.6 * a for a, b in zip(deficits, deficits[1:]))


def test_heisenberg_invariance_ratio_increases():
    H3 = GroupDescriptor.heisenberg()
    K = FolnerSet.from_elements([H3.identity, *H3.generators()[:2]])
    ratios = [invariance_ratio(H3, folner_box(H3, n), K) for n in (2, 4, 8)]
    assert ratios[0] < ratios[1] < ratios[2] < 1.0


def test_schedule_rejects_non_positive_cap():
    Z = GroupDescriptor.lattice(1)
    with pytest.raises(GroupError):
        schedule(Z, 0)
    with pytest.raises(GroupError):
        schedule(GroupDescriptor.finite(3), -1)
