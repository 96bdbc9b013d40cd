from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.exceptions import DomainMismatchError, RestrictionError
from src.groupring import RingElement, RingMatrix, star
from src.groups import FolnerSet, GroupDescriptor, folner_box
from src.restrict import Side, assemble, dump_section, grow, load_section, sections


def test_left_section_entry_rule(matrix, Z):
    section = assemble(matrix("x-2"), folner_box(Z, 3))
    expected = [[-2, 0, 0], [1, -2, 0], [0, 1, -2]]
    assert np.array_equal(section.matrix, expected)
    assert section.sites == 3
    assert section.size == 3


def test_positive_section(matrix, Z):
    section = assemble(matrix("5 - 2*x - 2/x"), folner_box(Z, 2))
    assert np.array_equal(section.matrix, [[5, -2], [-2, 5]])


def test_identity_section(Z2):
    section = assemble(RingElement.one(Z2), folner_box(Z2, 3))
    assert np.array_equal(section.matrix, np.eye(9))


def test_block_layout(matrix, Z2):
    f = matrix("[[x-1], [y-1]]", "Z^2")
    F = folner_box(Z2, 2)
    left = assemble(f, F)
    right = assemble(f, F, side=Side.RIGHT)
    assert left.matrix.shape == (8, 4)
    assert right.matrix.shape == (4, 8)
    # block 1 of the left section is the section of y - 1
    assert np.array_equal(left.matrix[4:, :], assemble(matrix("y-1", "Z^2"), F).matrix)
    assert left.row_label(5) == (1, (0, 1))
    assert left.row_index(1, (0, 1)) == 5


def test_heisenberg_section_is_partial_permutation(ring, H3):
    section = assemble(ring("x", "H3"), folner_box(H3, 2))
    column_sums = section.matrix.sum(axis=0)
    assert set(column_sums.tolist()) <= {0.0, 1.0}
    assert section.matrix.max() == 1.0


def test_exact_sections(ring, Z):
    section = assemble(ring("1/2 - x"), folner_box(Z, 2), exact=True)
    assert section.is_exact
    assert section.matrix[0, 0] == Fraction(1, 2)
    assert section.matrix[1, 0] == -1
    with pytest.raises(DomainMismatchError):
        assemble(ring("i*x"), folner_box(Z, 2), exact=True)


def test_twisted_section_is_complex():
    G = GroupDescriptor.lattice(2, theta=0.25)
    section = assemble(RingElement.monomial(G, (1, 0)), folner_box(G, 2))
    assert section.matrix.dtype == np.complex128
    # x acting on (0, 1) carries alpha((1, 0), (0, 1)) = i
    assert section.matrix[section.row_index(0, (1, 1)), section.col_index(0, (0, 1))] == pytest.approx(1j)


def test_grow_matches_assemble(ring, Z, Z2):
    f = ring("x-2")
    small = assemble(f, FolnerSet.from_elements([(0,)]))
    grown = grow(small, FolnerSet.from_elements([(0,), (1,)]))
    assert np.array_equal(grown.matrix, assemble(f, FolnerSet.from_elements([(0,), (1,)])).matrix)
    assert grow(small, small.folner) is small

    g = ring("5 - x - 1/x - y - 1/y", "Z^2")
    grown = grow(assemble(g, folner_box(Z2, 2)), folner_box(Z2, 3))
    assert np.array_equal(grown.matrix, assemble(g, folner_box(Z2, 3)).matrix)


def test_grow_needs_nested_sets(ring):
    f = ring("x")
    with pytest.raises(RestrictionError):
        grow(assemble(f, FolnerSet.from_elements([(5,)])), FolnerSet.from_elements([(0,), (1,)]))


def test_sections_chain(ring, Z):
    f = ring("x-2")
    chain = sections(f, [folner_box(Z, n) for n in (2, 4, 8)])
    assert [s.sites for s in chain] == [2, 4, 8]
    assert np.array_equal(chain[-1].matrix, assemble(f, folner_box(Z, 8)).matrix)


def test_arity_mismatch(ring, Z2):
    with pytest.raises(DomainMismatchError):
        assemble(ring("x"), folner_box(Z2, 2))


def test_dump_and_load(tmp_path, ring, Z):
    section = assemble(ring("5 - 2*x - 2/x"), folner_box(Z, 4))
    path = dump_section(section, tmp_path / "section.bin")
    assert np.array_equal(load_section(path), section.matrix)
    assert path.stat().st_size == 32 + 16 * 8
    (tmp_path / "bad.bin").write_bytes(b"not a dump")
    with pytest.raises(RestrictionError):
        load_section(tmp_path / "bad.bin")


offsets2 = st.tuples(st.integers(-2, 2), st.integers(-2, 2))
offsets3 = st.tuples(st.integers(-1, 1), st.integers(-1, 1), st.integers(-1, 1))
small = st.integers(-3, 3)


def element(group, keys):
    return st.dictionaries(keys, small, max_size=4).map(lambda terms: RingElement.from_dict(group, terms))


def ring_matrix(group, keys, rows, cols):
    return st.lists(
        st.lists(element(group, keys), min_size=cols, max_size=cols), min_size=rows, max_size=rows
    ).map(RingMatrix.from_rows)


@pytest.mark.parametrize("group, keys, n", [
    (GroupDescriptor.lattice(2), offsets2, 3),
    (GroupDescriptor.lattice(2, theta=0.3), offsets2, 3),
    (GroupDescriptor.heisenberg(), offsets3, 2),
])
def test_section_of_adjoint_is_adjoint_of_section(group, keys, n):
    F = folner_box(group, n)

    @given(ring_matrix(group, keys, 2, 1))
    @settings(max_examples=25, deadline=None)
    def check(f):
        adjoint = assemble(star(f), F).matrix
        assert adjoint.shape == (len(F), 2 * len(F))
        assert np.allclose(adjoint, assemble(f, F).matrix.conj().T, atol=1e-12)

    check()


@given(st.dictionaries(st.tuples(st.integers(-4, 4)), small, max_size=5))
@settings(max_examples=40, deadline=None)
def test_sections_over_z_are_toeplitz(terms):
    Z = GroupDescriptor.lattice(1)
    f = RingElement.from_dict(Z, terms)
    A = assemble(f, folner_box(Z, 6)).matrix
    for i in range(6):
        for j in range(6):
            assert A[i, j] == f.coefficient((i - j,))
