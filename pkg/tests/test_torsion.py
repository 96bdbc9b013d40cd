import math

import pytest

from src.exceptions import ComplexError, ShapeError
from src.groupring import block_diag
from src.torsion import (
    ChainComplex,
    direct_sum,
    l2_torsion,
    laplacians,
    load_complex,
    parse_complex,
    validate_complex,
    weak_acyclicity,
)

POINTS = [8, 16]
TOL = 5e-3
LAPLACIAN = "4 - x - 1/x - y - 1/y"
X_MINUS_TWO = "group = Z\nf1 = [[x-2]]\n"


def test_parse_complex(koszul):
    assert koszul.length == 2
    assert koszul.ranks == [1, 2, 1]
    assert koszul.group.rank == 2


def test_parse_continuation_lines():
    C = parse_complex("group = Z^2\nf1 = [[x-1],\n      [y-1]]\n")
    assert C.boundary(1).shape == (2, 1)
    assert C.boundary(2) is None


@pytest.mark.parametrize("text", [
    "f1 = [[x-1]]\n",
    "group = Z\nf2 = [[x-1]]\n",
    "group = Z\nf1 = [[x]]\nf1 = [[x]]\n",
    "[[x-1]]\ngroup = Z\n",
])
def test_malformed_complexes(text):
    with pytest.raises(ComplexError):
        parse_complex(text)


def test_boundary_shapes_must_chain():
    with pytest.raises(ShapeError):
        parse_complex("group = Z^2\nf1 = [[x-1], [y-1]]\nf2 = [[x-1]]\n")
    with pytest.raises(ComplexError):
        ChainComplex(())


def test_load_complex(tmp_path):
    path = tmp_path / "line.cx"
    path.write_text(X_MINUS_TWO, encoding="utf-8")
    assert load_complex(path).ranks == [1, 1]
    with pytest.raises(OSError):
        load_complex(tmp_path / "missing.cx")


def test_validate_complex(koszul):
    validation = validate_complex(koszul)
    assert validation.euler == 0
    assert validation.chain_ok
    assert validate_complex(parse_complex(X_MINUS_TWO)).euler == 0
    broken = parse_complex("group = Z\nf1 = [[x-1]]\nf2 = [[1]]\n")
    assert not validate_complex(broken).chain_ok


def test_koszul_laplacians(koszul, matrix):
    L = matrix(LAPLACIAN, "Z^2")
    deltas = laplacians(koszul)
    assert len(deltas) == 3
    assert deltas[0] == L
    assert deltas[1] == block_diag(L, L)
    assert deltas[2] == L


def test_weak_acyclicity(koszul):
    verdicts = weak_acyclicity(koszul, points=POINTS)
    assert [v.level for v in verdicts] == [0, 1, 2]
    assert all(v.acyclic for v in verdicts)
    zero = weak_acyclicity(parse_complex("group = Z\nf1 = [[0]]\n"), points=[4, 8])
    assert not any(v.acyclic for v in zero)
    with pytest.raises(ComplexError):
        weak_acyclicity(parse_complex("group = Z\nf1 = [[x-1]]\nf2 = [[1]]\n"), points=[4])


def test_koszul_pseudo_torsion_vanishes(koszul):
    report = l2_torsion(koszul, method="pseudo", points=POINTS)
    assert [lvl.method for lvl in report.per_level] == ["direct", "adjoint"]
    # f2* f2 has rank one at every point of the torus; its sections lose the boundary layer
    assert 0.4 < report.per_level[1].kernel_fraction <= 0.5
    # both levels section the same Laplacian
    assert report.rho == 0.0


def test_koszul_laplacian_torsion_vanishes(koszul):
    report = l2_torsion(koszul, method="laplacian", points=POINTS)
    assert [lvl.level for lvl in report.laplacian_levels] == [1, 2]
    assert abs(report.rho) < 1e-9
    assert report.rho == report.laplacian_rho


def test_both_methods_agree(koszul):
    report = l2_torsion(koszul, method="both", points=POINTS)
    assert report.discrepancy < 1e-9
    assert not any("differ" in note for note in report.notes)


def test_torsion_of_a_single_map():
    report = l2_torsion(parse_complex(X_MINUS_TWO), method="both", cap=64)
    assert report.rho == pytest.approx(math.log(2), abs=5e-3)
    assert report.laplacian_rho == pytest.approx(report.rho, abs=1e-12)
    low, high = report.interval
    assert low <= report.rho <= high


def test_direct_sum_doubles_torsion():
    C = parse_complex(X_MINUS_TWO)
    single = l2_torsion(C, method="pseudo", points=[16, 32])
    double = l2_torsion(direct_sum(C, C), method="pseudo", points=[16, 32])
    assert direct_sum(C, C).ranks == [2, 2]
    assert double.rho == pytest.approx(2 * single.rho, rel=1e-9)


def test_direct_sum_validation(koszul):
    with pytest.raises(ComplexError):
        direct_sum(koszul, parse_complex(X_MINUS_TWO))


def test_torsion_rejects_bad_input(koszul):
    with pytest.raises(ValueError):
        l2_torsion(koszul, method="spectral")
    with pytest.raises(ComplexError):
        l2_torsion(parse_complex("group = Z\nf1 = [[0]]\n"), points=[4, 8])
    with pytest.raises(ComplexError):
        l2_torsion(parse_complex("group = Z\nf1 = [[x-1]]\nf2 = [[1]]\n"), check_acyclic=False, points=[4])


@pytest.mark.parametrize("method", ["pseudo", "laplacian"])
def test_torsion_is_nonnegative(koszul, method):
    line = parse_complex(X_MINUS_TWO)
    cases = [koszul, direct_sum(koszul, koszul), direct_sum(line, line)]
    for C in cases:
        report = l2_torsion(C, method=method, points=POINTS)
        assert report.rho >= -TOL
