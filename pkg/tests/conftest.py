"""Shared fixtures; file logging is switched off before any src module loads."""

import os

os.environ["FKDET_LOG_DIR"] = ""
os.environ.setdefault("FKDET_LOG_LEVEL", "WARNING")

import pytest  # noqa: E402

from src.expressions import parse_group, parse_ring_expr, parse_ring_matrix  # noqa: E402
from src.groups import GroupDescriptor  # noqa: E402
from src.torsion import parse_complex  # noqa: E402

KOSZUL = """\
group = Z^2
# Koszul resolution of the trivial module
f1 = [[x-1], [y-1]]
f2 = [[y-1, -(x-1)]]
"""


@pytest.fixture
def Z():
    return GroupDescriptor.lattice(1)


@pytest.fixture
def Z2():
    return GroupDescriptor.lattice(2)


@pytest.fixture
def H3():
    return GroupDescriptor.heisenberg()


@pytest.fixture
def ring():
    """Parse an expression over a group given by its spec."""
    def make(text: str, group: str = "Z"):
        return parse_ring_expr(text, parse_group(group))
    return make


@pytest.fixture
def matrix():
    def make(text: str, group: str = "Z"):
        return parse_ring_matrix(text, parse_group(group))
    return make


@pytest.fixture
def koszul():
    return parse_complex(KOSZUL)
