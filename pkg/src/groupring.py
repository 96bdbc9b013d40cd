"""Exact arithmetic in group rings and matrices over them."""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Number
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.exceptions import DomainMismatchError, ShapeError
from src.groups import Cocycle, GroupDescriptor, GroupElement, GroupKind, cocycle_eval

Coefficient = Union[int, Fraction, complex]


class CoefficientDomain(str, Enum):
    """Coefficient domains, ordered by promotion integer -> rational -> complex."""
    INTEGER = "integer"
    RATIONAL = "rational"
    COMPLEX = "complex"

    @property
    def rank(self) -> int:
        return _DOMAIN_ORDER.index(self)

    def join(self, other: "CoefficientDomain") -> "CoefficientDomain":
        return self if self.rank >= other.rank else other

    @property
    def is_exact(self) -> bool:
        return self != CoefficientDomain.COMPLEX


_DOMAIN_ORDER = [CoefficientDomain.INTEGER, CoefficientDomain.RATIONAL, CoefficientDomain.COMPLEX]


def domain_of(value: Coefficient) -> CoefficientDomain:
    if isinstance(value, bool):
        raise DomainMismatchError("Booleans are not ring coefficients")
    if isinstance(value, int):
        return CoefficientDomain.INTEGER
    if isinstance(value, Fraction):
        return CoefficientDomain.RATIONAL
    if isinstance(value, (float, complex)):
        return CoefficientDomain.COMPLEX
    raise DomainMismatchError(f"Unsupported coefficient type {type(value).__name__}")


def coerce(value: Coefficient, domain: CoefficientDomain) -> Coefficient:
    """Convert a coefficient into the representation used by domain."""
    if domain == CoefficientDomain.COMPLEX:
        return complex(value)
    if isinstance(value, (float, complex)):
        raise DomainMismatchError(f"Cannot demote {value!r} to the {domain.value} domain")
    if domain == CoefficientDomain.INTEGER:
        if isinstance(value, Fraction) and value.denominator != 1:
            raise DomainMismatchError(f"Cannot demote {value} to the integer domain")
        return int(value)
    return Fraction(value)


def conjugate(value: Coefficient) -> Coefficient:
    return value.conjugate() if isinstance(value, complex) else value


@dataclass(frozen=True)
class RingElement:
    """Finitely supported function group -> coefficients; no stored zeros."""
    group: GroupDescriptor
    terms: Tuple[Tuple[GroupElement, Coefficient], ...]
    domain: CoefficientDomain = CoefficientDomain.INTEGER

    @classmethod
    def from_dict(
        cls,
        group: GroupDescriptor,
        coefficients: Mapping[GroupElement, Coefficient],
        domain: Optional[CoefficientDomain] = None
    ) -> "RingElement":
        if domain is None:
            domain = CoefficientDomain.INTEGER
            for value in coefficients.values():
                domain = domain.join(domain_of(value))
        if group.twist is not None:
            # twisted products leave the exact domains
            domain = CoefficientDomain.COMPLEX
        terms = []
        for element, value in coefficients.items():
            if value == 0:
                continue
            terms.append((group.canonical(element), coerce(value, domain)))
        terms.sort(key=lambda term: term[0])
        return cls(group, tuple(terms), domain)

    @classmethod
    def zero(cls, group: GroupDescriptor, domain: CoefficientDomain = CoefficientDomain.INTEGER) -> "RingElement":
        return cls.from_dict(group, {}, domain)

    @classmethod
    def one(cls, group: GroupDescriptor, domain: CoefficientDomain = CoefficientDomain.INTEGER) -> "RingElement":
        return cls.monomial(group, group.identity, coerce(1, domain))

    @classmethod
    def monomial(cls, group: GroupDescriptor, element: GroupElement, coefficient: Coefficient = 1) -> "RingElement":
        return cls.from_dict(group, {element: coefficient})

    @classmethod
    def scalar(cls, group: GroupDescriptor, coefficient: Coefficient) -> "RingElement":
        return cls.from_dict(group, {group.identity: coefficient})

    # ---- accessors ----

    def as_dict(self) -> Dict[GroupElement, Coefficient]:
        return dict(self.terms)

    @property
    def support(self) -> List[GroupElement]:
        return [element for element, _ in self.terms]

    def coefficient(self, element: GroupElement) -> Coefficient:
        return self.as_dict().get(element, coerce(0, self.domain))

    def is_zero(self) -> bool:
        return not self.terms

    def promote(self, domain: CoefficientDomain) -> "RingElement":
        domain = self.domain.join(domain)
        if domain == self.domain:
            return self
        return RingElement(self.group, tuple((e, coerce(c, domain)) for e, c in self.terms), domain)

    # ---- arithmetic ----

    def _check_group(self, other: "RingElement"):
        if self.group != other.group:
            raise DomainMismatchError(f"Operands over different groups: {self.group} and {other.group}")

    def __add__(self, other: "RingElement") -> "RingElement":
        if isinstance(other, Number):
            other = RingElement.scalar(self.group, other)
        self._check_group(other)
        domain = self.domain.join(other.domain)
        result = dict(self.promote(domain).terms)
        for element, value in other.promote(domain).terms:
            result[element] = result.get(element, 0) + value
        return RingElement.from_dict(self.group, result, domain)

    __radd__ = __add__

    def __neg__(self) -> "RingElement":
        return RingElement(self.group, tuple((e, -c) for e, c in self.terms), self.domain)

    def __sub__(self, other: "RingElement") -> "RingElement":
        if isinstance(other, Number):
            other = RingElement.scalar(self.group, other)
        return self + (-other)

    def __rsub__(self, other: Coefficient) -> "RingElement":
        return RingElement.scalar(self.group, other) - self

    def __mul__(self, other: Union["RingElement", Coefficient]) -> "RingElement":
        if isinstance(other, RingElement):
            return convolve(self, other)
        return self.scale(other)

    def __rmul__(self, other: Coefficient) -> "RingElement":
        return self.scale(other)

    def scale(self, factor: Coefficient) -> "RingElement":
        domain = self.domain.join(domain_of(factor))
        return RingElement.from_dict(
            self.group, {e: c * factor for e, c in self.promote(domain).terms}, domain
        )

    def __pow__(self, k: int) -> "RingElement":
        if k < 0:
            raise ValueError("Only monomials can be raised to negative powers; use inverse_monomial")
        result = RingElement.one(self.group, self.domain)
        for _ in range(k):
            result = result * self
        return result

    def star(self) -> "RingElement":
        return star(self)

    def __str__(self) -> str:
        from src.expressions import format_ring_expr
        return format_ring_expr(self)


def convolve(a: RingElement, b: RingElement, alpha: Optional[Cocycle] = None) -> RingElement:
    """
    Twisted convolution (a b)_u = sum over st = u of a_s b_t alpha(s, t).

    Args:
        a: left factor
        b: right factor
        alpha: Cocycle override. If None, uses the group's own twist (if any)

    Returns:
        The product in the (twisted) group ring
    """
    a._check_group(b)
    group = a.group
    twist = alpha if alpha is not None else group.twist
    domain = a.domain.join(b.domain)
    if twist is not None:
        domain = CoefficientDomain.COMPLEX
    a, b = a.promote(domain), b.promote(domain)
    result: Dict[GroupElement, Coefficient] = {}
    for s, x in a.terms:
        for t, y in b.terms:
            u = group.mul(s, t)
            value = x * y
            if twist is not None:
                value *= cocycle_eval(twist, s, t)
            result[u] = result.get(u, 0) + value
    return RingElement.from_dict(group, result, domain)


def inverse_monomial(a: RingElement) -> RingElement:
    """Inverse of c*g: c^-1 alpha(g, g^-1)^-1 g^-1."""
    if len(a.terms) != 1:
        raise DomainMismatchError(f"Only single-term elements are invertible here, got {len(a.terms)} terms")
    (element, value), = a.terms
    group = a.group
    if a.domain == CoefficientDomain.INTEGER and value in (1, -1):
        inverse_value = value
    elif a.domain.is_exact:
        inverse_value = Fraction(1) / value
    else:
        inverse_value = 1 / value
    if group.twist is not None:
        inverse_value = complex(inverse_value) / group.cocycle(element, group.inv(element))
    return RingElement.from_dict(group, {group.inv(element): inverse_value})


@dataclass(frozen=True)
class RingMatrix:
    """A rows x cols matrix of ring elements over one group and one coefficient domain."""
    entries: Tuple[Tuple[RingElement, ...], ...]

    def __post_init__(self):
        if not self.entries or not self.entries[0]:
            raise ShapeError("Ring matrices must have at least one row and one column")
        width = len(self.entries[0])
        if any(len(row) != width for row in self.entries):
            raise ShapeError("Ragged ring matrix")
        group = self.entries[0][0].group
        domain = CoefficientDomain.INTEGER
        for row in self.entries:
            for entry in row:
                if entry.group != group:
                    raise DomainMismatchError("All matrix entries must live over the same group")
                domain = domain.join(entry.domain)
        promoted = tuple(tuple(entry.promote(domain) for entry in row) for row in self.entries)
        object.__setattr__(self, "entries", promoted)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[RingElement]]) -> "RingMatrix":
        return cls(tuple(tuple(row) for row in rows))

    @classmethod
    def from_element(cls, element: RingElement) -> "RingMatrix":
        return cls(((element,),))

    @classmethod
    def identity(cls, group: GroupDescriptor, d: int, domain: CoefficientDomain = CoefficientDomain.INTEGER) -> "RingMatrix":
        one, zero = RingElement.one(group, domain), RingElement.zero(group, domain)
        return cls(tuple(tuple(one if i == j else zero for j in range(d)) for i in range(d)))

    @classmethod
    def zeros(cls, group: GroupDescriptor, rows: int, cols: int) -> "RingMatrix":
        zero = RingElement.zero(group)
        return cls(tuple(tuple(zero for _ in range(cols)) for _ in range(rows)))

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    @property
    def group(self) -> GroupDescriptor:
        return self.entries[0][0].group

    @property
    def domain(self) -> CoefficientDomain:
        return self.entries[0][0].domain

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, index: Tuple[int, int]) -> RingElement:
        i, j = index
        return self.entries[i][j]

    def is_zero(self) -> bool:
        return all(entry.is_zero() for row in self.entries for entry in row)

    def support(self) -> List[GroupElement]:
        elements = {e for row in self.entries for entry in row for e in entry.support}
        return sorted(elements)

    def __add__(self, other: "RingMatrix") -> "RingMatrix":
        if self.shape != other.shape:
            raise ShapeError(f"Cannot add {self.shape} and {other.shape} matrices")
        return RingMatrix(tuple(
            tuple(a + b for a, b in zip(row_a, row_b))
            for row_a, row_b in zip(self.entries, other.entries)
        ))

    def __neg__(self) -> "RingMatrix":
        return RingMatrix(tuple(tuple(-a for a in row) for row in self.entries))

    def __sub__(self, other: "RingMatrix") -> "RingMatrix":
        return self + (-other)

    def __matmul__(self, other: "RingMatrix") -> "RingMatrix":
        return mat_mul(self, other)

    def scale(self, factor: Coefficient) -> "RingMatrix":
        return RingMatrix(tuple(tuple(a.scale(factor) for a in row) for row in self.entries))

    def star(self) -> "RingMatrix":
        return star(self)

    def is_star_symmetric(self) -> bool:
        return self.is_square and star(self) == self

    def __str__(self) -> str:
        from src.expressions import format_ring_expr
        return format_ring_expr(self)


def star(x: Union[RingElement, RingMatrix]) -> Union[RingElement, RingMatrix]:
    """
    Involution: (a*)_s = conj(a_{s^-1}) conj(alpha(s, s^-1)), (f*)_ij = (f_ji)*.

    The phase makes the represented operator of a* the adjoint of that of a
    in the twisted case; it is 1 for untwisted groups.
    """
    if isinstance(x, RingMatrix):
        return RingMatrix(tuple(
            tuple(star(x.entries[j][i]) for j in range(x.rows))
            for i in range(x.cols)
        ))
    group = x.group
    result = {}
    for element, value in x.terms:
        inverse = group.inv(element)
        value = conjugate(value)
        if group.twist is not None:
            value = value * group.cocycle(inverse, element).conjugate()
        result[inverse] = value
    return RingElement.from_dict(group, result, x.domain)


def mat_mul(f: RingMatrix, g: RingMatrix) -> RingMatrix:
    """Block convolution product of a d'xd and a dxd'' ring matrix."""
    if f.cols != g.rows:
        raise ShapeError(f"Cannot multiply {f.shape} by {g.shape}")
    if f.group != g.group:
        raise DomainMismatchError(f"Operands over different groups: {f.group} and {g.group}")
    rows = []
    for i in range(f.rows):
        row = []
        for k in range(g.cols):
            acc = RingElement.zero(f.group, f.domain.join(g.domain))
            for j in range(f.cols):
                acc = acc + convolve(f.entries[i][j], g.entries[j][k])
            row.append(acc)
        rows.append(row)
    return RingMatrix.from_rows(rows)


def trace(f: RingMatrix) -> Coefficient:
    """tr f = sum over j of the identity coefficient of f_jj."""
    if not f.is_square:
        raise ShapeError(f"Trace requires a square matrix, got {f.shape}")
    identity = f.group.identity
    total = coerce(0, f.domain)
    for j in range(f.rows):
        total += f.entries[j][j].coefficient(identity)
    return total


def l1_norm(f: Union[RingElement, RingMatrix]) -> float:
    """Sum of absolute values of all coefficients; bounds the operator norm."""
    if isinstance(f, RingElement):
        return float(sum(abs(c) for _, c in f.terms))
    return float(sum(l1_norm(entry) for row in f.entries for entry in row))


def poly_apply(p: Sequence[int], f: RingMatrix) -> RingMatrix:
    """
    Evaluate p(f) = sum_k p[k] f^k exactly (Horner scheme).

    Args:
        p: polynomial coefficients, constant term first
        f: square ring matrix

    Returns:
        p(f) as a ring matrix
    """
    if not f.is_square:
        raise ShapeError(f"Polynomial evaluation requires a square matrix, got {f.shape}")
    identity = RingMatrix.identity(f.group, f.rows, f.domain)
    result = RingMatrix.zeros(f.group, f.rows, f.cols)
    for coefficient in reversed(list(p)):
        result = mat_mul(result, f) + identity.scale(coefficient)
    return result


def block_diag(f: RingMatrix, g: RingMatrix) -> RingMatrix:
    """Direct sum f (+) g."""
    if f.group != g.group:
        raise DomainMismatchError("Direct sum of matrices over different groups")
    zero = RingElement.zero(f.group)
    rows = [list(row) + [zero] * g.cols for row in f.entries]
    rows += [[zero] * f.cols + list(row) for row in g.entries]
    return RingMatrix.from_rows(rows)


def as_matrix(x: Union[RingElement, RingMatrix]) -> RingMatrix:
    return x if isinstance(x, RingMatrix) else RingMatrix.from_element(x)


def evaluate_symbol(f: Union[RingElement, RingMatrix], angles) -> np.ndarray:
    """
    Fourier symbol f(e^{i theta}) = sum_s f_s exp(i <s, theta>) of a matrix over Z^d.

    Args:
        f: ring matrix (or element) over an untwisted lattice group
        angles: array of shape (m, d) of angles theta

    Returns:
        Complex array of shape (m, rows, cols)
    """
    f = as_matrix(f)
    if f.group.twist is not None or f.group.kind != GroupKind.INTEGER_LATTICE:
        raise DomainMismatchError("Symbols are only defined for untwisted Z^d")
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim == 1:
        angles = angles.reshape(-1, 1)
    if angles.shape[1] != f.group.rank:
        raise ShapeError(f"Angles need {f.group.rank} columns, got {angles.shape[1]}")
    values = np.zeros((angles.shape[0], f.rows, f.cols), dtype=np.complex128)
    for i, row in enumerate(f.entries):
        for j, entry in enumerate(row):
            for element, coefficient in entry.terms:
                phase = angles @ np.asarray(element, dtype=np.float64)
                values[:, i, j] += complex(coefficient) * np.exp(1j * phase)
    return values
