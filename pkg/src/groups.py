"""Amenable groups, Følner boxes, invariance ratios and 2-cocycles."""

import cmath
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from src.exceptions import GroupError
from src.logger import get_logger

logger = get_logger(__name__)

GroupElement = Tuple[int, ...]

# Default largest box parameter per group kind
DEFAULT_CAPS = {1: 512, 2: 64, 3: 16}
DEFAULT_CAP_HIGH_RANK = 8
DEFAULT_CAP_HEISENBERG = 8
SMALLEST_BOX = 4


class GroupKind(str, Enum):
    """Supported group families."""
    INTEGER_LATTICE = "lattice"
    FINITE_CYCLIC_PRODUCT = "finite"
    HEISENBERG3 = "heisenberg"


@dataclass(frozen=True)
class Cocycle:
    """Normalized unitary 2-cocycle alpha_theta of Z^2."""
    theta: float

    def __call__(self, s: GroupElement, t: GroupElement) -> complex:
        return cocycle_eval(self, s, t)


def cocycle_eval(alpha: Cocycle, s: GroupElement, t: GroupElement) -> complex:
    """
    Evaluate alpha_theta((n1, n2), (m1, m2)) = exp(2 pi i theta (n1 m2 - n2 m1)).

    Args:
        alpha: Cocycle instance
        s: first element of Z^2
        t: second element of Z^2

    Returns:
        Unit-modulus complex number
    """
    if len(s) != 2 or len(t) != 2:
        raise GroupError(f"Cocycle is defined on Z^2 only, got elements {s} and {t}")
    exponent = s[0] * t[1] - s[1] * t[0]
    if exponent == 0:
        return complex(1.0)
    return cmath.exp(2j * math.pi * alpha.theta * exponent)


@dataclass(frozen=True)
class GroupDescriptor:
    """The ambient group: Z^d, Z/n1 x ... x Z/nk or the discrete Heisenberg group."""
    kind: GroupKind
    rank: int = 1
    moduli: Tuple[int, ...] = ()
    twist: Optional[Cocycle] = None

    def __post_init__(self):
        if self.kind == GroupKind.INTEGER_LATTICE:
            if self.rank < 1:
                raise GroupError(f"Lattice rank must be positive, got {self.rank}")
        elif self.kind == GroupKind.FINITE_CYCLIC_PRODUCT:
            if not self.moduli or any(n < 1 for n in self.moduli):
                raise GroupError(f"Moduli must be positive, got {self.moduli}")
            object.__setattr__(self, "rank", len(self.moduli))
        else:
            object.__setattr__(self, "rank", 3)
        if self.twist is not None and not (self.kind == GroupKind.INTEGER_LATTICE and self.rank == 2):
            raise GroupError("A cocycle twist is only supported on Z^2")

    # ---- constructors ----

    @classmethod
    def lattice(cls, rank: int, theta: Optional[float] = None) -> "GroupDescriptor":
        twist = Cocycle(theta) if theta is not None else None
        return cls(GroupKind.INTEGER_LATTICE, rank=rank, twist=twist)

    @classmethod
    def finite(cls, *moduli: int) -> "GroupDescriptor":
        return cls(GroupKind.FINITE_CYCLIC_PRODUCT, moduli=tuple(moduli))

    @classmethod
    def heisenberg(cls) -> "GroupDescriptor":
        return cls(GroupKind.HEISENBERG3)

    # ---- structure ----

    @property
    def arity(self) -> int:
        return self.rank

    @property
    def is_finite(self) -> bool:
        return self.kind == GroupKind.FINITE_CYCLIC_PRODUCT

    @property
    def order(self) -> Optional[int]:
        return math.prod(self.moduli) if self.is_finite else None

    @property
    def identity(self) -> GroupElement:
        return (0,) * self.arity

    def generators(self) -> List[GroupElement]:
        """Standard generators; for H3 these are x, y and the central z."""
        return [tuple(int(i == j) for j in range(self.arity)) for i in range(self.arity)]

    def check(self, a: GroupElement) -> GroupElement:
        if len(a) != self.arity:
            raise GroupError(f"Element {a} has arity {len(a)}, expected {self.arity}")
        return a

    def canonical(self, a: Iterable[int]) -> GroupElement:
        a = tuple(int(c) for c in a)
        self.check(a)
        if self.is_finite:
            return tuple(c % n for c, n in zip(a, self.moduli))
        return a

    def mul(self, a: GroupElement, b: GroupElement) -> GroupElement:
        """Group law in canonical coordinates."""
        self.check(a)
        self.check(b)
        if self.kind == GroupKind.HEISENBERG3:
            # (a,b,c) <-> [[1,a,c],[0,1,b],[0,0,1]]
            return (a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1])
        if self.is_finite:
            return tuple((x + y) % n for x, y, n in zip(a, b, self.moduli))
        return tuple(x + y for x, y in zip(a, b))

    def inv(self, a: GroupElement) -> GroupElement:
        self.check(a)
        if self.kind == GroupKind.HEISENBERG3:
            return (-a[0], -a[1], -a[2] + a[0] * a[1])
        if self.is_finite:
            return tuple((-x) % n for x, n in zip(a, self.moduli))
        return tuple(-x for x in a)

    def cocycle(self, s: GroupElement, t: GroupElement) -> complex:
        """Twist factor alpha(s, t); 1 for untwisted groups."""
        if self.twist is None:
            return complex(1.0)
        return cocycle_eval(self.twist, s, t)

    def elements(self) -> List[GroupElement]:
        if not self.is_finite:
            raise GroupError("Only finite groups can be enumerated")
        return [tuple(c) for c in itertools.product(*(range(n) for n in self.moduli))]

    def __str__(self) -> str:
        from src.expressions import format_group
        return format_group(self)


@dataclass(frozen=True)
class FolnerSet:
    """Ordered, duplicate-free finite subset of a group."""
    elements: Tuple[GroupElement, ...]
    label: int = 0
    index_of: Dict[GroupElement, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.elements:
            raise GroupError("A Følner set must be nonempty")
        index = {e: i for i, e in enumerate(self.elements)}
        if len(index) != len(self.elements):
            raise GroupError("Følner set elements must be distinct")
        object.__setattr__(self, "index_of", index)

    @classmethod
    def from_elements(cls, elements: Iterable[Sequence[int]], label: int = 0) -> "FolnerSet":
        return cls(tuple(tuple(e) for e in elements), label=label)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, item: GroupElement) -> bool:
        return item in self.index_of

    def __iter__(self):
        return iter(self.elements)

    def issubset(self, other: "FolnerSet") -> bool:
        return all(e in other.index_of for e in self.elements)


def folner_box(group: GroupDescriptor, n: int) -> FolnerSet:
    """
    Box F_n anchored at the identity.

    Z^d gives {0..n-1}^d in lexicographic order, finite groups give every element,
    H3 gives {(a, b, c): 0 <= a, b < n, 0 <= c < n^2}.
    """
    if n < 1:
        raise GroupError(f"Box parameter must be positive, got {n}")
    if group.is_finite:
        return FolnerSet(tuple(group.elements()), label=n)
    if group.kind == GroupKind.HEISENBERG3:
        ranges = (range(n), range(n), range(n * n))
    else:
        ranges = (range(n),) * group.rank
    return FolnerSet(tuple(itertools.product(*ranges)), label=n)


def invariance_ratio(group: GroupDescriptor, F: FolnerSet, K: FolnerSet) -> float:
    """Return |{t in F : Kt subset of F}| / |F|."""
    good = sum(
        1 for t in F.elements
        if all(group.mul(k, t) in F.index_of for k in K.elements)
    )
    return good / len(F)


def box_size(group: GroupDescriptor, n: int) -> int:
    if group.is_finite:
        return group.order
    if group.kind == GroupKind.HEISENBERG3:
        return n ** 4
    return n ** group.rank


def default_cap(group: GroupDescriptor) -> int:
    if group.is_finite:
        return 1
    if group.kind == GroupKind.HEISENBERG3:
        return DEFAULT_CAP_HEISENBERG
    return DEFAULT_CAPS.get(group.rank, DEFAULT_CAP_HIGH_RANK)


def limit_order(
    group: GroupDescriptor,
    points: Sequence[int],
    blocks: int = 1,
    max_order: Optional[int] = None
) -> List[int]:
    """Drop box parameters whose section order blocks * |F_n| exceeds max_order."""
    if max_order is None:
        return list(points)
    kept = [n for n in points if blocks * box_size(group, n) <= max_order]
    if len(kept) < len(points):
        logger.warning(
            f"Schedule truncated at n={kept[-1] if kept else None}: "
            f"section order limit {max_order} for {blocks} block(s)"
        )
    return kept


def schedule(
    group: GroupDescriptor,
    cap: Optional[int] = None,
    blocks: int = 1,
    max_order: Optional[int] = None
) -> List[int]:
    """
    Default Følner schedule: n = 4, 8, 16, ... up to cap, plus cap itself.

    Args:
        group: Ambient group
        cap: Largest box parameter. If None, uses default_cap(group)
        blocks: Number of blocks d of the sectioned operator
        max_order: Largest admissible section order blocks * |F|

    Returns:
        Increasing list of box parameters (a single point for finite groups)
    """
    if cap is not None and cap < 1:
        raise GroupError(f"Schedule cap must be positive, got {cap}")
    if group.is_finite:
        return [1]
    if cap is None:
        cap = default_cap(group)
    points = []
    n = min(SMALLEST_BOX, cap)
    while n < cap:
        points.append(n)
        n *= 2
    points.append(cap)
    return limit_order(group, points, blocks, max_order)
