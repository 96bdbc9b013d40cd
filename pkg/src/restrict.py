"""Finite sections g_F = p_F o g o i_F of group-ring operators."""

import struct
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from src.exceptions import DomainMismatchError, RestrictionError
from src.groupring import CoefficientDomain, RingElement, RingMatrix, as_matrix
from src.groups import FolnerSet, GroupDescriptor
from src.logger import get_logger

logger = get_logger(__name__)

DUMP_MAGIC = b"FKSECT01"
_DTYPE_CODES = {np.dtype(np.float64): 1, np.dtype(np.complex128): 2}


class Side(str, Enum):
    """LEFT acts on columns (l^2 F)^{d x 1}, RIGHT on rows (l^2 F)^{1 x d}."""
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class FiniteSection:
    """Dense matrix of a compressed operator with its (block, element) index maps.

    Flat indices are block-major: (block, element) -> block * |F| + F.index_of[element].
    """
    matrix: np.ndarray
    source: RingMatrix
    folner: FolnerSet
    side: Side
    row_blocks: int
    col_blocks: int

    @property
    def group(self) -> GroupDescriptor:
        return self.source.group

    @property
    def sites(self) -> int:
        return len(self.folner)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_exact(self) -> bool:
        return self.matrix.dtype == object

    def row_index(self, block: int, element) -> int:
        return block * self.sites + self.folner.index_of[element]

    def col_index(self, block: int, element) -> int:
        return block * self.sites + self.folner.index_of[element]

    def row_label(self, flat: int) -> Tuple[int, tuple]:
        block, position = divmod(flat, self.sites)
        return block, self.folner.elements[position]

    def float_matrix(self) -> np.ndarray:
        if self.is_exact:
            return _to_float(self.matrix)
        return self.matrix


def _to_float(matrix: np.ndarray) -> np.ndarray:
    return np.vectorize(float, otypes=[np.float64])(matrix) if matrix.size else matrix.astype(np.float64)


def _dtype_for(f: RingMatrix, exact: bool):
    if exact:
        if not f.domain.is_exact or f.group.twist is not None:
            raise DomainMismatchError("Exact sections require integer or rational coefficients and no twist")
        return object
    if f.domain == CoefficientDomain.COMPLEX or f.group.twist is not None:
        return np.complex128
    return np.float64


def _block_shape(f: RingMatrix, side: Side) -> Tuple[int, int]:
    # left: f (d' x d) maps d-columns to d'-columns; right: x -> x f maps d'-rows to d-rows
    return (f.rows, f.cols) if side == Side.LEFT else (f.cols, f.rows)


def _fill(
    matrix: np.ndarray,
    f: RingMatrix,
    folner: FolnerSet,
    side: Side,
    fresh: Optional[set] = None
):
    """Write every entry of the section, or only entries touching `fresh` elements."""
    group = f.group
    sites = len(folner)
    index = folner.index_of
    exact = matrix.dtype == object
    if exact:
        convert = lambda v: v if isinstance(v, int) else Fraction(v)
    else:
        convert = complex if matrix.dtype.kind == "c" else float
    for i in range(f.rows):
        for j in range(f.cols):
            entry = f.entries[i][j]
            if entry.is_zero():
                continue
            if side == Side.LEFT:
                row_block, col_block = i, j
            else:
                row_block, col_block = j, i
            for u, value in entry.terms:
                value = convert(value)
                for s in folner.elements:
                    if side == Side.LEFT:
                        # column s -> row t = u s, factor alpha(t s^-1, s)
                        t = group.mul(u, s)
                        phase_args = (u, s)
                    else:
                        # row-vector action: column s -> row t = s u, factor alpha(s, s^-1 t)
                        t = group.mul(s, u)
                        phase_args = (s, u)
                    p = index.get(t)
                    if p is None:
                        continue
                    if fresh is not None and s not in fresh and t not in fresh:
                        continue
                    q = index[s]
                    entry_value = value
                    if group.twist is not None:
                        entry_value = value * group.cocycle(*phase_args)
                    matrix[row_block * sites + p, col_block * sites + q] = entry_value


def assemble(
    f: Union[RingMatrix, RingElement],
    folner: FolnerSet,
    side: Side = Side.LEFT,
    exact: bool = False
) -> FiniteSection:
    """
    Assemble the dense finite section of f on the Følner set.

    Args:
        f: ring matrix (or element) over the group
        folner: finite subset F of the group
        side: LEFT for columns, RIGHT for rows
        exact: build an object matrix of Python ints/Fractions

    Returns:
        FiniteSection with entry ((i, t), (j, s)) = (f_ij)_{t s^-1} alpha(t s^-1, s) on the left
    """
    f = as_matrix(f)
    side = Side(side)
    for element in folner.elements[:1]:
        if len(element) != f.group.arity:
            raise DomainMismatchError(f"Følner set elements have arity {len(element)}, group needs {f.group.arity}")
    row_blocks, col_blocks = _block_shape(f, side)
    sites = len(folner)
    dtype = _dtype_for(f, exact)
    matrix = np.zeros((row_blocks * sites, col_blocks * sites), dtype=dtype)
    if dtype is object:
        matrix[...] = 0
    _fill(matrix, f, folner, side)
    logger.debug(f"Assembled {side.value} section of order {matrix.shape} on |F|={sites}")
    return FiniteSection(matrix, f, folner, side, row_blocks, col_blocks)


def grow(prev: FiniteSection, folner: FolnerSet) -> FiniteSection:
    """
    Extend a section to a larger Følner set by copying the shared block.

    Args:
        prev: section on F
        folner: F' containing F

    Returns:
        Section on F', entrywise identical to assemble(f, F', side)
    """
    if folner == prev.folner:
        return prev
    if not prev.folner.issubset(folner):
        raise RestrictionError("grow needs nested Følner sets (F must be a subset of F')")
    f, side = prev.source, prev.side
    old_sites, sites = prev.sites, len(folner)
    positions = np.array([folner.index_of[e] for e in prev.folner.elements], dtype=np.intp)
    rows = np.concatenate([b * sites + positions for b in range(prev.row_blocks)])
    cols = np.concatenate([b * sites + positions for b in range(prev.col_blocks)])
    matrix = np.zeros((prev.row_blocks * sites, prev.col_blocks * sites), dtype=prev.matrix.dtype)
    if matrix.dtype == object:
        matrix[...] = 0
    matrix[np.ix_(rows, cols)] = prev.matrix
    fresh = set(folner.elements) - set(prev.folner.elements)
    _fill(matrix, f, folner, side, fresh=fresh)
    logger.debug(f"Grew {side.value} section from |F|={old_sites} to |F|={sites}")
    return FiniteSection(matrix, f, folner, side, prev.row_blocks, prev.col_blocks)


def sections(f: RingMatrix, folners: Iterable[FolnerSet], side: Side = Side.LEFT) -> list:
    """Sections along an increasing chain, reusing blocks whenever the sets are nested."""
    result = []
    current = None
    for folner in folners:
        if current is not None and current.folner.issubset(folner):
            current = grow(current, folner)
        else:
            current = assemble(f, folner, side)
        result.append(current)
    return result


def dump_section(section: FiniteSection, path: Union[str, Path]) -> Path:
    """
    Write the section as a binary matrix file.

    Layout: 32-byte header (magic, rows, cols, dtype code as little-endian u64)
    followed by row-major little-endian float64 data; complex data is stored
    as interleaved real/imaginary pairs.
    """
    path = Path(path)
    matrix = section.float_matrix()
    dtype = np.dtype(matrix.dtype)
    if dtype not in _DTYPE_CODES:
        matrix = matrix.astype(np.float64)
        dtype = np.dtype(np.float64)
    rows, cols = matrix.shape
    header = DUMP_MAGIC + struct.pack("<QQQ", rows, cols, _DTYPE_CODES[dtype])
    payload = np.ascontiguousarray(matrix).view(np.float64).astype("<f8", copy=False).tobytes()
    path.write_bytes(header + payload)
    logger.info(f"Section dumped to {path} ({rows}x{cols}, {dtype})")
    return path


def load_section(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != DUMP_MAGIC:
        raise RestrictionError(f"{path} is not a section dump")
    rows, cols, code = struct.unpack("<QQQ", data[8:32])
    values = np.frombuffer(data[32:], dtype="<f8")
    if code == 2:
        return values.view(np.complex128).reshape(rows, cols)
    return values.reshape(rows, cols).astype(np.float64)
