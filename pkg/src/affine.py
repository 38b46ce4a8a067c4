"""
Affine platform: the group of maps v -> u + M v on Z^n with |det M| = 1.

Entries are Python ints (arbitrary precision); numpy object arrays do the
matrix products and sympy supplies exact determinants and adjugates.
"""

import logging
import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import sympy

from .errors import AffineError, DimensionMismatchError, NonUnimodularError
from .words import IndexWord, format_index_word, invert_index_word, parse_index_word


logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]
Matrix = Tuple[Tuple[int, ...], ...]

SIGN_NONNEGATIVE = 0x00
SIGN_NEGATIVE = 0x01


def _as_array(rows) -> np.ndarray:
    return np.array([[int(x) for x in row] for row in rows], dtype=object)


def _to_matrix(array: np.ndarray) -> Matrix:
    return tuple(tuple(int(x) for x in row) for row in array)


@dataclass(frozen=True)
class AffineElement:
    """The map v -> translation + matrix . v."""
    translation: Vector
    matrix: Matrix

    def __post_init__(self) -> None:
        n = len(self.translation)
        if n == 0:
            raise AffineError("dimension must be at least 1")
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise DimensionMismatchError(f"matrix is not {n}x{n}")

    @classmethod
    def create(cls, translation: Sequence[int], matrix: Sequence[Sequence[int]]) -> "AffineElement":
        """Validated constructor; rejects non-unimodular matrices."""
        element = cls(tuple(int(x) for x in translation), tuple(tuple(int(x) for x in row) for row in matrix))
        det = element.determinant()
        if abs(det) != 1:
            raise NonUnimodularError(f"|det M| must be 1, got det = {det}")
        return element

    @classmethod
    def identity(cls, n: int) -> "AffineElement":
        return cls(tuple([0] * n), tuple(tuple(int(r == c) for c in range(n)) for r in range(n)))

    @property
    def dimension(self) -> int:
        return len(self.translation)

    def determinant(self) -> int:
        return int(sympy.Matrix(self.matrix).det())

    def compose(self, other: "AffineElement") -> "AffineElement":
        """self after other: (u1 + M1 u2, M1 M2)."""
        if other.dimension != self.dimension:
            raise DimensionMismatchError(f"dimensions {self.dimension} and {other.dimension}")
        m1 = _as_array(self.matrix)
        u = np.array(self.translation, dtype=object) + m1.dot(np.array(other.translation, dtype=object))
        m = m1.dot(_as_array(other.matrix))
        return AffineElement(tuple(int(x) for x in u), _to_matrix(m))

    __mul__ = compose

    def inverse(self) -> "AffineElement":
        """(-M^-1 u, M^-1); M^-1 = det . adj(M) since det = +-1."""
        m = sympy.Matrix(self.matrix)
        det = int(m.det())
        if abs(det) != 1:
            raise NonUnimodularError(f"|det M| must be 1, got det = {det}")
        inv = _as_array((m.adjugate() * det).tolist())
        u = -inv.dot(np.array(self.translation, dtype=object))
        return AffineElement(tuple(int(x) for x in u), _to_matrix(inv))

    def act(self, v: Sequence[int]) -> Vector:
        if len(v) != self.dimension:
            raise DimensionMismatchError(f"vector of length {len(v)} for dimension {self.dimension}")
        image = np.array(self.translation, dtype=object) + _as_array(self.matrix).dot(np.array(list(v), dtype=object))
        return tuple(int(x) for x in image)

    @property
    def is_identity(self) -> bool:
        return self == AffineElement.identity(self.dimension)

    def __str__(self) -> str:
        rows = "; ".join(" ".join(str(x) for x in row) for row in self.matrix)
        return f"u=({', '.join(str(x) for x in self.translation)}) M=[{rows}]"


# --- bytes ------------------------------------------------------------------

def _encode_int(value: int) -> bytes:
    magnitude = abs(value)
    raw = magnitude.to_bytes((magnitude.bit_length() + 7) // 8, "big") if magnitude else b""
    if len(raw) > 0xFFFF:
        raise AffineError("integer entry too large to serialize")
    sign = SIGN_NEGATIVE if value < 0 else SIGN_NONNEGATIVE
    return struct.pack("!BH", sign, len(raw)) + raw


def _decode_int(data: bytes, pos: int) -> Tuple[int, int]:
    if pos + 3 > len(data):
        raise AffineError("affine entry header truncated")
    sign, size = struct.unpack_from("!BH", data, pos)
    if sign not in (SIGN_NONNEGATIVE, SIGN_NEGATIVE):
        raise AffineError(f"bad sign byte {sign:#04x}")
    pos += 3
    if pos + size > len(data):
        raise AffineError("affine entry magnitude truncated")
    if size and data[pos] == 0:
        raise AffineError("affine entry magnitude has a leading zero byte")
    magnitude = int.from_bytes(data[pos:pos + size], "big")
    if sign == SIGN_NEGATIVE and magnitude == 0:
        raise AffineError("negative zero is not canonical")
    return (-magnitude if sign == SIGN_NEGATIVE else magnitude), pos + size


def serialize_affine(element: AffineElement) -> bytes:
    """n u8, then n^2 matrix entries row-major, then n translation entries."""
    out = bytearray(struct.pack("!B", element.dimension))
    for row in element.matrix:
        for x in row:
            out += _encode_int(x)
    for x in element.translation:
        out += _encode_int(x)
    return bytes(out)


def read_affine(data: bytes, offset: int = 0) -> Tuple[AffineElement, int]:
    if offset >= len(data):
        raise AffineError("affine element truncated")
    n = data[offset]
    if n == 0:
        raise AffineError("affine dimension 0")
    pos = offset + 1
    entries: List[int] = []
    for _ in range(n * n + n):
        value, pos = _decode_int(data, pos)
        entries.append(value)
    matrix = tuple(tuple(entries[r * n:(r + 1) * n]) for r in range(n))
    element = AffineElement(tuple(entries[n * n:]), matrix)
    if abs(element.determinant()) != 1:
        raise NonUnimodularError("deserialized matrix is not unimodular")
    return element, pos


# --- generated groups -------------------------------------------------------

SANOV_PAIR: Tuple[Tuple[Vector, Matrix], ...] = (
    ((0, 0), ((1, 2), (0, 1))),
    ((0, 0), ((1, 0), (2, 1))),
)


class AffineGroup:
    """Words over a fixed list of affine generators, evaluated by composition."""

    def __init__(self, generators: Sequence[AffineElement]):
        if not generators:
            raise AffineError("at least one generator is required")
        n = generators[0].dimension
        for i, g in enumerate(generators, 1):
            if g.dimension != n:
                raise DimensionMismatchError(f"generator {i} has dimension {g.dimension}, expected {n}")
            if abs(g.determinant()) != 1:
                raise NonUnimodularError(f"generator {i} is not unimodular")
        self.dimension = n
        self.generators: Tuple[AffineElement, ...] = tuple(generators)
        self.inverses: Tuple[AffineElement, ...] = tuple(g.inverse() for g in generators)

    @classmethod
    def sanov(cls) -> "AffineGroup":
        return cls([AffineElement.create(u, m) for u, m in SANOV_PAIR])

    def identity(self) -> AffineElement:
        return AffineElement.identity(self.dimension)

    def evaluate(self, word: IndexWord) -> AffineElement:
        result = self.identity()
        for index, sign in word:
            if not 0 <= index < len(self.generators):
                raise AffineError(f"generator index {index + 1} outside 1..{len(self.generators)}")
            result = result.compose(self.generators[index] if sign > 0 else self.inverses[index])
        return result

    def parse(self, text: str) -> IndexWord:
        return parse_index_word(text, len(self.generators))

    def format(self, word: IndexWord) -> str:
        return format_index_word(word)

    def invert(self, word: IndexWord) -> IndexWord:
        return invert_index_word(word)


def affine_is_trivial(group: AffineGroup, word: IndexWord) -> bool:
    """Exact word problem: evaluate and compare with (0, I)."""
    return group.evaluate(word).is_identity
