"""
Bit vectors, GF(2) linear algebra and GF(2^w) arithmetic.

Conventions used everywhere in the lab:

* Index 0 of a BitVector is the least-significant bit of its packed integer.
* A field element of GF(2^w) is an integer whose bit i is the coefficient of x^i.
* Bit strings written as text ("10110") list index 0 first.
* Serialized vectors use "len:hex" where hex is the packed integer.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, List, Sequence, Union

import numpy as np

from services.errors import IndexOutOfRangeError, LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)

MAX_FIELD_DEGREE = 256


def parity(value: int) -> int:
    """GF(2) sum of the bits of a non-negative integer."""
    return value.bit_count() & 1


@dataclass(frozen=True, slots=True)
class BitVector:
    """Fixed-length GF(2) vector packed into a Python int."""

    length: int
    bits: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ParameterError(f"BitVector length must be >= 0, got {self.length}")
        if self.bits < 0 or self.bits >> self.length:
            raise ParameterError(f"payload does not fit in {self.length} bits")

    # Construction

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length, 0)

    @classmethod
    def ones(cls, length: int) -> "BitVector":
        return cls(length, (1 << length) - 1)

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitVector":
        """Truncating constructor: keeps the low `length` bits of value."""
        return cls(length, value & ((1 << length) - 1))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVector":
        value = 0
        length = 0
        for i, b in enumerate(bits):
            if b:
                value |= 1 << i
            length = i + 1
        return cls(length, value)

    @classmethod
    def from_string(cls, text: str) -> "BitVector":
        """Parse "10110" (index 0 first)."""
        text = text.strip()
        if any(ch not in "01" for ch in text):
            raise ParameterError(f"not a bit string: {text!r}")
        return cls.from_bits(int(ch) for ch in text)

    @classmethod
    def from_hex(cls, text: str) -> "BitVector":
        """Parse the "len:hex" serialization."""
        try:
            length_part, hex_part = text.strip().split(":", 1)
            length = int(length_part)
            value = int(hex_part, 16) if hex_part else 0
        except ValueError as e:
            raise ParameterError(f"malformed bit vector {text!r}; expected 'len:hex'", original_error=e)
        return cls(length, value)

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "BitVector":
        if length == 0:
            return cls(0, 0)
        raw = int.from_bytes(rng.bytes((length + 7) // 8), "little")
        return cls(length, raw & ((1 << length) - 1))

    @staticmethod
    def join(vectors: Iterable["BitVector"]) -> "BitVector":
        """Concatenate vectors; the first vector occupies the lowest indices."""
        value = 0
        offset = 0
        for v in vectors:
            value |= v.bits << offset
            offset += v.length
        return BitVector(offset, value)

    # Access

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[int]:
        for i in range(self.length):
            yield (self.bits >> i) & 1

    def __getitem__(self, key: Union[int, slice]) -> Union[int, "BitVector"]:
        if isinstance(key, slice):
            start, stop, step = key.indices(self.length)
            if step != 1:
                return BitVector.from_bits(self[i] for i in range(start, stop, step))
            return self.slice(start, stop)
        if key < 0 or key >= self.length:
            raise IndexOutOfRangeError(f"index {key} outside [0, {self.length})")
        return (self.bits >> key) & 1

    def slice(self, start: int, stop: int) -> "BitVector":
        if start < 0 or stop > self.length or start > stop:
            raise IndexOutOfRangeError(f"slice [{start}, {stop}) outside [0, {self.length}]")
        width = stop - start
        return BitVector(width, (self.bits >> start) & ((1 << width) - 1))

    def split(self, widths: Sequence[int]) -> List["BitVector"]:
        """Cut into consecutive pieces of the given widths; widths must sum to the length."""
        if sum(widths) != self.length:
            raise LengthMismatchError(f"widths sum to {sum(widths)}, vector has {self.length} bits")
        pieces = []
        offset = 0
        for w in widths:
            pieces.append(self.slice(offset, offset + w))
            offset += w
        return pieces

    def concat(self, *others: "BitVector") -> "BitVector":
        return BitVector.join((self,) + others)

    def flip(self, index: int) -> "BitVector":
        if index < 0 or index >= self.length:
            raise IndexOutOfRangeError(f"index {index} outside [0, {self.length})")
        return BitVector(self.length, self.bits ^ (1 << index))

    def weight(self) -> int:
        return self.bits.bit_count()

    def is_zero(self) -> bool:
        return self.bits == 0

    # Arithmetic

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise LengthMismatchError(f"XOR of lengths {self.length} and {other.length}")
        return BitVector(self.length, self.bits ^ other.bits)

    def __and__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise LengthMismatchError(f"AND of lengths {self.length} and {other.length}")
        return BitVector(self.length, self.bits & other.bits)

    # Serialization

    def to_bits(self) -> List[int]:
        return list(self)

    def to_string(self) -> str:
        return "".join(str(b) for b in self)

    def to_hex(self) -> str:
        return f"{self.length}:{self.bits:x}"

    def __repr__(self) -> str:
        if self.length <= 64:
            return f"BitVector({self.to_string() or 'ε'})"
        return f"BitVector({self.to_hex()})"


def inner_product(a: BitVector, b: BitVector) -> int:
    """⟨a, b⟩ over GF(2)."""
    if a.length != b.length:
        raise LengthMismatchError(f"inner product of lengths {a.length} and {b.length}")
    return parity(a.bits & b.bits)


def select_bits(x: BitVector, idx: Sequence[int]) -> BitVector:
    """Output bit j is x[idx[j]]; duplicates allowed."""
    value = 0
    bits = x.bits
    for j, i in enumerate(idx):
        if i < 0 or i >= x.length:
            raise IndexOutOfRangeError(f"index {i} outside [0, {x.length})")
        value |= ((bits >> i) & 1) << j
    return BitVector(len(idx), value)


# GF(2)[x] polynomial helpers (polynomials are ints, bit i = coefficient of x^i)


def clmul(a: int, b: int) -> int:
    """Carry-less product."""
    if a < b:
        a, b = b, a
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        b >>= 1
    return result


def poly_mod(a: int, modulus: int) -> int:
    degree = modulus.bit_length() - 1
    while a.bit_length() - 1 >= degree:
        a ^= modulus << (a.bit_length() - 1 - degree)
    return a


def poly_mulmod(a: int, b: int, modulus: int) -> int:
    return poly_mod(clmul(a, b), modulus)


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _prime_factors(n: int) -> List[int]:
    factors = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            factors.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors


def is_irreducible(poly: int) -> bool:
    """
    Rabin's irreducibility test over GF(2).

    poly of degree w is irreducible iff x^(2^w) = x mod poly and
    gcd(x^(2^(w/q)) - x, poly) = 1 for every prime q dividing w.
    """
    w = poly.bit_length() - 1
    if w < 1:
        return False
    x = poly_mod(0b10, poly)
    needed = {w // q for q in _prime_factors(w)}
    h = x
    for i in range(1, w + 1):
        h = poly_mulmod(h, h, poly)
        if i in needed and poly_gcd(poly, h ^ x) != 1:
            return False
    return h == x


def find_irreducible(w: int) -> int:
    """Lexicographically smallest degree-w irreducible polynomial."""
    if w < 1:
        raise ParameterError(f"field degree must be >= 1, got {w}")
    start = (1 << w) | 1
    for candidate in range(start, 1 << (w + 1), 2):
        if is_irreducible(candidate):
            return candidate
    raise ParameterError(f"no irreducible polynomial of degree {w}")  # unreachable for w >= 1


# Low-weight irreducible polynomials, as exponent lists
_MODULUS_TABLE = {
    1: (1, 0), 2: (2, 1, 0), 3: (3, 1, 0), 4: (4, 1, 0), 5: (5, 2, 0),
    6: (6, 1, 0), 7: (7, 1, 0), 8: (8, 4, 3, 1, 0), 9: (9, 4, 0), 10: (10, 3, 0),
    11: (11, 2, 0), 12: (12, 3, 0), 13: (13, 4, 3, 1, 0), 14: (14, 5, 0), 15: (15, 1, 0),
    16: (16, 5, 3, 1, 0), 17: (17, 3, 0), 18: (18, 3, 0), 19: (19, 5, 2, 1, 0), 20: (20, 3, 0),
    21: (21, 2, 0), 22: (22, 1, 0), 23: (23, 5, 0), 24: (24, 4, 3, 1, 0), 25: (25, 3, 0),
    26: (26, 4, 3, 1, 0), 27: (27, 5, 2, 1, 0), 28: (28, 1, 0), 29: (29, 2, 0), 30: (30, 1, 0),
    31: (31, 3, 0), 32: (32, 7, 3, 2, 0), 33: (33, 10, 0), 34: (34, 7, 0), 35: (35, 2, 0),
    36: (36, 9, 0), 37: (37, 6, 4, 1, 0), 38: (38, 6, 5, 1, 0), 39: (39, 4, 0), 40: (40, 5, 4, 3, 0),
    41: (41, 3, 0), 42: (42, 7, 0), 43: (43, 6, 4, 3, 0), 44: (44, 5, 0), 45: (45, 4, 3, 1, 0),
    46: (46, 1, 0), 47: (47, 5, 0), 48: (48, 5, 3, 2, 0), 49: (49, 9, 0), 50: (50, 4, 3, 2, 0),
    51: (51, 6, 3, 1, 0), 52: (52, 3, 0), 53: (53, 6, 2, 1, 0), 54: (54, 9, 0), 55: (55, 7, 0),
    56: (56, 7, 4, 2, 0), 57: (57, 4, 0), 58: (58, 19, 0), 59: (59, 7, 4, 2, 0), 60: (60, 1, 0),
    61: (61, 5, 2, 1, 0), 62: (62, 29, 0), 63: (63, 1, 0), 64: (64, 4, 3, 1, 0),
}


@lru_cache(maxsize=None)
def standard_modulus(w: int) -> int:
    """Table modulus for w <= 64, otherwise the smallest irreducible found by search."""
    if w < 1 or w > MAX_FIELD_DEGREE:
        raise ParameterError(f"field degree {w} outside [1, {MAX_FIELD_DEGREE}]")
    exponents = _MODULUS_TABLE.get(w)
    if exponents is not None:
        modulus = sum(1 << e for e in exponents)
        if is_irreducible(modulus):
            return modulus
        logger.warning(f"Table modulus for w={w} failed the irreducibility test; searching instead")
    return find_irreducible(w)


class GF2Field:
    """GF(2^w) with an irreducible modulus verified at construction."""

    def __init__(self, w: int, modulus: int = None):
        if w < 1 or w > MAX_FIELD_DEGREE:
            raise ParameterError(f"field degree {w} outside [1, {MAX_FIELD_DEGREE}]")
        if modulus is None:
            modulus = standard_modulus(w)
        elif modulus.bit_length() - 1 != w:
            raise ParameterError(f"modulus {modulus:#x} does not have degree {w}")
        elif not is_irreducible(modulus):
            raise ParameterError(f"modulus {modulus:#x} is reducible")
        self.w = w
        self.modulus = modulus
        self.order = 1 << w

    @classmethod
    @lru_cache(maxsize=None)
    def standard(cls, w: int) -> "GF2Field":
        return cls(w)

    def __repr__(self) -> str:
        return f"GF2Field(w={self.w}, modulus={self.modulus:#x})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GF2Field) and (self.w, self.modulus) == (other.w, other.modulus)

    def __hash__(self) -> int:
        return hash((self.w, self.modulus))

    def check(self, a: int) -> int:
        if a < 0 or a >= self.order:
            raise ParameterError(f"element {a} outside GF(2^{self.w})")
        return a

    def mul(self, a: int, b: int) -> int:
        return poly_mod(clmul(a, b), self.modulus)

    def pow(self, a: int, e: int) -> int:
        result = 1
        base = a
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def inverse(self, a: int) -> int:
        if a == 0:
            raise ParameterError("zero has no inverse")
        return self.pow(a, self.order - 2)

    def mul_array(self, a: np.ndarray, b: Union[np.ndarray, int]) -> np.ndarray:
        """Vectorized product; requires w <= 32 so carry-less products fit in uint64."""
        if self.w > 32:
            raise ParameterError(f"vectorized multiplication supports w <= 32, field has w={self.w}")
        a = np.asarray(a, dtype=np.uint64)
        b = np.broadcast_to(np.asarray(b, dtype=np.uint64), a.shape)
        product = np.zeros(a.shape, dtype=np.uint64)
        one = np.uint64(1)
        for i in range(self.w):
            bit = (b >> np.uint64(i)) & one
            product ^= (a << np.uint64(i)) * bit
        modulus = np.uint64(self.modulus)
        for degree in range(2 * self.w - 2, self.w - 1, -1):
            top = (product >> np.uint64(degree)) & one
            product ^= (modulus << np.uint64(degree - self.w)) * top
        return product


def gf2w_mul(a: int, b: int, field: GF2Field) -> int:
    """Carry-less product of two range-checked elements reduced by the field modulus."""
    return field.mul(field.check(a), field.check(b))


# GF(2) linear algebra over packed rows


def gf2_rank(rows: Iterable[int]) -> int:
    basis: List[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
            basis.sort(reverse=True)
    return len(basis)


def gf2_kernel_basis(rows: Iterable[int], n: int) -> List[int]:
    """Basis of {x in GF(2)^n : <r, x> = 0 for every row r}."""
    pivots = {}
    for r in rows:
        for col, pivot_row in pivots.items():
            if (r >> col) & 1:
                r ^= pivot_row
        if r == 0:
            continue
        col = r.bit_length() - 1
        for c in list(pivots):
            if (pivots[c] >> col) & 1:
                pivots[c] ^= r
        pivots[col] = r
    basis = []
    for free in range(n):
        if free in pivots:
            continue
        v = 1 << free
        for col, pivot_row in pivots.items():
            if (pivot_row >> free) & 1:
                v |= 1 << col
        basis.append(v)
    return basis


def apply_columns(columns: Sequence[int], x: int) -> int:
    """Apply the linear map whose i-th column is columns[i] to the packed vector x."""
    out = 0
    i = 0
    while x:
        if x & 1:
            out ^= columns[i]
        x >>= 1
        i += 1
    return out


def apply_columns_array(columns: Sequence[int], xs: np.ndarray) -> np.ndarray:
    """Vectorized apply_columns over an array of packed inputs (outputs < 2^63)."""
    xs = np.asarray(xs, dtype=np.uint64)
    out = np.zeros(xs.shape, dtype=np.uint64)
    one = np.uint64(1)
    for i, col in enumerate(columns):
        if col:
            out ^= ((xs >> np.uint64(i)) & one) * np.uint64(col)
    return out


def columns_to_rows(columns: Sequence[int], m: int) -> List[int]:
    """Transpose a column list (n columns of m bits) into m row functionals over n bits."""
    rows = [0] * m
    for i, col in enumerate(columns):
        j = 0
        while col:
            if col & 1:
                rows[j] |= 1 << i
            col >>= 1
            j += 1
    return rows
