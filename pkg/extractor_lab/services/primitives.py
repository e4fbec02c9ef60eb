"""
Pairwise-independent strings, hash-based extractors and Trevisan's extractor.

All extractors here are GF(2)-linear in the source for every fixed seed, so
their descriptors expose per-seed matrices to the measurement harness.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from services.bitcore import BitVector, GF2Field, parity
from services.descriptors import ExtractorDescriptor, register_construction, seed_embedded
from services.designs import WeakDesign, get_weak_design, restrict
from services.errors import LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)


# Pairwise-independent strings


@dataclass(frozen=True)
class PairwiseSeed:
    """Seed (A, B) ∈ GF(2^l)²; serialized as A in the low l bits, B in the high l bits."""

    l: int
    A: int
    B: int

    def __post_init__(self):
        if self.l < 1:
            raise ParameterError(f"string length must be >= 1, got {self.l}")
        if not (0 <= self.A < 1 << self.l and 0 <= self.B < 1 << self.l):
            raise ParameterError(f"seed elements must lie in GF(2^{self.l})")

    @classmethod
    def from_bits(cls, r: BitVector) -> "PairwiseSeed":
        if r.length % 2 or r.length == 0:
            raise LengthMismatchError(f"pairwise seed must have even positive length, got {r.length}")
        l = r.length // 2
        mask = (1 << l) - 1
        return cls(l, r.bits & mask, r.bits >> l)

    def to_bits(self) -> BitVector:
        return BitVector(2 * self.l, self.A | (self.B << self.l))


def pairwise_strings(r: PairwiseSeed, count: int) -> List[BitVector]:
    """a_i = A ⊕ i·B in GF(2^l) for i = 0..count−1."""
    if count > 1 << r.l:
        raise ParameterError(f"at most 2^{r.l} pairwise strings available, requested {count}")
    field = GF2Field.standard(r.l)
    return [BitVector(r.l, r.A ^ field.mul(i, r.B)) for i in range(count)]


def pairwise_values(l: int, A: int, B: int, count: int) -> List[int]:
    """Integer form of pairwise_strings for inner loops."""
    field = GF2Field.standard(l)
    return [A ^ field.mul(i, B) for i in range(count)]


# Leftover hashing


def leftover_hash_extract(x: BitVector, u: BitVector, m: int) -> BitVector:
    """Top m bits of u·x in GF(2^{n'}), n' = |x|."""
    n = x.length
    if u.length != n:
        raise LengthMismatchError(f"hash seed has {u.length} bits, source has {n}")
    if m > n or m < 0:
        raise ParameterError(f"output length {m} outside [0, {n}]")
    if m == 0:
        return BitVector.zeros(0)
    product = GF2Field.standard(n).mul(u.bits, x.bits)
    return BitVector(m, product >> (n - m))


def _hash_columns(n: int, m: int, u: int) -> List[int]:
    field = GF2Field.standard(n)
    shift = n - m
    return [field.mul(u, 1 << i) >> shift for i in range(n)]


def leftover_hash_descriptor(n: int, k: int, delta: int) -> ExtractorDescriptor:
    """
    Leftover-hash strong extractor with full seed.

    Args:
        n: Source length n' (also the seed length)
        k: Min-entropy of the claim
        delta: Entropy loss Δ; output length is k − 2Δ, error 2^{−Δ}

    Returns:
        Linear ExtractorDescriptor
    """
    m = k - 2 * delta
    if m < 0 or m > n:
        raise ParameterError(f"k − 2Δ = {m} outside [0, {n}]")

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        return leftover_hash_extract(x, seed, m)

    return ExtractorDescriptor(
        name="leftover_hash",
        n=n, d=n, m=m,
        k_claim=k, eps_claim=2.0 ** -delta,
        locality_claim=n,
        evaluate=evaluate,
        linear=True,
        params={"n": n, "k": k, "delta": delta},
        columns=lambda seed: _hash_columns(n, m, seed.bits),
    )


def short_seed_hash_descriptor(n: int, d: int, m: int, k: Optional[float] = None) -> ExtractorDescriptor:
    """
    Leftover hash with the multiplier restricted to its low d bits.

    The error claim of the full family no longer applies; it is set to 1 and the
    harness measures the real error.
    """
    if d > n or d < 0:
        raise ParameterError(f"seed length {d} outside [0, {n}]")
    if m > n or m < 0:
        raise ParameterError(f"output length {m} outside [0, {n}]")

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        if m == 0:
            return BitVector.zeros(0)
        product = GF2Field.standard(n).mul(seed.bits, x.bits)
        return BitVector(m, product >> (n - m))

    return ExtractorDescriptor(
        name="short_seed_hash",
        n=n, d=d, m=m,
        k_claim=k if k is not None else n, eps_claim=1.0,
        locality_claim=n,
        evaluate=evaluate,
        linear=True,
        params={"n": n, "d": d, "m": m, "k": k},
        columns=lambda seed: _hash_columns(n, m, seed.bits) if m else [0] * n,
    )


# Polynomial hashing


def polynomial_hash_extract(x: BitVector, u: BitVector, b: int) -> BitVector:
    """
    Σ_j x_j u^j over GF(2^b), x split into ⌈n/b⌉ b-bit coefficients.

    The last coefficient is zero-padded; u (at most b bits) is read as a field point.
    """
    if u.length > b:
        raise ParameterError(f"seed of {u.length} bits exceeds the field width {b}")
    field = GF2Field.standard(b)
    mask = (1 << b) - 1
    blocks = math.ceil(x.length / b) if x.length else 0
    acc = 0
    for j in range(blocks - 1, -1, -1):
        acc = field.mul(acc, u.bits) ^ ((x.bits >> (j * b)) & mask)
    return BitVector(b, acc)


def polynomial_hash_descriptor(n: int, b: int, d: int, k: Optional[float] = None) -> ExtractorDescriptor:
    """
    Polynomial-evaluation hash {0,1}^n × {0,1}^d → {0,1}^b.

    Collision probability of distinct sources is at most (⌈n/b⌉ − 1)/2^d; the
    error claim follows the leftover-hash bound for that collision probability.
    """
    if d > b or d < 0:
        raise ParameterError(f"seed length {d} must lie in [0, {b}]")
    blocks = math.ceil(n / b)
    collision = (blocks - 1) / (1 << d)
    k_claim = float(k if k is not None else n)
    eps = min(1.0, 0.5 * math.sqrt((1 << b) * (collision + 2.0 ** -k_claim)))

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        return polynomial_hash_extract(x, seed, b)

    def columns(seed: BitVector) -> List[int]:
        field = GF2Field.standard(b)
        cols = []
        power = 1
        for j in range(blocks):
            for t in range(b):
                if j * b + t < n:
                    cols.append(field.mul(1 << t, power))
            power = field.mul(power, seed.bits)
        return cols

    return ExtractorDescriptor(
        name="polynomial_hash",
        n=n, d=d, m=b,
        k_claim=k_claim, eps_claim=eps,
        locality_claim=n,
        evaluate=evaluate,
        linear=True,
        params={"n": n, "b": b, "d": d, "k": k},
        columns=columns,
    )


# Trevisan's extractor (Reed–Solomon concatenated with Hadamard)


def trevisan_code_width(n: int, l: int) -> int:
    """Smallest b ≥ ⌈l/2⌉ with ⌈n/b⌉ ≤ 2^{l−b}: RS over GF(2^b) with enough evaluation points."""
    for b in range(max(1, math.ceil(l / 2)), l + 1):
        if math.ceil(n / b) <= 1 << (l - b):
            return b
    raise ParameterError(f"codeword index of {l} bits is too short for a {n}-bit message")


class TrevisanCode:
    """
    Linear code of length 2^l: index y = (j, r) with r the low b bits.

    Enc(x)[y] = ⟨r, Σ_c x_c j^c⟩, the Hadamard encoding of the Reed–Solomon
    symbol of x at point j.
    """

    def __init__(self, n: int, l: int):
        self.n = n
        self.l = l
        self.b = trevisan_code_width(n, l)
        self.field = GF2Field.standard(self.b)
        self.blocks = math.ceil(n / self.b)

    def symbol(self, x: int, point: int) -> int:
        mask = (1 << self.b) - 1
        acc = 0
        for c in range(self.blocks - 1, -1, -1):
            acc = self.field.mul(acc, point) ^ ((x >> (c * self.b)) & mask)
        return acc

    def bit(self, x: int, y: int) -> int:
        r = y & ((1 << self.b) - 1)
        return parity(r & self.symbol(x, y >> self.b))

    def row(self, y: int) -> int:
        """The functional x ↦ Enc(x)[y] as an n-bit mask."""
        r = y & ((1 << self.b) - 1)
        point = y >> self.b
        row = 0
        power = 1
        for c in range(self.blocks):
            for t in range(self.b):
                i = c * self.b + t
                if i < self.n and parity(r & self.field.mul(1 << t, power)):
                    row |= 1 << i
            power = self.field.mul(power, point)
        return row


def trevisan_extract(x: BitVector, seed: BitVector, wd: WeakDesign, m: Optional[int] = None,
                     embed_seed: bool = False) -> BitVector:
    """
    Output bit i = Enc(x)[seed|_{S_i}].

    Args:
        x: Source
        seed: Seed over the weak design's universe
        wd: Weak design with at least m sets
        m: Output length (defaults to the number of sets)
        embed_seed: Replace the trailing d output bits with the seed

    Raises:
        LengthMismatchError: seed length differs from the design universe
        ParameterError: too few sets, or m < d with embed_seed
    """
    m = wd.m if m is None else m
    if seed.length != wd.universe_size:
        raise LengthMismatchError(f"seed has {seed.length} bits, weak design universe is {wd.universe_size}")
    if m > wd.m:
        raise ParameterError(f"weak design has {wd.m} sets, {m} output bits requested")
    code = TrevisanCode(x.length, wd.set_size)
    out = 0
    for i in range(m):
        out |= code.bit(x.bits, restrict(seed, wd.sets[i])) << i
    if embed_seed:
        d = seed.length
        if m < d:
            raise ParameterError(f"cannot embed a {d}-bit seed into {m} output bits")
        out = (out & ((1 << (m - d)) - 1)) | (seed.bits << (m - d))
    return BitVector(m, out)


def trevisan_descriptor(n: int, wd: WeakDesign, eps: float = 0.25, embed_seed: bool = False,
                        m: Optional[int] = None) -> ExtractorDescriptor:
    """
    Trevisan's extractor as a linear descriptor.

    The min-entropy claim follows the weak-design analysis: k = κ·m + log(1/ε) + O(1).
    """
    m = wd.m if m is None else m
    if m > wd.m:
        raise ParameterError(f"weak design has {wd.m} sets, {m} output bits requested")
    code = TrevisanCode(n, wd.set_size)
    k_claim = wd.kappa * m + math.log2(1 / eps) + 3

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        out = 0
        for i in range(m):
            out |= code.bit(x.bits, restrict(seed, wd.sets[i])) << i
        return BitVector(m, out)

    def footprints(seed: BitVector) -> List[int]:
        return [code.row(restrict(seed, wd.sets[i])) for i in range(m)]

    descriptor = ExtractorDescriptor(
        name="trevisan",
        n=n, d=wd.universe_size, m=m,
        k_claim=k_claim, eps_claim=eps,
        locality_claim=n,
        evaluate=evaluate,
        linear=True,
        params={"n": n, "m": m, "l": wd.set_size, "kappa": wd.kappa, "eps": eps, "sets": wd.m},
        footprints=footprints,
    )
    if embed_seed:
        return seed_embedded(descriptor, "tail")
    return descriptor


# Registry factories


@register_construction("leftover_hash")
def _leftover_hash_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return leftover_hash_descriptor(params["n"], params["k"], params["delta"])


@register_construction("short_seed_hash")
def _short_seed_hash_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return short_seed_hash_descriptor(params["n"], params["d"], params["m"], params.get("k"))


@register_construction("polynomial_hash")
def _polynomial_hash_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return polynomial_hash_descriptor(params["n"], params["b"], params["d"], params.get("k"))


@register_construction("trevisan")
def _trevisan_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    wd = get_weak_design(params["sets"], params["kappa"], params["l"])
    return trevisan_descriptor(params["n"], wd, params.get("eps", 0.25), m=params["m"])
