"""
Generators built from local functions and extractors: random local
functions, their parallel repetition, the UG → PRG transformation and the
Nisan–Zuckerman generator, plus two generic stretching helpers.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from models.hypergraph import Hypergraph, Predicate
from services.bitcore import BitVector
from services.descriptors import ExtractorDescriptor
from services.errors import LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)

Generator = Callable[[BitVector], BitVector]
KeyedFunction = Callable[[BitVector, BitVector], BitVector]


def random_hypergraph(n: int, m: int, d: int, rng: np.random.Generator) -> Hypergraph:
    """m hyperedges of d indices drawn uniformly with replacement."""
    if n < 1 or m < 0 or d < 0:
        raise ParameterError(f"need n >= 1, m >= 0, d >= 0, got {n}, {m}, {d}")
    edges = rng.integers(0, n, size=(m, d)).tolist()
    return Hypergraph(n=n, edges=edges)


def rlf_eval(g: Hypergraph, q: Predicate, x: BitVector) -> BitVector:
    """f_{G,Q}(x)_i = Q(x_{S_i}); bit j of the pattern is the j-th index of S_i."""
    if g.m and g.d != q.d:
        raise LengthMismatchError(f"hyperedges have arity {g.d}, predicate has {q.d}")
    if x.length != g.n:
        raise LengthMismatchError(f"hypergraph has {g.n} vertices, input has {x.length} bits")
    value = 0
    for i, edge in enumerate(g.edges):
        pattern = 0
        for j, idx in enumerate(edge):
            pattern |= ((x.bits >> idx) & 1) << j
        if q(pattern):
            value |= 1 << i
    return BitVector(g.m, value)


def parallel_rlf(g: Hypergraph, q: Predicate, blocks: Sequence[BitVector]) -> BitVector:
    """f_{G,Q}(x^{(1)}) ∘ ... ∘ f_{G,Q}(x^{(t)})."""
    return BitVector.join(rlf_eval(g, q, x) for x in blocks)


@dataclass(frozen=True)
class LocalFunction:
    hypergraph: Hypergraph
    predicate: Predicate

    def __call__(self, x: BitVector) -> BitVector:
        return rlf_eval(self.hypergraph, self.predicate, x)


def ug_to_prg(functions: Sequence[LocalFunction], seeds: Sequence[BitVector],
              inputs: Sequence[BitVector], ext: ExtractorDescriptor) -> BitVector:
    """
    Extract every column of the matrix whose i-th row is G_i(x^{(i)}).

    Column j (bit i = row i, bit j) is extracted with seed u_j; the outputs
    are concatenated in column order, m·ext.m bits in total.
    """
    if len(functions) != len(inputs):
        raise LengthMismatchError(f"{len(functions)} local functions for {len(inputs)} inputs")
    if ext.n != len(functions):
        raise LengthMismatchError(f"extractor reads {ext.n} bits, matrix has {len(functions)} rows")
    rows = [f(x) for f, x in zip(functions, inputs)]
    widths = {r.length for r in rows}
    if len(widths) != 1:
        raise LengthMismatchError("local functions must share one output length")
    m = widths.pop()
    if len(seeds) != m:
        raise LengthMismatchError(f"{len(seeds)} extractor seeds for {m} columns")
    out = []
    for j, u in enumerate(seeds):
        column = BitVector.from_bits((r.bits >> j) & 1 for r in rows)
        out.append(ext(column, u))
    return BitVector.join(out)


def nz_seed_length(ext: ExtractorDescriptor, rounds: int) -> int:
    return ext.n + rounds * ext.d


def nz_prg(seed: BitVector, ext: ExtractorDescriptor, rounds: int) -> BitVector:
    """
    Ext(X, s_1) ∘ ... ∘ Ext(X, s_rounds) with X the first ext.n seed bits.

    The long block is never modified; each round consumes one short seed.

    Raises:
        LengthMismatchError: seed shorter than ext.n + rounds·ext.d
    """
    if rounds < 1:
        raise ParameterError(f"need at least one round, got {rounds}")
    need = nz_seed_length(ext, rounds)
    if seed.length < need:
        raise LengthMismatchError(f"{rounds} rounds need {need} seed bits, got {seed.length}")
    if seed.length > need:
        logger.debug(f"nz_prg ignores the trailing {seed.length - need} seed bits")
    parts = seed.split([ext.n] + [ext.d] * rounds + [seed.length - need])
    long_block, shorts = parts[0], parts[1:1 + rounds]
    return BitVector.join(ext(long_block, s) for s in shorts)


def stretch_prg(generator: Generator, r: int, c: int) -> Generator:
    """
    G^{(1)} = G; G^{(i+1)} applies G to every r-bit block of G^{(i)}'s output.

    A partial trailing block is dropped.
    """
    if r < 1 or c < 1:
        raise ParameterError(f"need r >= 1 and c >= 1, got {r}, {c}")

    def stretched(seed: BitVector) -> BitVector:
        if seed.length != r:
            raise LengthMismatchError(f"generator reads {r} bits, seed has {seed.length}")
        out = generator(seed)
        for _ in range(c - 1):
            blocks = out.length // r
            out = BitVector.join(generator(out.slice(b * r, (b + 1) * r)) for b in range(blocks))
        return out

    return stretched


def stretch_output_length(t: int, r: int, c: int) -> int:
    """t·(t/r)^{c−1} when r divides t; in general iterate ⌊len/r⌋·t."""
    length = t
    for _ in range(c - 1):
        length = (length // r) * t
    return length


def classic_prg(family: KeyedFunction, key_length: int) -> Generator:
    """G(k ∘ x) = k ∘ F(k, x); the key occupies the low key_length bits."""

    def generator(seed: BitVector) -> BitVector:
        if seed.length < key_length:
            raise LengthMismatchError(f"seed of {seed.length} bits is shorter than the key ({key_length})")
        key, x = seed.split([key_length, seed.length - key_length])
        return key.concat(family(key, x))

    return generator


def local_function_family(g: Hypergraph, q: Predicate, blocks: int) -> KeyedFunction:
    """Keyed form of parallel_rlf; the key is ignored, the input is split into `blocks` equal parts."""

    def family(key: BitVector, x: BitVector) -> BitVector:
        if x.length != blocks * g.n:
            raise LengthMismatchError(f"expected {blocks * g.n} input bits, got {x.length}")
        return parallel_rlf(g, q, x.split([g.n] * blocks))

    return family


def rlf_output_balance(g: Hypergraph, q: Predicate, samples: int, rng: np.random.Generator) -> List[float]:
    """Empirical Pr[output_i = 1] on uniform inputs; a smoke statistic, not a security claim."""
    ones = np.zeros(g.m)
    for _ in range(samples):
        y = rlf_eval(g, q, BitVector.random(g.n, rng))
        ones += np.array(y.to_bits(), dtype=float)
    return (ones / max(samples, 1)).tolist()


def predicate_bias(q: Predicate) -> float:
    """|Pr_z[Q(z) = 1] − 1/2| over uniform patterns."""
    return abs(sum(q.table) / len(q.table) - 0.5)


def nz_output_length(ext: ExtractorDescriptor, rounds: int) -> int:
    return rounds * ext.m


def rounds_for_length(ext: ExtractorDescriptor, length: int) -> int:
    return max(1, math.ceil(length / ext.m))
