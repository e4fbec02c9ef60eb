"""
Extractor combinators.

Block-source and parallel extraction, XOR error reduction, output boosting
by sample-then-extract, and condense-then-extract. Combinators accept and
return ExtractorDescriptors so they nest; when every inner descriptor is
linear the composed descriptor exposes its per-seed matrix as well.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from services.bitcore import BitVector, apply_columns
from services.descriptors import ExtractorDescriptor, register_construction
from services.errors import LengthMismatchError, ParameterError
from services.samplers import SamplerDescriptor, sample_source, sampler_from_recipe

logger = logging.getLogger(__name__)


class _MatrixCache:
    """Per-seed column lists of a linear descriptor, computed once per seed."""

    def __init__(self, ext: ExtractorDescriptor):
        self.ext = ext
        self._columns: Dict[int, List[int]] = {}

    def __call__(self, seed: BitVector) -> List[int]:
        cols = self._columns.get(seed.bits)
        if cols is None:
            cols = self.ext.matrix(seed)
            self._columns[seed.bits] = cols
        return cols


# Block-source and parallel extraction


def block_extract(blocks: Sequence[BitVector], seed: BitVector,
                  exts: Sequence[ExtractorDescriptor]) -> BitVector:
    """Ext_1(X_1, seed) ∘ ... ∘ Ext_t(X_t, seed) with one shared seed."""
    if len(blocks) != len(exts):
        raise LengthMismatchError(f"{len(blocks)} blocks for {len(exts)} extractors")
    return BitVector.join(ext(block, seed) for block, ext in zip(blocks, exts))


def block_extract_descriptor(exts: Sequence[ExtractorDescriptor]) -> ExtractorDescriptor:
    """Source = X_1 ∘ ... ∘ X_t; errors add up over the blocks."""
    if not exts:
        raise ParameterError("block extraction needs at least one extractor")
    d = exts[0].d
    if any(e.d != d for e in exts):
        raise LengthMismatchError("block extractors must share one seed length")
    widths = [e.n for e in exts]

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        return block_extract(x.split(widths), seed, exts)

    columns = None
    if all(e.linear for e in exts):
        def columns(seed: BitVector) -> List[int]:
            cols: List[int] = []
            shift = 0
            for e in exts:
                cols.extend(col << shift for col in e.matrix(seed))
                shift += e.m
            return cols

    return ExtractorDescriptor(
        name="block_extract",
        n=sum(widths), d=d, m=sum(e.m for e in exts),
        k_claim=sum(e.k_claim for e in exts),
        eps_claim=min(1.0, sum(e.eps_claim for e in exts)),
        locality_claim=max(e.locality_claim for e in exts),
        evaluate=evaluate,
        linear=all(e.linear for e in exts),
        children=list(exts),
        columns=columns,
    )


def parallel_extract(x: BitVector, seeds: Sequence[BitVector], ext: ExtractorDescriptor) -> BitVector:
    """Ext(x, u_1) ∘ ... ∘ Ext(x, u_t)."""
    return BitVector.join(ext(x, u) for u in seeds)


def parallel_extract_descriptor(ext: ExtractorDescriptor, t: int, s: float = 1.0) -> ExtractorDescriptor:
    """t independent seeds on one source; claimed error t(ε + 2^{−s}) at min-entropy k + t·m + s."""
    if t < 1:
        raise ParameterError(f"need at least one copy, got {t}")

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        return parallel_extract(x, seed.split([ext.d] * t), ext)

    columns = None
    if ext.linear:
        def columns(seed: BitVector) -> List[int]:
            cols = [0] * ext.n
            for i, u in enumerate(seed.split([ext.d] * t)):
                for c, col in enumerate(ext.matrix(u)):
                    cols[c] |= col << (i * ext.m)
            return cols

    return ExtractorDescriptor(
        name="parallel_extract",
        n=ext.n, d=t * ext.d, m=t * ext.m,
        k_claim=ext.k_claim + t * ext.m + s,
        eps_claim=min(1.0, t * (ext.eps_claim + 2.0 ** -s)),
        locality_claim=ext.locality_claim,
        evaluate=evaluate,
        linear=ext.linear,
        params={"t": t, "s": s},
        children=[ext],
        columns=columns,
    )


# Error reduction


@dataclass
class ErrorReductionParams:
    """
    Z = ⊕_{i ≤ t1} (Ext₁(Y_{i,1}, S_i) ∘ ... ∘ Ext₁(Y_{i,t2}, S_i)), Y_i = Ext₀(X, R_i).

    Trailing bits of Y_i beyond t2·inner1.n are dropped.
    """

    t1: int
    t2: int
    inner0: ExtractorDescriptor
    inner1: ExtractorDescriptor
    delta1: Optional[float] = None
    dropped_bits: int = field(init=False, default=0)

    def __post_init__(self):
        if self.t1 < 1 or self.t2 < 1:
            raise ParameterError(f"t1 and t2 must be >= 1, got {self.t1}, {self.t2}")
        used = self.t2 * self.inner1.n
        if used > self.inner0.m:
            raise ParameterError(f"t2·n1 = {used} exceeds the inner output length {self.inner0.m}")
        self.dropped_bits = self.inner0.m - used
        if self.dropped_bits:
            logger.warning(f"error reduction drops the trailing {self.dropped_bits} bits of each Y_i")

    @property
    def seed_length(self) -> int:
        return self.t1 * (self.inner0.d + self.inner1.d)

    @property
    def output_length(self) -> int:
        return self.t2 * self.inner1.m

    def split_seed(self, seed: BitVector) -> Tuple[List[BitVector], List[BitVector]]:
        """(R_1..R_t1, S_1..S_t1); the R's occupy the low bits."""
        if seed.length != self.seed_length:
            raise LengthMismatchError(f"seed bundle has {seed.length} bits, expected {self.seed_length}")
        parts = seed.split([self.inner0.d] * self.t1 + [self.inner1.d] * self.t1)
        return parts[:self.t1], parts[self.t1:]


def error_reduce(x: BitVector, seedbundle: BitVector, p: ErrorReductionParams) -> BitVector:
    rs, ss = p.split_seed(seedbundle)
    n1 = p.inner1.n
    z = 0
    for r, s in zip(rs, ss):
        y = p.inner0(x, r)
        z_i = BitVector.join(p.inner1(y.slice(j * n1, (j + 1) * n1), s) for j in range(p.t2))
        z ^= z_i.bits
    return BitVector(p.output_length, z)


def error_reduction_bound(eps0: float, eps1: float, t1: int, t2: int,
                          delta1: Optional[float] = None, slack: float = 0.0) -> float:
    """(2ε₀)^{t1} + t2(ε₀ + ε₁) + 2^{−Δ₁} + ε′, capped at 1; measured ε₀ stands in for ε₀′."""
    bound = (2 * eps0) ** t1 + t2 * (eps0 + eps1) + slack
    if delta1 is not None:
        bound += 2.0 ** -delta1
    return min(1.0, bound)


def error_reduction_descriptor(p: ErrorReductionParams) -> ExtractorDescriptor:
    inner0, inner1 = p.inner0, p.inner1
    linear = inner0.linear and inner1.linear

    columns = None
    if linear:
        m0_cols = _MatrixCache(inner0)
        m1_cols = _MatrixCache(inner1)
        n1 = inner1.n
        chunk_mask = (1 << n1) - 1

        def columns(seed: BitVector) -> List[int]:
            rs, ss = p.split_seed(seed)
            cols = [0] * inner0.n
            for r, s in zip(rs, ss):
                a = m0_cols(r)
                b = m1_cols(s)
                for c, y in enumerate(a):
                    z = 0
                    for j in range(p.t2):
                        z |= apply_columns(b, (y >> (j * n1)) & chunk_mask) << (j * inner1.m)
                    cols[c] ^= z
            return cols

    return ExtractorDescriptor(
        name="error_reduction",
        n=inner0.n, d=p.seed_length, m=p.output_length,
        k_claim=inner0.k_claim + (p.delta1 or 0),
        eps_claim=error_reduction_bound(inner0.eps_claim, inner1.eps_claim, p.t1, p.t2, p.delta1),
        locality_claim=min(inner0.n, p.t1 * inner0.locality_claim * inner1.locality_claim),
        evaluate=lambda x, seed: error_reduce(x, seed, p),
        linear=linear,
        params={"t1": p.t1, "t2": p.t2, "delta1": p.delta1},
        children=[inner0, inner1],
        columns=columns,
    )


def error_reduction_extractor(inner0: ExtractorDescriptor, inner1: ExtractorDescriptor, eps: float,
                              t1: Optional[int] = None, t2: Optional[int] = None,
                              delta1: Optional[float] = None) -> ExtractorDescriptor:
    """
    Error reduction targeting ε.

    t1 = min{t : (2ε₀)^t ≤ 0.1ε}, t2 = max(1, ⌊m₀^{1/3}⌋) unless given. When
    ε ≥ ε₀ the inner extractor already suffices and is returned unchanged.
    """
    eps0 = inner0.eps_claim
    if eps >= eps0:
        logger.info(f"target ε={eps} ≥ ε₀={eps0}; using the inner extractor directly")
        return inner0
    if t1 is None:
        if 2 * eps0 >= 1:
            raise ParameterError(f"2ε₀ = {2 * eps0} ≥ 1; repetition cannot reduce the error")
        t1 = max(1, math.ceil(math.log(0.1 * eps) / math.log(2 * eps0)))
        while (2 * eps0) ** t1 > 0.1 * eps:
            t1 += 1
    if t2 is None:
        t2 = max(1, math.floor(round(inner0.m ** (1 / 3), 9)))
    return error_reduction_descriptor(ErrorReductionParams(t1=t1, t2=t2, inner0=inner0, inner1=inner1,
                                                           delta1=delta1))


def error_reduction_variant(inner0: ExtractorDescriptor, variant: str, eps: float,
                            t1: Optional[int] = None, t2: Optional[int] = None) -> ExtractorDescriptor:
    """
    Presets of the same combinator differing only in the second-stage extractor.

    "superpoly": Trevisan's extractor on each chunk (polylog seed, small output).
    "exponential": full-seed leftover hashing on each chunk (seed O(n₁), error 2^{−Ω(n₁)}).
    """
    from services.designs import get_weak_design
    from services.primitives import leftover_hash_descriptor, trevisan_descriptor

    t2 = t2 or max(1, math.floor(round(inner0.m ** (1 / 3), 9)))
    n1 = inner0.m // t2
    if n1 < 2:
        raise ParameterError(f"chunks of {n1} bits are too short for a second stage")
    k1 = max(1, math.floor(0.9 * n1))
    if variant == "superpoly":
        l = max(2, math.ceil(math.log2(n1)) + 1)
        inner1 = trevisan_descriptor(n1, get_weak_design(max(1, k1 // 2), 2.0, l))
    elif variant == "exponential":
        delta = max(1, k1 // 4)
        inner1 = leftover_hash_descriptor(n1, k1, delta)
    else:
        raise ParameterError(f"unknown error-reduction variant {variant!r}")
    return error_reduction_extractor(inner0, inner1, eps, t1=t1, t2=t2)


# Output boosting


@dataclass
class BoostParams:
    """
    Sample-then-extract boosting over t sampled blocks.

    fanout_cap bounds the number of seed chunks Ext′ consumes per step;
    derived as ⌊0.9(δ/t − 3τ)·m_s / m₀⌋ when delta and tau are given.
    """

    t: int
    sampler: SamplerDescriptor
    inner: ExtractorDescriptor
    d0: Optional[int] = None
    delta: Optional[float] = None
    tau: Optional[float] = None
    fanout_cap: Optional[int] = None

    def __post_init__(self):
        if self.t < 1:
            raise ParameterError(f"need at least one block, got t={self.t}")
        if self.inner.n != self.sampler.sample_count:
            raise LengthMismatchError(
                f"inner extractor reads {self.inner.n} bits, sampler yields {self.sampler.sample_count}")
        self.d0 = self.d0 or self.inner.d
        if self.d0 != self.inner.d:
            raise LengthMismatchError(f"chunk length {self.d0} differs from the inner seed length {self.inner.d}")
        if self.fanout_cap is None and self.delta is not None and self.tau is not None:
            cap = math.floor(0.9 * (self.delta / self.t - 3 * self.tau) * self.sampler.sample_count / self.inner.m)
            self.fanout_cap = max(1, cap)

    @property
    def seed_length(self) -> int:
        return self.t * self.sampler.seed_length + self.d0


@dataclass
class BoostTrace:
    output: BitVector
    lengths: List[int]
    clipped: List[bool]


def boost_trace(x: BitVector, seedbundle: BitVector, p: BoostParams) -> BoostTrace:
    """Y_t = Ext(X_t, U_0); Y_i = Ext′(X_i, Y_{i+1}) for i = t−1..1; lengths listed from Y_1."""
    if seedbundle.length != p.seed_length:
        raise LengthMismatchError(f"seed bundle has {seedbundle.length} bits, expected {p.seed_length}")
    parts = seedbundle.split([p.sampler.seed_length] * p.t + [p.d0])
    sampler_seeds, u0 = parts[:p.t], parts[p.t]
    blocks = [sample_source(x, p.sampler, s) for s in sampler_seeds]

    y = p.inner(blocks[-1], u0)
    lengths = [y.length]
    clipped = [False]
    for i in range(p.t - 2, -1, -1):
        chunks = y.length // p.d0
        was_clipped = p.fanout_cap is not None and chunks > p.fanout_cap
        if was_clipped:
            logger.debug(f"boost step {i + 1}: fan-out {chunks} clipped to {p.fanout_cap}")
            chunks = p.fanout_cap
        if chunks == 0:
            raise ParameterError(f"Y_{i + 2} has {y.length} bits, shorter than one seed chunk")
        y = BitVector.join(p.inner(blocks[i], y.slice(j * p.d0, (j + 1) * p.d0)) for j in range(chunks))
        lengths.append(y.length)
        clipped.append(was_clipped)
    return BoostTrace(output=y, lengths=lengths[::-1], clipped=clipped[::-1])


def boost_output(x: BitVector, seedbundle: BitVector, p: BoostParams) -> BitVector:
    return boost_trace(x, seedbundle, p).output


def boost_output_length(p: BoostParams) -> int:
    length = p.inner.m
    for _ in range(p.t - 1):
        chunks = length // p.d0
        if p.fanout_cap is not None:
            chunks = min(chunks, p.fanout_cap)
        length = chunks * p.inner.m
    return length


def boost_descriptor(p: BoostParams, n: int) -> ExtractorDescriptor:
    return ExtractorDescriptor(
        name="boost_output",
        n=n, d=p.seed_length, m=boost_output_length(p),
        k_claim=p.inner.k_claim, eps_claim=min(1.0, p.t * p.inner.eps_claim),
        locality_claim=n,
        evaluate=lambda x, seed: boost_output(x, seed, p),
        params={"n": n, "t": p.t, "sampler": p.sampler.recipe, "d0": p.d0, "delta": p.delta, "tau": p.tau,
                "fanout_cap": p.fanout_cap},
        children=[p.inner],
    )


# Condense then extract


def condense_then_extract(x: BitVector, seed: BitVector, cond: ExtractorDescriptor,
                          ext: ExtractorDescriptor) -> BitVector:
    """Ext(Cond(x, U1), U2); U1 occupies the low cond.d seed bits."""
    if ext.n != cond.m:
        raise LengthMismatchError(f"extractor reads {ext.n} bits, condenser outputs {cond.m}")
    if seed.length != cond.d + ext.d:
        raise LengthMismatchError(f"seed has {seed.length} bits, expected {cond.d + ext.d}")
    u1, u2 = seed.split([cond.d, ext.d])
    return ext(cond(x, u1), u2)


def condense_then_extract_descriptor(cond: ExtractorDescriptor, ext: ExtractorDescriptor) -> ExtractorDescriptor:
    if ext.n != cond.m:
        raise LengthMismatchError(f"extractor reads {ext.n} bits, condenser outputs {cond.m}")
    linear = cond.linear and ext.linear

    columns = None
    if linear:
        def columns(seed: BitVector) -> List[int]:
            u1, u2 = seed.split([cond.d, ext.d])
            ext_cols = ext.matrix(u2)
            return [apply_columns(ext_cols, col) for col in cond.matrix(u1)]

    return ExtractorDescriptor(
        name="condense_then_extract",
        n=cond.n, d=cond.d + ext.d, m=ext.m,
        k_claim=cond.k_claim, eps_claim=min(1.0, cond.eps_claim + ext.eps_claim),
        locality_claim=min(cond.n, cond.locality_claim * ext.locality_claim),
        evaluate=lambda x, seed: condense_then_extract(x, seed, cond, ext),
        linear=linear,
        children=[cond, ext],
        columns=columns,
    )


# Registry factories


@register_construction("block_extract")
def _block_extract_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return block_extract_descriptor(children)


@register_construction("parallel_extract")
def _parallel_extract_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return parallel_extract_descriptor(children[0], params["t"], params.get("s", 1.0))


@register_construction("error_reduction")
def _error_reduction_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return error_reduction_descriptor(ErrorReductionParams(
        t1=params["t1"], t2=params["t2"], inner0=children[0], inner1=children[1], delta1=params.get("delta1")))


@register_construction("condense_then_extract")
def _condense_then_extract_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return condense_then_extract_descriptor(children[0], children[1])


@register_construction("boost_output")
def _boost_output_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    p = BoostParams(t=params["t"], sampler=sampler_from_recipe(params["sampler"]), inner=children[0],
                    d0=params.get("d0"), delta=params.get("delta"), tau=params.get("tau"),
                    fanout_cap=params.get("fanout_cap"))
    return boost_descriptor(p, params["n"])
