"""
The basic low-locality extractor.

Pipeline: selection f1 → amplification rounds (l → 3l each) → expander-walk
amplification to l3 bits → NW evaluation over a design on the seed. Every
stage maps a packed input to a parity footprint, a bitmask of the source
positions whose XOR is the output bit, so locality is computed exactly.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional

from models.profiles import PipelineProfile, ProfileKind
from services.bitcore import BitVector, GF2Field, inner_product, parity
from services.descriptors import ExtractorDescriptor, register_construction
from services.designs import Design, get_design, restrict
from services.errors import LengthMismatchError, ParameterError
from services.expander import ExpanderGraph, MGGGraph, mgg_for_bits, random_walk

logger = logging.getLogger(__name__)

FootprintFn = Callable[[int], int]

# Input widths up to this many bits get a memoized footprint table
_MEMO_BITS = 16


@dataclass(frozen=True)
class ParityFootprint:
    """Output bit ⊕_{i ∈ indices} x_i; mask bit i marks index i."""

    n: int
    mask: int = 0

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "ParityFootprint":
        mask = 0
        for i in indices:
            if i < 0 or i >= n:
                raise ParameterError(f"footprint index {i} outside [0, {n})")
            mask ^= 1 << i
        return cls(n, mask)

    @property
    def indices(self) -> List[int]:
        return [i for i in range(self.n) if (self.mask >> i) & 1]

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def value(self, x: BitVector) -> int:
        if x.length != self.n:
            raise LengthMismatchError(f"footprint over {self.n} bits applied to {x.length} bits")
        return parity(self.mask & x.bits)

    def __xor__(self, other: "ParityFootprint") -> "ParityFootprint":
        if other.n != self.n:
            raise LengthMismatchError(f"footprints over {self.n} and {other.n} bits")
        return ParityFootprint(self.n, self.mask ^ other.mask)


# Profiles


def desk_profile(n: int = 16, c2: int = 1, t_xor: int = 8, m: int = 4, l1: Optional[int] = None,
                 amp3_overlap: Optional[int] = None, nw_overlap: Optional[int] = None,
                 k: Optional[float] = None, eps: float = 0.125) -> PipelineProfile:
    """
    Desk-scale profile with explicit sizes.

    Design universes use the shared-prefix layout that the greedy design
    search produces: every set shares the first `overlap` positions.
    """
    if n < 2:
        raise ParameterError(f"source length must be >= 2, got {n}")
    l1 = l1 or math.ceil(math.log2(n))
    l2 = 3 ** (c2 + 1) * l1
    amp3_overlap = l2 // 4 if amp3_overlap is None else amp3_overlap
    a_len = l2 + (t_xor - 1) * (l2 - amp3_overlap)
    walk_coin_bits = 3 * (t_xor - 1)
    l3 = a_len + t_xor + l2 + walk_coin_bits
    nw_overlap = l3 // 2 if nw_overlap is None else nw_overlap
    d = l3 + (m - 1) * (l3 - nw_overlap)
    return PipelineProfile(
        kind=ProfileKind.DESK, n=n, k=k if k is not None else 0.75 * n, eps=eps,
        l1=l1, c2=c2, l2=l2, t_xor=t_xor, amp3_overlap=amp3_overlap, a_len=a_len,
        walk_coin_bits=walk_coin_bits, l3=l3, m=m, nw_overlap=nw_overlap, d=d,
    )


def asymptotic_profile(n: int, c2: int = 2, gamma: float = 1 / 32) -> PipelineProfile:
    """Asymptotic constants; structural only, the designs are far beyond desk scale."""
    l1 = math.ceil(math.log2(n))
    l2 = 3 ** (c2 + 1) * l1
    a_len = math.floor(40 * l2 / gamma)
    t_xor = l2
    walk_coin_bits = 3 * (t_xor - 1)
    l3 = a_len + t_xor + l2 + walk_coin_bits
    theta = l1 / (900 * l3)
    d = math.floor(10 * l3 / theta)
    m = max(1, math.floor(n ** (1 / 3600)))
    return PipelineProfile(
        kind=ProfileKind.ASYMPTOTIC, n=n, k=n / l1, eps=n ** (-1 / 600),
        l1=l1, c2=c2, l2=l2, t_xor=t_xor, amp3_overlap=math.floor(gamma * l2 / 4), a_len=a_len,
        walk_coin_bits=walk_coin_bits, l3=l3, m=m, nw_overlap=math.floor(theta * l3), d=d,
        gamma=gamma, theta=theta,
    )


# Pipeline stages


def f1_footprint(i: int, n: int) -> ParityFootprint:
    """{i}, or ∅ for padding positions i ≥ n."""
    if i < 0:
        raise ParameterError(f"selection index must be >= 0, got {i}")
    return ParityFootprint(n, 1 << i if i < n else 0)


def _memoized(fn: FootprintFn, width: int) -> FootprintFn:
    if width <= _MEMO_BITS:
        return lru_cache(maxsize=1 << width)(fn)
    return fn


def make_f1(n: int, l1: int) -> FootprintFn:
    def f1(i: int) -> int:
        return 1 << i if i < n else 0
    return _memoized(f1, l1)


def amp2_step(f: FootprintFn, l: int, part: int = 1) -> FootprintFn:
    """
    f'(s, r) = ⟨s, f(a_1) ∘ ... ∘ f(a_l)⟩ on 3l input bits.

    z packs s in the low l bits and r = (A, B) in the next 2l; a_i = A ⊕ i·B.
    Both parts of the amplification share this formula.
    """
    if part not in (1, 2):
        raise ParameterError(f"amplification part must be 1 or 2, got {part}")
    field = GF2Field.standard(l)
    mask = (1 << l) - 1

    def amplified(z: int) -> int:
        s = z & mask
        a = (z >> l) & mask
        b = z >> (2 * l)
        out = 0
        i = 0
        while s:
            if s & 1:
                out ^= f(a ^ field.mul(i, b))
            s >>= 1
            i += 1
        return out

    return _memoized(amplified, 3 * l)


def amp3_step(f2: FootprintFn, profile: PipelineProfile, design: Design, graph: ExpanderGraph) -> FootprintFn:
    """
    f'(a, s, v1, w) = ⟨s, f2(a|_{S_1} ⊕ v_1) ∘ ... ∘ f2(a|_{S_t} ⊕ v_t)⟩ on l3 bits.

    v_2..v_t are the walk vertices from v1 driven by w.
    """
    t = profile.t_xor
    if design.m != t or design.set_size != profile.l2 or design.universe_size != profile.a_len:
        raise ParameterError("amp3 design does not match the profile")
    a_mask = (1 << profile.a_len) - 1
    s_mask = (1 << t) - 1
    v_mask = (1 << profile.l2) - 1
    s_shift = profile.a_len
    v_shift = s_shift + t
    w_shift = v_shift + profile.l2
    label = graph.label if isinstance(graph, MGGGraph) else (lambda v: v)

    def amplified(z: int) -> int:
        if z >> profile.l3:
            raise LengthMismatchError(f"amp3 input exceeds {profile.l3} bits")
        a = z & a_mask
        s = (z >> s_shift) & s_mask
        if not s:
            return 0
        v1 = (z >> v_shift) & v_mask
        coins = BitVector(profile.walk_coin_bits, z >> w_shift)
        walk = random_walk(graph, v1, t - 1, coins).vertices
        out = 0
        for i in range(t):
            if (s >> i) & 1:
                out ^= f2(restrict(a, design.sets[i]) ^ (label(walk[i]) & v_mask))
        return out

    return amplified


class BasicExtractor:
    """The full pipeline for one profile, with its designs and walk graph."""

    def __init__(self, profile: PipelineProfile):
        if profile.kind != ProfileKind.DESK:
            raise ParameterError("only desk profiles can be instantiated")
        self.profile = profile
        self.amp3_design = get_design(profile.a_len, profile.t_xor, profile.amp3_overlap, profile.l2)
        self.nw_design = get_design(profile.d, profile.m, profile.nw_overlap, profile.l3)
        self.graph = mgg_for_bits(profile.l2)

        f = make_f1(profile.n, profile.l1)
        width = profile.l1
        for round_index in range(profile.c2 + 1):
            f = amp2_step(f, width, part=1 if round_index < profile.c2 else 2)
            width *= 3
        self.f2 = f
        self.f3 = amp3_step(self.f2, profile, self.amp3_design, self.graph)
        logger.info(f"basic extractor ready: n={profile.n} d={profile.d} m={profile.m} "
                    f"profile={profile.profile_hash()[:12]}")

    def footprints(self, seed: BitVector) -> List[int]:
        if seed.length != self.profile.d:
            raise LengthMismatchError(f"seed has {seed.length} bits, profile needs {self.profile.d}")
        return [self.f3(restrict(seed, s)) for s in self.nw_design.sets]

    def evaluate(self, x: BitVector, seed: BitVector) -> BitVector:
        out = 0
        for j, row in enumerate(self.footprints(seed)):
            out |= parity(row & x.bits) << j
        return BitVector(self.profile.m, out)

    # Second code path: values instead of footprints

    def nested_evaluate(self, x: BitVector, seed: BitVector) -> BitVector:
        """Evaluate the nested inner-product definition directly on x."""
        p = self.profile

        def level1(i: int) -> int:
            return x[i] if i < p.n else 0

        levels = [level1]
        width = p.l1
        for _ in range(p.c2 + 1):
            levels.append(self._nested_amp2(levels[-1], width))
            width *= 3
        f2 = levels[-1]

        out = []
        for s_i in self.nw_design.sets:
            z = restrict(seed, s_i)
            a = z & ((1 << p.a_len) - 1)
            s = BitVector(p.t_xor, (z >> p.a_len) & ((1 << p.t_xor) - 1))
            v1 = (z >> (p.a_len + p.t_xor)) & ((1 << p.l2) - 1)
            coins = BitVector(p.walk_coin_bits, z >> (p.a_len + p.t_xor + p.l2))
            walk = random_walk(self.graph, v1, p.t_xor - 1, coins).vertices
            values = BitVector.from_bits(
                f2(restrict(a, self.amp3_design.sets[i]) ^ (self.graph.label(walk[i]) & ((1 << p.l2) - 1)))
                for i in range(p.t_xor)
            )
            out.append(inner_product(s, values))
        return BitVector.from_bits(out)

    @staticmethod
    def _nested_amp2(f: Callable[[int], int], l: int) -> Callable[[int], int]:
        field = GF2Field.standard(l)
        mask = (1 << l) - 1

        def amplified(z: int) -> int:
            s = BitVector(l, z & mask)
            a, b = (z >> l) & mask, z >> (2 * l)
            values = BitVector.from_bits(f(a ^ field.mul(i, b)) for i in range(l))
            return inner_product(s, values)

        return amplified

    def descriptor(self) -> ExtractorDescriptor:
        p = self.profile
        return ExtractorDescriptor(
            name="basic_extractor",
            n=p.n, d=p.d, m=p.m,
            k_claim=p.k, eps_claim=p.eps,
            locality_claim=p.locality_bound,
            evaluate=self.evaluate,
            linear=True,
            params=p.model_dump(mode="json"),
            footprints=self.footprints,
        )


_extractors: Dict[str, BasicExtractor] = {}


def get_basic_extractor(profile: PipelineProfile) -> BasicExtractor:
    key = profile.profile_hash()
    if key not in _extractors:
        _extractors[key] = BasicExtractor(profile)
    return _extractors[key]


def basic_extract(x: BitVector, seed: BitVector, profile: PipelineProfile) -> BitVector:
    """Output bit i = f3_footprint(seed|_{S_i}).value(x)."""
    if x.length != profile.n:
        raise LengthMismatchError(f"source has {x.length} bits, profile needs {profile.n}")
    return get_basic_extractor(profile).evaluate(x, seed)


def basic_extractor_descriptor(profile: PipelineProfile) -> ExtractorDescriptor:
    return get_basic_extractor(profile).descriptor()


@register_construction("basic_extractor")
def _basic_extractor_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return basic_extractor_descriptor(PipelineProfile.model_validate(params))
