"""
Deterministic extraction from oblivious bit-fixing sources.

An oblivious bit-fixing source is reduced to a non-oblivious one by taking
parities over design-extractor neighborhoods; a resilient function then
extracts a few bits, which seed a sample-then-extract step on the source.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.artifacts import DesignArtifact, DesignKind
from models.profiles import BitFixProfile
from services.artifact_cache import get_artifact_cache
from services.bitcore import BitVector, select_bits
from services.descriptors import ExtractorDescriptor, seed_prefixed
from services.designs import DesignExtractorGraph, build_design_extractor, load_design_artifact
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError
from services.primitives import polynomial_hash_descriptor, short_seed_hash_descriptor
from services.resilient import ResilientFunction, TribesMajority
from services.samplers import SamplerDescriptor, expander_walk_sampler

logger = logging.getLogger(__name__)

DeterministicExtractor = Callable[[BitVector], BitVector]


@dataclass(frozen=True)
class BitFixingSource:
    """n-bit source whose `free` positions are uniform and whose other positions equal fixed_values."""

    n: int
    free: Tuple[int, ...]
    fixed_values: int = 0

    def __post_init__(self):
        if any(p < 0 or p >= self.n for p in self.free):
            raise ParameterError(f"free positions must lie in [0, {self.n})")
        if len(set(self.free)) != len(self.free):
            raise ParameterError("free positions must be distinct")
        if self.fixed_values < 0 or self.fixed_values >= 1 << self.n:
            raise ParameterError(f"fixed values must fit in {self.n} bits")

    @property
    def k(self) -> int:
        return len(self.free)

    @property
    def free_mask(self) -> int:
        return sum(1 << p for p in self.free)

    def assign(self, assignment: int) -> BitVector:
        """Source string whose j-th free position (in `free` order) takes bit j of `assignment`."""
        value = self.fixed_values & ~self.free_mask
        for j, p in enumerate(self.free):
            if (assignment >> j) & 1:
                value |= 1 << p
        return BitVector(self.n, value)

    def sample(self, rng: np.random.Generator) -> BitVector:
        return self.assign(int(rng.integers(0, 1 << self.k)) if self.k else 0)

    def all_assignments_array(self) -> np.ndarray:
        """Every source string as packed uint64 (n ≤ 64)."""
        if self.n > 64:
            raise ParameterError(f"packed enumeration needs n <= 64, got {self.n}")
        base = np.uint64(self.fixed_values & ~self.free_mask)
        assignments = np.arange(1 << self.k, dtype=np.uint64)
        values = np.full(assignments.shape, base, dtype=np.uint64)
        for j, p in enumerate(self.free):
            values |= ((assignments >> np.uint64(j)) & np.uint64(1)) << np.uint64(p)
        return values

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator) -> "BitFixingSource":
        free = tuple(sorted(int(p) for p in rng.choice(n, size=k, replace=False)))
        fixed = BitVector.random(n, rng).bits
        return cls(n=n, free=free, fixed_values=fixed)


# OBF → NOBF reduction


def obf_to_nobf(x: BitVector, g: DesignExtractorGraph) -> BitVector:
    """Y_i = ⊕_{j ∈ Γ(i)} x_j over the left vertices of g."""
    if x.length != g.right_count:
        raise LengthMismatchError(f"graph has {g.right_count} right vertices, source has {x.length} bits")
    value = 0
    for i, mask in enumerate(g.neighbor_masks()):
        if (mask & x.bits).bit_count() & 1:
            value |= 1 << i
    return BitVector(g.left_count, value)


def _parity_columns(masks: Sequence[int], xs: np.ndarray) -> np.ndarray:
    """(S, N) parities of packed sources against each neighborhood mask."""
    out = np.empty((xs.shape[0], len(masks)), dtype=np.uint8)
    for i, mask in enumerate(masks):
        v = xs & np.uint64(mask)
        for shift in (32, 16, 8, 4, 2, 1):
            v = v ^ (v >> np.uint64(shift))
        out[:, i] = (v & np.uint64(1)).astype(np.uint8)
    return out


@dataclass
class NOBFWitness:
    """
    Good outputs of the reduction and their verified independence.

    t_wise is the claimed order; gamma is the largest measured bias of a XOR
    of at most t_wise good outputs (0 when every such XOR is exactly unbiased).
    """

    N: int
    good: Tuple[int, ...]
    bad: Tuple[int, ...]
    q: int
    t_wise: int
    gamma: float
    unique_neighbor_ok: bool
    exhaustive_ok: Optional[bool]
    subsets_checked: int
    failures: List[Tuple[int, ...]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "N": self.N, "good": list(self.good), "bad": list(self.bad), "q": self.q,
            "t_wise": self.t_wise, "gamma": self.gamma,
            "unique_neighbor_ok": self.unique_neighbor_ok,
            "exhaustive_ok": self.exhaustive_ok, "subsets_checked": self.subsets_checked,
        }


def claimed_t_wise(g: DesignExtractorGraph, delta: float, eps: float) -> int:
    """⌊((δ − ε)D − 1)/(αD)⌋ + 1, at least 1."""
    numerator = (delta - eps) * g.degree - 1
    return max(1, math.floor(numerator / (g.alpha * g.degree) + 1e-9) + 1)


def compute_nobf_witness(g: DesignExtractorGraph, source: BitFixingSource, eps: float,
                         exhaustive: bool = True, max_free: int = 16) -> NOBFWitness:
    """
    Classify outputs and verify that good outputs are t-wise independent.

    Bad outputs are Bad_S for S = the free positions: left vertices whose
    free-neighbor density differs from δ = k/n by more than ε. Every subset
    of at most t good outputs is checked twice: its neighborhood symmetric
    difference must contain a free position, and (when exhaustive) its XOR
    must be exactly balanced over all 2^k free assignments.

    Raises:
        BudgetExceededError: exhaustive check over more than max_free free bits
    """
    if source.n != g.right_count:
        raise LengthMismatchError(f"graph has {g.right_count} right vertices, source has {source.n} bits")
    delta = source.k / source.n
    masks = g.neighbor_masks()
    free_mask = source.free_mask
    good, bad = [], []
    for i, mask in enumerate(masks):
        density = (mask & free_mask).bit_count() / g.degree
        (bad if abs(density - delta) > eps + 1e-12 else good).append(i)
    t = claimed_t_wise(g, delta, eps)

    if exhaustive and source.k > max_free:
        raise BudgetExceededError(f"2^{source.k} free assignments exceed the exhaustive cap 2^{max_free}")
    columns = _parity_columns([masks[i] for i in good], source.all_assignments_array()) if exhaustive else None

    unique_ok = True
    exhaustive_ok: Optional[bool] = True if exhaustive else None
    worst_bias = 0.0
    checked = 0
    failures: List[Tuple[int, ...]] = []
    for size in range(1, min(t, len(good)) + 1):
        for subset in itertools.combinations(range(len(good)), size):
            checked += 1
            diff = 0
            for j in subset:
                diff ^= masks[good[j]]
            if not diff & free_mask:
                unique_ok = False
                failures.append(tuple(good[j] for j in subset))
            if columns is not None:
                xor = np.bitwise_xor.reduce(columns[:, list(subset)], axis=1)
                bias = abs(float(xor.mean()) - 0.5)
                worst_bias = max(worst_bias, bias)
                if bias > 0:
                    exhaustive_ok = False

    if failures:
        logger.warning(f"{len(failures)} good-output subsets of size <= {t} lack a free distinguishing neighbor")
    logger.info(f"NOBF witness: {len(good)} good, {len(bad)} bad outputs, t={t}, {checked} subsets checked")
    return NOBFWitness(N=g.left_count, good=tuple(good), bad=tuple(bad), q=len(bad), t_wise=t,
                       gamma=worst_bias, unique_neighbor_ok=unique_ok, exhaustive_ok=exhaustive_ok,
                       subsets_checked=checked, failures=failures)


# Extraction


def resilient_extract(y: BitVector, rf: ResilientFunction) -> BitVector:
    return rf(y)


def bitfix_error_reduce(slices: Sequence[BitVector], ext: DeterministicExtractor) -> BitVector:
    """⊕_i ext(x_i): the GF(2^m) sum of the per-slice outputs."""
    if not slices:
        raise LengthMismatchError("error reduction needs at least one slice")
    out = ext(slices[0])
    for x in slices[1:]:
        out = out ^ ext(x)
    return out


def sampled_complement(x: BitVector, positions: Sequence[int]) -> BitVector:
    """x on [n] minus the sampled positions, in increasing order, padded with zeros back to n bits."""
    removed = set(positions)
    kept = [i for i in range(x.length) if i not in removed]
    return select_bits(x, kept).concat(BitVector.zeros(x.length - len(kept)))


def bitfix_boost(x: BitVector, det: DeterministicExtractor, seeded: ExtractorDescriptor,
                 samp: SamplerDescriptor) -> BitVector:
    """
    Ext(x) = seeded(x_{[n] minus S(Z1)} ∘ 0^{|S|}, Z2) where det(x) = Z1 ∘ Z2.

    Raises:
        LengthMismatchError: det output is not samp.seed_length + seeded.d bits
    """
    z = det(x)
    if z.length != samp.seed_length + seeded.d:
        raise LengthMismatchError(
            f"deterministic output of {z.length} bits does not split into {samp.seed_length} + {seeded.d}")
    z1, z2 = z.split([samp.seed_length, seeded.d])
    return seeded(sampled_complement(x, samp(z1)), z2)


# Pipeline


def get_design_extractor(n0: int, b: int, d0: int, alpha: float, K: int, eps: float = 0.25,
                         target: Optional[int] = None) -> DesignExtractorGraph:
    """
    Cached design extractor over a seed-prefixed polynomial hash; M = 2^{d0+b}.

    Disk-mirrored artifacts are re-verified on load.
    """
    params = {"n0": n0, "b": b, "d0": d0, "alpha": alpha, "K": K, "eps": eps, "target": target}

    def build() -> DesignExtractorGraph:
        base = seed_prefixed(polynomial_hash_descriptor(n0, b, d0))
        return build_design_extractor(base, alpha, K, target=target, eps=eps)

    return get_artifact_cache().get_or_build(
        DesignKind.DESIGN_EXTRACTOR.value,
        params,
        build,
        dump=lambda g: g.to_artifact().model_dump(mode="json"),
        load=lambda data: load_design_artifact(DesignArtifact.model_validate(data)),
    )


def design_graph_for_profile(profile: BitFixProfile) -> DesignExtractorGraph:
    return get_design_extractor(profile.n0, profile.b, profile.d0, profile.alpha, profile.K,
                                eps=profile.eps, target=profile.target)


@dataclass
class BitFixPipeline:
    """graph → resilient function → (sampler, seeded extractor) on one bit-fixing source length."""

    profile: BitFixProfile
    graph: DesignExtractorGraph
    rf: ResilientFunction
    sampler: SamplerDescriptor
    seeded: ExtractorDescriptor

    def deterministic(self, x: BitVector) -> BitVector:
        return resilient_extract(obf_to_nobf(x, self.graph), self.rf)

    def extract(self, x: BitVector) -> BitVector:
        if x.length != self.profile.n:
            raise LengthMismatchError(f"pipeline reads {self.profile.n} bits, source has {x.length}")
        return bitfix_boost(x, self.deterministic, self.seeded, self.sampler)

    @property
    def output_length(self) -> int:
        return self.seeded.m

    def describe(self) -> Dict:
        return {
            "profile": self.profile.model_dump(),
            "graph": {"N": self.graph.left_count, "M": self.graph.right_count, "D": self.graph.degree},
            "resilient": self.rf.describe(),
            "sampler": {"name": self.sampler.name, "seed_length": self.sampler.seed_length,
                        "samples": self.sampler.sample_count},
            "seeded": self.seeded.summary(),
        }


def build_bitfix_pipeline(profile: BitFixProfile, sample_count: int = 4, seeded_d: int = 6,
                          rf: Optional[ResilientFunction] = None) -> BitFixPipeline:
    """
    Wire a pipeline for `profile`: output m = ⌊(1 − γ)k⌋ bits.

    The sampler is a walk on an MGG over the n source positions; the seeded
    extractor is a short-seed linear hash; the resilient function defaults to
    tribes-majority with one output per seed bit the last two stages need.
    """
    graph = design_graph_for_profile(profile)
    sampler = expander_walk_sampler(profile.n, sample_count)
    m = max(1, math.floor((1 - profile.gamma) * profile.k))
    seeded = short_seed_hash_descriptor(profile.n, seeded_d, m, k=profile.k)
    rf = rf or TribesMajority(graph.left_count, sampler.seed_length + seeded.d)
    if rf.input_length != graph.left_count or rf.output_length != sampler.seed_length + seeded.d:
        raise LengthMismatchError("resilient function does not match the graph and the seed budget")
    logger.info(f"bit-fixing pipeline: n={profile.n}, N={graph.left_count}, m={m}")
    return BitFixPipeline(profile=profile, graph=graph, rf=rf, sampler=sampler, seeded=seeded)


def toy_profile() -> BitFixProfile:
    """n = 32 positions, k = 12 free bits; lines of degree-2 polynomials over GF(8) on 4 points."""
    return BitFixProfile.schedule(n=32, k=12, n0=8, b=3, d0=2, alpha=0.5, K=64, gamma=0.25, eps=0.125)


def verification_profile() -> BitFixProfile:
    """n = 16 positions, k = 12 free bits; the 16 lines of GF(4)² on 4 points each."""
    return BitFixProfile.schedule(n=16, k=12, n0=4, b=2, d0=2, alpha=0.25, K=4, gamma=0.25, eps=0.25)


def output_bias(pipeline: BitFixPipeline, source: BitFixingSource, max_free: int = 16) -> float:
    """SD of the pipeline output from uniform over every free-bit assignment."""
    if source.k > max_free:
        raise BudgetExceededError(f"2^{source.k} free assignments exceed the exhaustive cap 2^{max_free}")
    m = pipeline.output_length
    counts = np.zeros(1 << m, dtype=np.int64)
    for a in range(1 << source.k):
        counts[pipeline.extract(source.assign(a)).bits] += 1
    probs = counts / counts.sum()
    return float(0.5 * np.abs(probs - 1.0 / (1 << m)).sum())


_PIPELINE_PROFILES: Dict[int, Callable[[], BitFixProfile]] = {32: toy_profile}


@lru_cache(maxsize=4)
def pipeline_for_length(n: int) -> BitFixPipeline:
    """The wired pipeline for n-bit sources; only lengths with a schedule are served."""
    factory = _PIPELINE_PROFILES.get(n)
    if factory is None:
        raise ParameterError(f"no bit-fixing pipeline for n={n}; available: {sorted(_PIPELINE_PROFILES)}")
    return build_bitfix_pipeline(factory())
