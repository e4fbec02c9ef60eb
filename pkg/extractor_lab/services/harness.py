"""
Exact and Monte-Carlo measurement.

Explicit distributions are sparse tables (outcome array plus probability
array). Exact quantities are computed only within the configured table and
enumeration budgets; beyond them the sampled estimators apply, and every
estimate carries its standard error.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from config import PRNG_VERSION, get_config
from services.bitcore import BitVector, apply_columns, apply_columns_array, gf2_rank
from services.descriptors import ExtractorDescriptor
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """numpy PCG64 seeded from `seed` or LAB_PRNG_SEED."""
    return np.random.default_rng(get_config().prng_seed if seed is None else seed)


def prng_record(seed: Optional[int] = None) -> Dict[str, Any]:
    return {"prng": PRNG_VERSION, "seed": get_config().prng_seed if seed is None else seed}


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float
    trials: int

    def upper(self, k: float = 3.0) -> float:
        return self.value + k * self.sigma

    def to_dict(self) -> Dict[str, float]:
        return {"value": self.value, "sigma": self.sigma, "trials": self.trials}


def _outcome_dtype(length: int):
    return np.uint64 if length <= 64 else object


# Distributions


@dataclass
class FiniteDistribution:
    """
    Explicit table over `length`-bit outcomes; outcomes are unique, probabilities sum to 1.

    meta records how the table was made (e.g. the basis of an affine source).
    """

    length: int
    outcomes: np.ndarray
    probs: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.outcomes.shape != self.probs.shape:
            raise LengthMismatchError("outcome and probability arrays differ in shape")
        if self.outcomes.size > get_config().table_cap:
            raise BudgetExceededError(f"{self.outcomes.size} outcomes exceed the table cap {get_config().table_cap}")
        if self.outcomes.size == 0:
            raise ParameterError("a distribution needs a non-empty support")
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_weights(cls, length: int, outcomes: Sequence[int], weights: Sequence[float],
                     meta: Optional[Dict[str, Any]] = None) -> "FiniteDistribution":
        """Merge repeated outcomes and normalize the weights."""
        weights = np.asarray(weights, dtype=float)
        if weights.sum() <= 0:
            raise ParameterError("weights must have positive total")
        table: Dict[int, float] = {}
        for o, w in zip(outcomes, weights):
            o = int(o)
            if o < 0 or o >= 1 << length:
                raise ParameterError(f"outcome {o} does not fit in {length} bits")
            table[o] = table.get(o, 0.0) + float(w)
        keys = sorted(table)
        probs = np.array([table[o] for o in keys]) / weights.sum()
        probs /= probs.sum()
        return cls(length, np.array(keys, dtype=_outcome_dtype(length)), probs, dict(meta or {}))

    @classmethod
    def from_table(cls, length: int, table: Dict[int, float]) -> "FiniteDistribution":
        return cls.from_weights(length, list(table), list(table.values()))

    @classmethod
    def uniform_over(cls, length: int, outcomes: Sequence[int],
                     meta: Optional[Dict[str, Any]] = None) -> "FiniteDistribution":
        outcomes = sorted({int(o) for o in outcomes})
        return cls.from_weights(length, outcomes, np.ones(len(outcomes)), meta)

    @classmethod
    def uniform(cls, length: int) -> "FiniteDistribution":
        if 1 << length > get_config().table_cap:
            raise BudgetExceededError(f"uniform table on {length} bits exceeds the table cap")
        size = 1 << length
        return cls(length, np.arange(size, dtype=_outcome_dtype(length)), np.full(size, 1.0 / size))

    @classmethod
    def point(cls, length: int, value: int) -> "FiniteDistribution":
        return cls(length, np.array([value], dtype=_outcome_dtype(length)), np.array([1.0]))

    @property
    def support_size(self) -> int:
        return int(self.outcomes.size)

    def as_dict(self) -> Dict[int, float]:
        return {int(o): float(p) for o, p in zip(self.outcomes, self.probs)}

    def probability(self, value: int) -> float:
        return self.as_dict().get(int(value), 0.0)

    def push_forward(self, f: Callable[[int], int], length: int) -> "FiniteDistribution":
        """Distribution of f(X)."""
        return FiniteDistribution.from_weights(length, [f(int(o)) for o in self.outcomes], self.probs)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.outcomes, size=size, p=self.probs)


@dataclass
class SampledDistribution:
    """Distribution known only through a draw function, with a trial budget."""

    length: int
    draw: Callable[[np.random.Generator, int], np.ndarray]
    budget: int = 100_000

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size > self.budget:
            raise BudgetExceededError(f"{size} draws exceed the trial budget {self.budget}")
        return self.draw(rng, size)


Distribution = Union[FiniteDistribution, SampledDistribution]


def random_distribution(length: int, rng: np.random.Generator, support: Optional[int] = None) -> FiniteDistribution:
    """Dirichlet-weighted table on `support` random outcomes (the full cube by default)."""
    size = 1 << length
    support = size if support is None else min(support, size)
    outcomes = rng.choice(size, size=support, replace=False)
    return FiniteDistribution.from_weights(length, outcomes, rng.dirichlet(np.ones(support)))


# Exact quantities


def statistical_distance(p: Distribution, q: Distribution) -> float:
    """(1/2) Σ |P(a) − Q(a)| over explicit tables."""
    if not isinstance(p, FiniteDistribution) or not isinstance(q, FiniteDistribution):
        raise ParameterError("statistical_distance needs explicit tables; use estimate_sd for sampled inputs")
    if p.length != q.length:
        raise LengthMismatchError(f"outcome lengths differ: {p.length} vs {q.length}")
    if p.outcomes.dtype != object and q.outcomes.dtype != object:
        keys = np.concatenate([p.outcomes, q.outcomes])
        signed = np.concatenate([p.probs, -q.probs])
        _, inverse = np.unique(keys, return_inverse=True)
        diff = np.bincount(inverse.ravel(), weights=signed)
        return float(0.5 * np.abs(diff).sum())
    a, b = p.as_dict(), q.as_dict()
    return 0.5 * sum(abs(a.get(o, 0.0) - b.get(o, 0.0)) for o in set(a) | set(b))


def sd_from_uniform(outcomes: np.ndarray, probs: np.ndarray, length: int) -> float:
    """SD of a sparse table from U_length without materializing 2^length cells."""
    uniform = 2.0 ** -length
    if outcomes.dtype != object:
        _, inverse = np.unique(outcomes, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=probs)
    else:
        table: Dict[int, float] = {}
        for o, p in zip(outcomes, probs):
            table[int(o)] = table.get(int(o), 0.0) + float(p)
        merged = np.array(list(table.values()))
    missing = 2.0 ** length - merged.size
    return float(0.5 * (np.abs(merged - uniform).sum() + missing * uniform))


def min_entropy(p: FiniteDistribution) -> float:
    return float(-math.log2(p.probs.max()))


def collision_probability(p: FiniteDistribution) -> float:
    return float(np.square(p.probs).sum())


def collision_entropy(p: FiniteDistribution) -> float:
    return float(-math.log2(collision_probability(p)))


# Estimators


def estimate_collision(sample: Callable[[np.random.Generator, int], np.ndarray], trials: int,
                       rng: np.random.Generator) -> Estimate:
    """Pr[X1 = X2] from `trials` independent pairs."""
    a = np.asarray(sample(rng, trials))
    b = np.asarray(sample(rng, trials))
    hits = int(np.count_nonzero(a == b))
    value = hits / trials
    sigma = math.sqrt(max(value * (1 - value), 1.0 / trials) / trials)
    return Estimate(value=value, sigma=sigma, trials=trials)


def estimate_sd(p: Distribution, q: Distribution, trials: int, rng: np.random.Generator) -> Estimate:
    """
    Plug-in SD between empirical tables of `trials` draws (explicit tables are used exactly).

    sigma = (1/2)·sqrt(K/trials) with K the observed support, the usual scale
    of the L1 error of an empirical table.
    """
    if p.length != q.length:
        raise LengthMismatchError(f"outcome lengths differ: {p.length} vs {q.length}")

    def empirical(d: Distribution) -> FiniteDistribution:
        if isinstance(d, FiniteDistribution):
            return d
        draws = np.asarray(d.sample(rng, trials))
        values, counts = np.unique(draws, return_counts=True)
        return FiniteDistribution.from_weights(d.length, values.tolist(), counts)

    ep, eq = empirical(p), empirical(q)
    value = statistical_distance(ep, eq)
    support = len(set(ep.as_dict()) | set(eq.as_dict()))
    return Estimate(value=value, sigma=0.5 * math.sqrt(support / trials), trials=trials)


# XOR convolution over GF(2)^m


def _walsh_hadamard(vec: np.ndarray) -> np.ndarray:
    out = np.array(vec, dtype=float)
    h = 1
    while h < out.size:
        out = out.reshape(-1, 2 * h)
        left, right = out[:, :h].copy(), out[:, h:].copy()
        out[:, :h], out[:, h:] = left + right, left - right
        out = out.reshape(-1)
        h *= 2
    return out


def xor_convolution(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Law of X ⊕ Y for independent X ~ p, Y ~ q given as dense vectors over 2^m outcomes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.size & (p.size - 1):
        raise LengthMismatchError("XOR convolution needs two vectors of one power-of-two length")
    return _walsh_hadamard(_walsh_hadamard(p) * _walsh_hadamard(q)) / p.size


def xor_convolve_many(dists: Sequence[np.ndarray]) -> np.ndarray:
    if not dists:
        raise LengthMismatchError("need at least one distribution")
    out = np.asarray(dists[0], dtype=float)
    for d in dists[1:]:
        out = xor_convolution(out, d)
    return out


def dense_sd_from_uniform(vec: np.ndarray) -> float:
    vec = np.asarray(vec, dtype=float)
    return float(0.5 * np.abs(vec - 1.0 / vec.size).sum())


# Locality


@dataclass
class LocalityReport:
    """Per-output-bit dependency counts for one seed, cross-checked against footprints when present."""

    counts: List[int]
    max_locality: int
    seed: str
    trials: int
    footprint_counts: Optional[List[int]] = None
    consistent: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "counts": self.counts, "max": self.max_locality, "seed": self.seed, "trials": self.trials,
            "footprint_counts": self.footprint_counts, "consistent": self.consistent,
        }


def locality_audit(ext: ExtractorDescriptor, seed: BitVector, trials: int = 8,
                   rng: Optional[np.random.Generator] = None) -> LocalityReport:
    """
    Position i is a dependency of output j if toggling x_i flips bit j in some trial.

    Affine extractors need one trial at x = 0, which is exact.
    """
    rng = rng or make_rng()
    dependencies = [0] * ext.m
    if ext.affine:
        points = [BitVector.zeros(ext.n)]
    else:
        points = [BitVector.random(ext.n, rng) for _ in range(max(1, trials))]
    for x in points:
        base = ext(x, seed).bits
        for i in range(ext.n):
            flipped = base ^ ext(x.flip(i), seed).bits
            j = 0
            while flipped:
                if flipped & 1:
                    dependencies[j] |= 1 << i
                flipped >>= 1
                j += 1
    counts = [dep.bit_count() for dep in dependencies]
    report = LocalityReport(counts=counts, max_locality=max(counts, default=0),
                            seed=seed.to_hex(), trials=len(points))
    if ext.footprints is not None:
        report.footprint_counts = [row.bit_count() for row in ext.footprints(seed)]
        report.consistent = report.footprint_counts == counts
        if not report.consistent:
            logger.warning(f"{ext.name}: toggling audit disagrees with footprints at seed {seed.to_hex()}")
    return report


# Sources


def _random_distinct(n: int, count: int, rng: np.random.Generator) -> List[int]:
    chosen = set()
    while len(chosen) < count:
        chosen.add(BitVector.random(n, rng).bits)
    return sorted(chosen)


def _random_basis(n: int, k: int, rng: np.random.Generator) -> List[int]:
    basis: List[int] = []
    while len(basis) < k:
        v = BitVector.random(n, rng).bits
        if gf2_rank(basis + [v]) == len(basis) + 1:
            basis.append(v)
    return basis


def affine_span(basis: Sequence[int], offset: int = 0) -> List[int]:
    points = [offset]
    for b in basis:
        points += [p ^ b for p in points]
    return points


def make_source(kind: str, params: Dict[str, Any], rng: Optional[np.random.Generator] = None) -> FiniteDistribution:
    """
    Exact source tables.

    kinds:
        "flat": n, k and optional `support`; uniform on 2^k distinct strings
        "bit_fixing": n, free (positions), fixed (packed values)
        "affine": n, k and optional basis/offset; uniform on a coset of a k-dim subspace

    Raises:
        BudgetExceededError: more than the table cap of outcomes
    """
    rng = rng or make_rng()
    cap = get_config().table_cap
    n = params["n"]
    if kind == "flat":
        k = params["k"]
        if k > n or (1 << k) > cap:
            raise BudgetExceededError(f"flat source with 2^{k} outcomes exceeds the table cap")
        support = params.get("support") or _random_distinct(n, 1 << k, rng)
        return FiniteDistribution.uniform_over(n, support, {"kind": "flat", "k": k})
    if kind == "bit_fixing":
        free = list(params.get("free", []))
        if (1 << len(free)) > cap:
            raise BudgetExceededError(f"bit-fixing source with 2^{len(free)} outcomes exceeds the table cap")
        free_mask = sum(1 << p for p in free)
        fixed = int(params.get("fixed", 0)) & ~free_mask
        basis = [1 << p for p in free]
        return FiniteDistribution.uniform_over(n, affine_span(basis, fixed),
                                               {"kind": "bit_fixing", "basis": basis, "offset": fixed})
    if kind == "affine":
        basis = list(params.get("basis") or _random_basis(n, params["k"], rng))
        if gf2_rank(basis) != len(basis):
            raise ParameterError("affine basis vectors are linearly dependent")
        if (1 << len(basis)) > cap:
            raise BudgetExceededError(f"affine source with 2^{len(basis)} outcomes exceeds the table cap")
        offset = int(params.get("offset", BitVector.random(n, rng).bits))
        return FiniteDistribution.uniform_over(n, affine_span(basis, offset),
                                               {"kind": "affine", "basis": basis, "offset": offset})
    raise ParameterError(f"unknown source kind {kind!r}")


# Extractor error


def _seed_sd(ext: ExtractorDescriptor, seed: BitVector, source: FiniteDistribution) -> float:
    if ext.m == 0:
        return 0.0
    if ext.affine and ext.n <= 64 and ext.m <= 63 and source.outcomes.dtype != object:
        outputs = apply_columns_array(ext.matrix(seed), source.outcomes) ^ np.uint64(ext.offset(seed))
        if ext.m <= 20:
            table = np.bincount(outputs.astype(np.int64), weights=source.probs, minlength=1 << ext.m)
            return dense_sd_from_uniform(table)
        return sd_from_uniform(outputs, source.probs, ext.m)
    outputs = np.array([ext(BitVector(ext.n, int(o)), seed).bits for o in source.outcomes],
                       dtype=_outcome_dtype(ext.m))
    return sd_from_uniform(outputs, source.probs, ext.m)


def extractor_error_exact(ext: ExtractorDescriptor, source: FiniteDistribution) -> float:
    """
    SD of (U_d, Ext(X, U_d)) from (U_d, U_m), i.e. the mean over seeds of the per-seed SD.

    Raises:
        BudgetExceededError: 2^d · |support| beyond the exact budget
    """
    if source.length != ext.n:
        raise LengthMismatchError(f"extractor reads {ext.n} bits, source has {source.length}")
    work = (1 << ext.d) * source.support_size
    budget = get_config().exact_budget
    if work > budget:
        raise BudgetExceededError(f"2^{ext.d} seeds × {source.support_size} outcomes exceed the exact budget {budget}")
    total = 0.0
    for u in range(1 << ext.d):
        total += _seed_sd(ext, BitVector(ext.d, u), source)
    return total / (1 << ext.d)


def linear_affine_sd(columns: Sequence[int], basis: Sequence[int], m: int) -> float:
    """Per-seed SD of an affine map on an affine source: its image is a coset of dimension rank(M·B)."""
    images = [apply_columns(columns, b) for b in basis]
    return 1.0 - 2.0 ** (gf2_rank(images) - m)


def seed_error(ext: ExtractorDescriptor, seed: BitVector, source: FiniteDistribution) -> float:
    """Exact SD of Ext(X, seed) from U_m, by the rank formula on affine sources."""
    if ext.affine and source.meta.get("basis") is not None:
        return linear_affine_sd(ext.matrix(seed), source.meta["basis"], ext.m)
    return _seed_sd(ext, seed, source)


def extractor_error_sampled(ext: ExtractorDescriptor, source: FiniteDistribution, seeds: int,
                            rng: np.random.Generator) -> Estimate:
    """Exact per-seed SD averaged over `seeds` uniformly sampled seeds."""
    if source.length != ext.n:
        raise LengthMismatchError(f"extractor reads {ext.n} bits, source has {source.length}")
    values = np.array([seed_error(ext, BitVector.random(ext.d, rng), source) for _ in range(seeds)])
    sigma = float(values.std(ddof=1) / math.sqrt(seeds)) if seeds > 1 else 1.0
    return Estimate(value=float(values.mean()), sigma=sigma, trials=seeds)
