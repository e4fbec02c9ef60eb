"""
Samplers built from extractors and expander walks, and source sampling.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from services.bitcore import BitVector, select_bits
from models.artifacts import ConstructionNode
from services.descriptors import ExtractorDescriptor, build_from_node
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError
from services.expander import ExpanderGraph, MGGGraph, mgg_for_bits, powered_graph, random_walk

logger = logging.getLogger(__name__)


@dataclass
class SamplerDescriptor:
    """
    Seeded index sampler: seed of r bits → t indices in [universe).

    params holds the certified or claimed guarantees: (mu1, mu2, gamma) for
    averaging samplers, (eps, gamma) for oblivious ones. recipe is the JSON
    form sampler_from_recipe rebuilds from; None when the sampler wraps a
    caller-supplied graph.
    """

    name: str
    seed_length: int
    sample_count: int
    universe: int
    produce: Callable[[BitVector], List[int]]
    distinct: bool = False
    params: Dict[str, Any] = field(default_factory=dict)
    recipe: Optional[Dict[str, Any]] = None

    def __call__(self, seed: BitVector) -> List[int]:
        if seed.length != self.seed_length:
            raise LengthMismatchError(f"{self.name}: seed has {seed.length} bits, expected {self.seed_length}")
        samples = self.produce(seed)
        if len(samples) != self.sample_count:
            raise LengthMismatchError(f"{self.name}: produced {len(samples)} samples, expected {self.sample_count}")
        return samples


def oblivious_from_extractor(ext: ExtractorDescriptor) -> SamplerDescriptor:
    """
    Samples of seed x are {ext(x, u) : u ∈ {0,1}^d}, t = 2^d, universe 2^m.

    A (k, ε) extractor gives accuracy ε with at most 2^{k+1} bad seeds out of 2^n.
    """
    if ext.seed_embedding is None:
        raise ParameterError(f"{ext.name} does not embed its seed; samples would not be distinct")
    if ext.d > 20:
        raise ParameterError(f"2^{ext.d} samples per seed is beyond desk scale")

    def produce(x: BitVector) -> List[int]:
        return [ext(x, BitVector(ext.d, u)).bits for u in range(1 << ext.d)]

    return SamplerDescriptor(
        name=f"oblivious[{ext.name}]",
        seed_length=ext.n,
        sample_count=1 << ext.d,
        universe=1 << ext.m,
        produce=produce,
        distinct=True,
        params={"eps": ext.eps_claim, "gamma": min(1.0, 2.0 ** (ext.k_claim + 1 - ext.n))},
        recipe={"kind": "oblivious", "extractor": ext.to_node().model_dump()},
    )


def averaging_from_oblivious(s: SamplerDescriptor, mu: float, alpha: float) -> SamplerDescriptor:
    """
    Relabel an oblivious sampler with accuracy ε as a (μ, αμ, γ) averaging sampler.

    Requires ε ≤ (1 − α)μ: a sample average below αμ on a function of mean ≥ μ
    is an accuracy failure.
    """
    if not 0 < mu <= 1:
        raise ParameterError(f"mu must lie in (0, 1], got {mu}")
    if not 0 <= alpha < 1:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    eps = (1 - alpha) * mu
    available = s.params.get("eps")
    if available is None or available > eps + 1e-12:
        raise ParameterError(f"sampler accuracy {available} exceeds (1 − α)μ = {eps}")
    params = dict(s.params)
    params.update({"mu1": mu, "mu2": alpha * mu, "alpha": alpha, "eps": eps})
    return SamplerDescriptor(
        name=f"averaging[{s.name}]",
        seed_length=s.seed_length,
        sample_count=s.sample_count,
        universe=s.universe,
        produce=s.produce,
        distinct=s.distinct,
        params=params,
        recipe=None if s.recipe is None else {"kind": "averaging", "base": s.recipe, "mu": mu, "alpha": alpha},
    )


def expander_walk_sampler(universe: int, t: int, power: int = 1,
                          graph: Optional[ExpanderGraph] = None) -> SamplerDescriptor:
    """
    t vertices of a walk on an MGG over 2^r labels, r = ⌈log₂ universe⌉, read modulo the universe.

    Seed: start label (r bits) then coins for t−1 steps.
    """
    if universe < 2 or t < 1:
        raise ParameterError(f"need universe >= 2 and t >= 1, got {universe}, {t}")
    r = max(2, math.ceil(math.log2(universe)))
    base = graph or mgg_for_bits(r)
    walk_graph = powered_graph(base, power)
    label_mask = (1 << r) - 1
    coin_bits = walk_graph.coin_bits * (t - 1)

    def label(v: int) -> int:
        return (base.label(v) if isinstance(base, MGGGraph) else v) & label_mask

    def produce(seed: BitVector) -> List[int]:
        start = seed.bits & label_mask
        coins = BitVector(coin_bits, seed.bits >> r)
        vertices = random_walk(walk_graph, start % walk_graph.num_vertices, t - 1, coins).vertices
        return [label(v) % universe for v in vertices]

    return SamplerDescriptor(
        name="expander_walk",
        seed_length=r + coin_bits,
        sample_count=t,
        universe=universe,
        produce=produce,
        distinct=False,
        params={"lambda": walk_graph.lambda_bound, "power": power, "r": r},
        recipe=None if graph is not None else {"kind": "expander_walk", "universe": universe, "t": t, "power": power},
    )


def fixed_sampler(positions: Sequence[int], universe: int) -> SamplerDescriptor:
    """Seedless sampler always returning `positions`."""
    positions = list(positions)
    if any(p < 0 or p >= universe for p in positions):
        raise ParameterError(f"positions must lie in [0, {universe})")
    return SamplerDescriptor(
        name="fixed",
        seed_length=0,
        sample_count=len(positions),
        universe=universe,
        produce=lambda seed: list(positions),
        distinct=len(set(positions)) == len(positions),
        recipe={"kind": "fixed", "positions": positions, "universe": universe},
    )


def identity_sampler(n: int) -> SamplerDescriptor:
    return fixed_sampler(range(n), n)


def sampler_from_recipe(recipe: Optional[Dict[str, Any]]) -> SamplerDescriptor:
    """Rebuild a sampler from its recipe."""
    if recipe is None:
        raise ParameterError("sampler has no recipe; samplers over a supplied graph cannot be rebuilt")
    kind = recipe.get("kind")
    if kind == "expander_walk":
        return expander_walk_sampler(recipe["universe"], recipe["t"], recipe.get("power", 1))
    if kind == "fixed":
        return fixed_sampler(recipe["positions"], recipe["universe"])
    if kind == "oblivious":
        return oblivious_from_extractor(build_from_node(ConstructionNode.model_validate(recipe["extractor"])))
    if kind == "averaging":
        return averaging_from_oblivious(sampler_from_recipe(recipe["base"]), recipe["mu"], recipe["alpha"])
    raise ParameterError(f"unknown sampler kind {kind!r}")


def sample_source(x: BitVector, s: SamplerDescriptor, seed: BitVector) -> BitVector:
    """x restricted to the sampled positions, in sampler order."""
    if s.universe > x.length:
        raise LengthMismatchError(f"sampler universe {s.universe} exceeds source length {x.length}")
    return select_bits(x, s(seed))


def sample_block_source(x: BitVector, s: SamplerDescriptor, seeds: Sequence[BitVector]) -> List[BitVector]:
    """One sub-source per seed; blocks may overlap."""
    return [sample_source(x, s, seed) for seed in seeds]


@dataclass
class SamplerCertificate:
    """Monte-Carlo estimate of the fraction of seeds whose sample average misses."""

    failure_rate: float
    sigma: float
    trials: int
    threshold: float
    true_mean: float


def certify_averaging(s: SamplerDescriptor, f: np.ndarray, threshold: float,
                      rng: np.random.Generator, trials: int = 2000) -> SamplerCertificate:
    """
    Fraction of random seeds whose sample average of f falls below `threshold`.

    f is an array of values in [0, 1] over the universe.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != s.universe:
        raise LengthMismatchError(f"function over {f.shape[0]} points, sampler universe is {s.universe}")
    failures = 0
    for _ in range(trials):
        seed = BitVector.random(s.seed_length, rng)
        if f[s(seed)].mean() < threshold:
            failures += 1
    rate = failures / trials
    return SamplerCertificate(
        failure_rate=rate,
        sigma=math.sqrt(max(rate * (1 - rate), 1 / trials) / trials),
        trials=trials,
        threshold=threshold,
        true_mean=float(f.mean()),
    )


def deviation_rate(s: SamplerDescriptor, f: np.ndarray, accuracy: float,
                   rng: np.random.Generator, trials: int = 2000) -> SamplerCertificate:
    """Fraction of random seeds with |sample average − E f| > accuracy (oblivious-sampler failure)."""
    f = np.asarray(f, dtype=float)
    mean = float(f.mean())
    failures = 0
    for _ in range(trials):
        seed = BitVector.random(s.seed_length, rng)
        if abs(f[s(seed)].mean() - mean) > accuracy:
            failures += 1
    rate = failures / trials
    return SamplerCertificate(
        failure_rate=rate,
        sigma=math.sqrt(max(rate * (1 - rate), 1 / trials) / trials),
        trials=trials,
        threshold=accuracy,
        true_mean=mean,
    )


@dataclass
class SampledEntropyReport:
    """Exact per-seed min-entropy of a bit-fixing source restricted to the samples."""

    delta: float
    tau: float
    threshold: float
    good_fraction: float
    seeds: int
    entropy_counts: List[int]


def sampled_entropy_profile(s: SamplerDescriptor, free: Sequence[int], n: int,
                            tau: Optional[float] = None, max_seed_bits: int = 16) -> SampledEntropyReport:
    """
    Enumerate every seed and count the distinct free positions it samples.

    For a bit-fixing source that count is exactly the min-entropy of the
    sampled bits. A seed is good when it reaches (δ − 3τ)t, δ = |free|/n,
    τ = δ/4 unless given.
    """
    if s.universe > n:
        raise LengthMismatchError(f"sampler universe {s.universe} exceeds source length {n}")
    free_set = set(free)
    if any(p < 0 or p >= n for p in free_set):
        raise ParameterError(f"free positions must lie in [0, {n})")
    if s.seed_length > max_seed_bits:
        raise BudgetExceededError(f"2^{s.seed_length} seeds exceed the enumeration cap 2^{max_seed_bits}")
    delta = len(free_set) / n
    tau = delta / 4 if tau is None else tau
    threshold = (delta - 3 * tau) * s.sample_count
    entropies = np.array([
        len(free_set.intersection(s(BitVector(s.seed_length, seed))))
        for seed in range(1 << s.seed_length)
    ])
    good = float(np.mean(entropies >= threshold - 1e-12))
    logger.debug(f"{s.name}: {good:.4f} of seeds reach sampled entropy {threshold:.3f}")
    return SampledEntropyReport(
        delta=delta,
        tau=tau,
        threshold=threshold,
        good_fraction=good,
        seeds=len(entropies),
        entropy_counts=np.bincount(entropies, minlength=s.sample_count + 1).tolist(),
    )
