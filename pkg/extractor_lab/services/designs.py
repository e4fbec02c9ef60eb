"""
Designs, weak designs and design-extractor graphs.

Every family is verified as part of its construction; artifacts loaded from
JSON are re-verified before use.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import get_config
from models.artifacts import DesignArtifact, DesignKind
from services.artifact_cache import get_artifact_cache
from services.bitcore import BitVector, GF2Field
from services.descriptors import ExtractorDescriptor
from services.errors import InfeasibleError, ParameterError, VerificationError

logger = logging.getLogger(__name__)


# Set families


@dataclass(frozen=True)
class Design:
    """(n, m, k, l)-design: m l-subsets of [n] with pairwise intersections ≤ k."""

    universe_size: int
    sets: Tuple[Tuple[int, ...], ...]
    intersection_bound: int
    set_size: int

    @property
    def m(self) -> int:
        return len(self.sets)

    def verify(self):
        for i, s in enumerate(self.sets):
            if len(s) != self.set_size or len(set(s)) != self.set_size:
                raise VerificationError(f"set {i} does not have {self.set_size} distinct elements")
            if any(e < 0 or e >= self.universe_size for e in s):
                raise VerificationError(f"set {i} leaves the universe [0, {self.universe_size})")
        masks = [_mask(s) for s in self.sets]
        for i in range(len(masks)):
            for j in range(i):
                overlap = (masks[i] & masks[j]).bit_count()
                if overlap > self.intersection_bound:
                    raise VerificationError(
                        f"|S_{i} ∩ S_{j}| = {overlap} exceeds bound {self.intersection_bound}"
                    )

    def to_artifact(self) -> DesignArtifact:
        return DesignArtifact(
            kind=DesignKind.DESIGN,
            params={"n": self.universe_size, "m": self.m, "k": self.intersection_bound, "l": self.set_size},
            sets=[list(s) for s in self.sets],
        ).sealed()


@dataclass(frozen=True)
class WeakDesign:
    """Sets S_1..S_m of size l over [d] with Σ_{j<i} 2^{|S_i ∩ S_j|} ≤ κ(m−1)."""

    universe_size: int
    sets: Tuple[Tuple[int, ...], ...]
    kappa: float
    set_size: int

    @property
    def m(self) -> int:
        return len(self.sets)

    def overlap_sums(self) -> List[int]:
        masks = [_mask(s) for s in self.sets]
        return [sum(1 << (masks[i] & masks[j]).bit_count() for j in range(i)) for i in range(len(masks))]

    def verify(self):
        for i, s in enumerate(self.sets):
            if len(s) != self.set_size or len(set(s)) != self.set_size:
                raise VerificationError(f"set {i} does not have {self.set_size} distinct elements")
            if any(e < 0 or e >= self.universe_size for e in s):
                raise VerificationError(f"set {i} leaves the universe [0, {self.universe_size})")
        bound = self.kappa * (self.m - 1)
        for i, total in enumerate(self.overlap_sums()):
            if total > bound + 1e-9:
                raise VerificationError(f"overlap sum {total} at set {i} exceeds κ(m−1) = {bound}")

    def to_artifact(self) -> DesignArtifact:
        return DesignArtifact(
            kind=DesignKind.WEAK_DESIGN,
            params={"d": self.universe_size, "m": self.m, "kappa": self.kappa, "l": self.set_size},
            sets=[list(s) for s in self.sets],
        ).sealed()


def _mask(elements: Iterable[int]) -> int:
    value = 0
    for e in elements:
        value |= 1 << e
    return value


def restrict(seed: Union[BitVector, int], positions: Sequence[int]) -> int:
    """seed|_S as an integer; the first listed position is the least-significant bit."""
    bits = seed.bits if isinstance(seed, BitVector) else seed
    value = 0
    for j, p in enumerate(positions):
        value |= ((bits >> p) & 1) << j
    return value


# Greedy lexicographic design search


def _first_compatible(n: int, l: int, k: int, chosen: List[Tuple[int, ...]], budget: int) -> Optional[Tuple[int, ...]]:
    """
    Lexicographically first l-subset of [n] meeting every chosen set in ≤ k points.

    Depth-first over sorted prefixes; a prefix is abandoned as soon as one
    intersection exceeds k or too few elements remain, so the first complete
    set reached is the first compatible set in lexicographic order.
    """
    containing: List[List[int]] = [[] for _ in range(n)]
    for j, s in enumerate(chosen):
        for e in s:
            containing[e].append(j)
    counts = [0] * len(chosen)
    path: List[int] = []
    candidate = 0
    nodes = 0
    while True:
        if len(path) == l:
            return tuple(path)
        placed = False
        last_start = n - (l - len(path))
        while candidate <= last_start:
            nodes += 1
            if nodes > budget:
                raise InfeasibleError(f"design search exceeded {budget} nodes")
            if all(counts[j] < k for j in containing[candidate]):
                for j in containing[candidate]:
                    counts[j] += 1
                path.append(candidate)
                candidate += 1
                placed = True
                break
            candidate += 1
        if not placed:
            if not path:
                return None
            last = path.pop()
            for j in containing[last]:
                counts[j] -= 1
            candidate = last + 1


def build_design(n: int, m: int, k: int, l: int) -> Design:
    """
    Greedy (n, m, k, l)-design.

    Args:
        n: Universe size
        m: Number of sets
        k: Intersection bound
        l: Set size

    Returns:
        A verified Design

    Raises:
        ParameterError: for impossible sizes
        InfeasibleError: when the greedy search runs out of candidates
    """
    if l < 0 or l > n or m < 0 or k < 0:
        raise ParameterError(f"invalid design parameters n={n}, m={m}, k={k}, l={l}")
    if not chernoff_feasible(n, m, k, l):
        logger.debug(f"design ({n},{m},{k},{l}) outside the probabilistic-existence regime; trying greedy anyway")
    budget = get_config().design_search_nodes
    sets: List[Tuple[int, ...]] = []
    for i in range(m):
        found = _first_compatible(n, l, k, sets, budget)
        if found is None:
            raise InfeasibleError(f"no {l}-subset of [{n}] meets the first {i} sets in at most {k} points")
        sets.append(found)
        logger.debug(f"design set {i}: {found[:8]}{'...' if l > 8 else ''}")
    design = Design(universe_size=n, sets=tuple(sets), intersection_bound=k, set_size=l)
    design.verify()
    return design


def chernoff_feasible(n: int, m: int, k: int, l: int) -> bool:
    """Sufficient condition for existence: α = k/l, n ≥ 10l/α and m < exp(αl/4)."""
    if l == 0 or k == 0:
        return m <= (n // max(l, 1))
    alpha = k / l
    return n >= 10 * l / alpha and m < math.exp(alpha * l / 4)


def get_design(n: int, m: int, k: int, l: int) -> Design:
    """Cached build_design; disk-mirrored artifacts are re-verified on load."""
    return get_artifact_cache().get_or_build(
        DesignKind.DESIGN.value,
        {"n": n, "m": m, "k": k, "l": l},
        lambda: build_design(n, m, k, l),
        dump=lambda d: d.to_artifact().model_dump(mode="json"),
        load=lambda data: load_design_artifact(DesignArtifact.model_validate(data)),
    )


# Prime-power fields for the polynomial weak design


def _smallest_prime_power_at_least(value: int) -> Tuple[int, int, int]:
    """(q, p, e) with q = p^e the smallest prime power ≥ value."""
    q = max(2, value)
    while True:
        for p in range(2, q + 1):
            if q % p == 0:
                e = 0
                r = q
                while r % p == 0:
                    r //= p
                    e += 1
                if r == 1:
                    return q, p, e
                break
        q += 1


class PrimePowerField:
    """F_q for q = p^e; elements are ints whose base-p digits are coefficients."""

    def __init__(self, p: int, e: int):
        self.p = p
        self.e = e
        self.q = p ** e
        self._binary = GF2Field.standard(e) if p == 2 else None
        self._modulus = None if p == 2 or e == 1 else self._find_modulus()

    def _digits(self, a: int) -> List[int]:
        return [(a // self.p ** i) % self.p for i in range(self.e)]

    def _from_digits(self, digits: Sequence[int]) -> int:
        return sum((c % self.p) * self.p ** i for i, c in enumerate(digits))

    def _find_modulus(self) -> List[int]:
        # monic degree-e polynomials over F_p, tested for factors of degree ≤ e/2
        for tail in range(self.p ** self.e):
            coeffs = [(tail // self.p ** i) % self.p for i in range(self.e)] + [1]
            if coeffs[0] == 0:
                continue
            if all(self._poly_remainder(coeffs, self._monic(deg, t)) for deg in range(1, self.e // 2 + 1)
                   for t in range(self.p ** deg)):
                return coeffs
        raise ParameterError(f"no irreducible polynomial of degree {self.e} over F_{self.p}")

    def _monic(self, degree: int, tail: int) -> List[int]:
        return [(tail // self.p ** i) % self.p for i in range(degree)] + [1]

    def _poly_remainder(self, a: List[int], b: List[int]) -> bool:
        """True if b does not divide a."""
        a = list(a)
        while len(a) >= len(b):
            factor = a[-1]
            shift = len(a) - len(b)
            for i, c in enumerate(b):
                a[shift + i] = (a[shift + i] - factor * c) % self.p
            a.pop()
            while a and a[-1] == 0:
                a.pop()
        return any(a)

    def add(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        if self.e == 1:
            return (a + b) % self.p
        return self._from_digits([x + y for x, y in zip(self._digits(a), self._digits(b))])

    def mul(self, a: int, b: int) -> int:
        if self._binary is not None:
            return self._binary.mul(a, b)
        if self.e == 1:
            return (a * b) % self.p
        da, db = self._digits(a), self._digits(b)
        prod = [0] * (2 * self.e - 1)
        for i, x in enumerate(da):
            for j, y in enumerate(db):
                prod[i + j] = (prod[i + j] + x * y) % self.p
        modulus = self._modulus
        for deg in range(len(prod) - 1, self.e - 1, -1):
            factor = prod[deg]
            if factor:
                for i, c in enumerate(modulus):
                    prod[deg - self.e + i] = (prod[deg - self.e + i] - factor * c) % self.p
        return self._from_digits(prod[:self.e])

    def evaluate(self, coeffs: Sequence[int], point: int) -> int:
        result = 0
        for c in reversed(coeffs):
            result = self.add(self.mul(result, point), c)
        return result


def _polynomial_graphs(field: PrimePowerField, q: int, width: int, l: int) -> Iterator[Tuple[int, ...]]:
    """Graphs {(a, p(a))} of polynomials of degree < l, in base-q coefficient order."""
    index = 0
    while True:
        coeffs = []
        t = index
        while True:
            coeffs.append(t % q)
            t //= q
            if t == 0:
                break
        if len(coeffs) > l:
            return
        yield tuple(a * width + field.evaluate(coeffs, a) for a in range(l))
        index += 1


def build_weak_design(m: int, kappa: float, l: int) -> WeakDesign:
    """
    Weak design with universe size d = ⌈l / ln κ⌉ · l.

    The universe is l blocks of width B = ⌈l / ln κ⌉; block a is indexed by the
    a-th point of F_q (q the smallest prime power ≥ l) and S_i is the graph
    {(a, p_i(a))} of the i-th polynomial. Positions ≥ q inside a block are
    unused. When q > B the blocks cannot hold a field and candidates are the
    l-subsets of [d] in lexicographic order instead. Either way a candidate is
    kept while the overlap sum of the new set stays within κ(m−1).
    """
    if kappa <= 1:
        raise ParameterError(f"kappa must exceed 1, got {kappa}")
    if m < 1 or l < 1:
        raise ParameterError(f"need m >= 1 and l >= 1, got m={m}, l={l}")
    width = math.ceil(l / math.log(kappa))
    d = width * l
    q, p, e = _smallest_prime_power_at_least(l)
    if q > width:
        logger.warning(f"field size {q} exceeds block width {width}; scanning {l}-subsets of [{d}]")
        candidates: Iterator[Tuple[int, ...]] = itertools.combinations(range(d), l)
        source = f"{l}-subsets of [{d}]"
    else:
        candidates = _polynomial_graphs(PrimePowerField(p, e), q, width, l)
        source = f"polynomials of degree < {l} over F_{q}"
    bound = kappa * (m - 1)
    budget = get_config().design_search_nodes

    sets: List[Tuple[int, ...]] = []
    masks: List[int] = []
    scanned = 0
    for s in candidates:
        if len(sets) == m:
            break
        if scanned >= budget:
            raise InfeasibleError(f"weak design search exceeded {budget} candidates")
        scanned += 1
        mask = _mask(s)
        total = sum(1 << (mask & other).bit_count() for other in masks)
        if total <= bound + 1e-9:
            sets.append(s)
            masks.append(mask)
    if len(sets) < m:
        raise InfeasibleError(f"ran out of {source} after {len(sets)} of {m} sets")

    design = WeakDesign(universe_size=d, sets=tuple(sets), kappa=kappa, set_size=l)
    design.verify()
    logger.debug(f"weak design m={m} κ={kappa} l={l}: d={d}, q={q}, candidates scanned={scanned}")
    return design


def get_weak_design(m: int, kappa: float, l: int) -> WeakDesign:
    return get_artifact_cache().get_or_build(
        DesignKind.WEAK_DESIGN.value,
        {"m": m, "kappa": kappa, "l": l},
        lambda: build_weak_design(m, kappa, l),
        dump=lambda d: d.to_artifact().model_dump(mode="json"),
        load=lambda data: load_design_artifact(DesignArtifact.model_validate(data)),
    )


# Design extractors


@dataclass(frozen=True)
class DesignExtractorGraph:
    """
    Bipartite graph from a strong extractor with its seed substituted into the output.

    Left vertex v has the D = 2^{d0} neighbors Γ(v) = {Ext(x_v, u) with the first
    d0 bits replaced by u}; right vertices are [M], M = 2^{m0}.
    """

    left_count: int
    right_count: int
    degree: int
    neighbors: Tuple[Tuple[int, ...], ...]
    alpha: float
    K: int
    eps: float
    left_labels: Tuple[int, ...] = ()
    base_name: str = ""

    def neighbor_masks(self) -> List[int]:
        return [_mask(nb) for nb in self.neighbors]

    def verify(self):
        limit = self.alpha * self.degree
        masks = self.neighbor_masks()
        for v, (nb, mask) in enumerate(zip(self.neighbors, masks)):
            if len(nb) != self.degree or mask.bit_count() != self.degree:
                raise VerificationError(f"left vertex {v} does not have {self.degree} distinct neighbors")
            if any(r < 0 or r >= self.right_count for r in nb):
                raise VerificationError(f"left vertex {v} has a neighbor outside [0, {self.right_count})")
        for u in range(len(masks)):
            for v in range(u):
                overlap = (masks[u] & masks[v]).bit_count()
                if overlap > limit + 1e-9:
                    raise VerificationError(f"|Γ({u}) ∩ Γ({v})| = {overlap} exceeds αD = {limit}")

    def to_artifact(self) -> DesignArtifact:
        return DesignArtifact(
            kind=DesignKind.DESIGN_EXTRACTOR,
            params={
                "N": self.left_count, "M": self.right_count, "D": self.degree,
                "alpha": self.alpha, "K": self.K, "eps": self.eps,
                "left_labels": list(self.left_labels), "base": self.base_name,
            },
            sets=[list(nb) for nb in self.neighbors],
        ).sealed()


def build_design_extractor(base: ExtractorDescriptor, alpha: float, K: int,
                           target: Optional[int] = None, eps: float = 0.25) -> DesignExtractorGraph:
    """
    Greedy design extractor over the 2^{n0} candidates of a strong extractor.

    Candidates are visited in increasing order; a candidate survives when its
    neighborhood meets every earlier survivor's in at most αD vertices, which
    is the same as keeping a vertex and deleting every later violator.

    Args:
        base: Strong extractor with seed length d0 ≤ m0
        alpha: Overlap fraction α
        K: Extractor-property bound on |Bad_S|
        target: Requested survivor count N; None keeps every survivor
        eps: Accuracy ε of the extractor property

    Raises:
        ParameterError: base output shorter than its seed, or too many candidates
        InfeasibleError: fewer than `target` survivors
    """
    n0, d0, m0 = base.n, base.d, base.m
    if m0 < d0:
        raise ParameterError(f"base output ({m0} bits) shorter than its seed ({d0} bits)")
    if n0 > 16:
        raise ParameterError(f"2^{n0} candidates is beyond desk scale")
    degree = 1 << d0
    limit = alpha * degree
    head = (1 << d0) - 1

    survivors: List[int] = []
    survivor_masks: List[int] = []
    neighbor_lists: List[Tuple[int, ...]] = []
    for label in range(1 << n0):
        x = BitVector(n0, label)
        nb = tuple(
            (base(x, BitVector(d0, u)).bits & ~head) | u
            for u in range(degree)
        )
        mask = _mask(nb)
        if all((mask & other).bit_count() <= limit + 1e-9 for other in survivor_masks):
            survivors.append(label)
            survivor_masks.append(mask)
            neighbor_lists.append(nb)
            if target is not None and len(survivors) == target:
                break

    if target is not None and len(survivors) < target:
        raise InfeasibleError(f"only {len(survivors)} of the requested {target} left vertices survive")

    graph = DesignExtractorGraph(
        left_count=len(survivors),
        right_count=1 << m0,
        degree=degree,
        neighbors=tuple(neighbor_lists),
        alpha=alpha,
        K=K,
        eps=eps,
        left_labels=tuple(survivors),
        base_name=base.name,
    )
    graph.verify()
    logger.info(f"design extractor: {len(survivors)} of {1 << n0} candidates survive (α={alpha}, D={degree})")
    return graph


def verify_extractor_property(g: DesignExtractorGraph, S: Iterable[int]) -> int:
    """|Bad_S|: left vertices whose neighbor density in S differs from |S|/M by more than ε."""
    s_mask = 0
    for r in S:
        if r < 0 or r >= g.right_count:
            raise ParameterError(f"right vertex {r} outside [0, {g.right_count})")
        s_mask |= 1 << r
    rho_s = s_mask.bit_count() / g.right_count
    bad = 0
    for mask in g.neighbor_masks():
        rho_v = (mask & s_mask).bit_count() / g.degree
        if abs(rho_v - rho_s) > g.eps + 1e-12:
            bad += 1
    return bad


@dataclass
class ExtractorPropertyReport:
    max_bad: int
    K: int
    holds: bool
    subsets_tested: int
    bad_counts: List[int] = field(default_factory=list)


def sample_extractor_property(g: DesignExtractorGraph, rng: np.random.Generator,
                              samples: int = 256) -> ExtractorPropertyReport:
    """Bad_S recount on the two trivial subsets plus `samples` random right-subsets."""
    subsets: List[List[int]] = [[], list(range(g.right_count))]
    for _ in range(samples):
        chosen = rng.random(g.right_count) < 0.5
        subsets.append([int(r) for r in np.flatnonzero(chosen)])
    counts = [verify_extractor_property(g, s) for s in subsets]
    worst = max(counts)
    return ExtractorPropertyReport(max_bad=worst, K=g.K, holds=worst <= g.K,
                                   subsets_tested=len(subsets), bad_counts=counts)


# Artifact loading


def load_design_artifact(artifact: DesignArtifact):
    """Rebuild a family from its artifact, checking the hash and re-verifying every bound."""
    if artifact.content_hash is not None and artifact.content_hash != artifact.compute_hash():
        raise VerificationError("artifact content hash does not match its payload")
    params: Dict = artifact.params
    sets = tuple(tuple(s) for s in artifact.sets)
    if artifact.kind == DesignKind.DESIGN:
        family = Design(universe_size=params["n"], sets=sets, intersection_bound=params["k"], set_size=params["l"])
    elif artifact.kind == DesignKind.WEAK_DESIGN:
        family = WeakDesign(universe_size=params["d"], sets=sets, kappa=params["kappa"], set_size=params["l"])
    else:
        family = DesignExtractorGraph(
            left_count=params["N"], right_count=params["M"], degree=params["D"], neighbors=sets,
            alpha=params["alpha"], K=params["K"], eps=params["eps"],
            left_labels=tuple(params.get("left_labels", ())), base_name=params.get("base", ""),
        )
        if len(sets) != family.left_count:
            raise VerificationError(f"artifact lists {len(sets)} neighborhoods for N={family.left_count}")
    family.verify()
    return family
