"""
Extractor descriptors and construction trees.

Every construction in the lab produces an ExtractorDescriptor: its lengths,
its claims, and an evaluation procedure. Descriptors of affine constructions
(output = M_seed·x ⊕ c_seed) also expose the per-seed GF(2) map, which is what
exact measurements and locality audits consume.
"""

import importlib
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from models.artifacts import ConstructionNode
from services.bitcore import BitVector, columns_to_rows
from services.errors import LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)

Evaluate = Callable[[BitVector, BitVector], BitVector]


@dataclass
class ExtractorDescriptor:
    """
    Seeded function {0,1}^n × {0,1}^d → {0,1}^m with its claims.

    Attributes:
        name: Construction name, also the registry key for rebuilding
        n, d, m: Source, seed and output lengths
        k_claim: Min-entropy the claim is stated for
        eps_claim: Claimed error
        locality_claim: Bound on the input bits any output bit reads
        evaluate: The evaluation procedure
        affine: Output is M_seed·x ⊕ c_seed for every fixed seed
        linear: Affine with c_seed = 0
        seed_embedding: None, "head", "tail" or "prefix"
        params: JSON-serializable build parameters
        children: Inner descriptors of composed constructions
        footprints: Optional per-seed row functionals (one int per output bit)
        columns: Optional per-seed fast column map (one int per input bit)
    """

    name: str
    n: int
    d: int
    m: int
    k_claim: float
    eps_claim: float
    locality_claim: int
    evaluate: Evaluate
    affine: bool = False
    linear: bool = False
    seed_embedding: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)
    children: List["ExtractorDescriptor"] = field(default_factory=list)
    footprints: Optional[Callable[[BitVector], List[int]]] = None
    columns: Optional[Callable[[BitVector], List[int]]] = None

    def __post_init__(self):
        if self.linear:
            self.affine = True

    def __call__(self, x: BitVector, seed: BitVector) -> BitVector:
        if x.length != self.n:
            raise LengthMismatchError(f"{self.name}: source has {x.length} bits, expected {self.n}")
        if seed.length != self.d:
            raise LengthMismatchError(f"{self.name}: seed has {seed.length} bits, expected {self.d}")
        out = self.evaluate(x, seed)
        if out.length != self.m:
            raise LengthMismatchError(f"{self.name}: produced {out.length} bits, expected {self.m}")
        return out

    def offset(self, seed: BitVector) -> int:
        """c_seed as a packed int."""
        if not self.affine:
            raise ParameterError(f"{self.name} is not affine in x")
        if self.linear:
            return 0
        return self(BitVector.zeros(self.n), seed).bits

    def matrix(self, seed: BitVector) -> List[int]:
        """Columns of M_seed: entry i is the image of e_i (m-bit packed int)."""
        if not self.affine:
            raise ParameterError(f"{self.name} is not affine in x")
        if self.columns is not None:
            return self.columns(seed)
        if self.footprints is not None:
            rows = self.footprints(seed)
            cols = [0] * self.n
            for j, row in enumerate(rows):
                i = 0
                while row:
                    if row & 1:
                        cols[i] |= 1 << j
                    row >>= 1
                    i += 1
            return cols
        base = self.offset(seed)
        return [self(BitVector(self.n, 1 << i), seed).bits ^ base for i in range(self.n)]

    def rows(self, seed: BitVector) -> List[int]:
        """Row functionals of M_seed: entry j is the set of inputs output bit j reads."""
        if self.footprints is not None:
            return self.footprints(seed)
        return columns_to_rows(self.matrix(seed), self.m)

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "k_claim": self.k_claim,
            "eps_claim": self.eps_claim,
            "locality_claim": self.locality_claim,
            "linear": self.linear,
            "affine": self.affine,
            "seed_embedding": self.seed_embedding,
        }

    def to_node(self) -> ConstructionNode:
        return ConstructionNode(
            name=self.name,
            params=dict(self.params),
            children=[child.to_node() for child in self.children],
        )


def seed_prefixed(ext: ExtractorDescriptor) -> ExtractorDescriptor:
    """Output seed ∘ ext(x, seed); neighbor labels of distinct seeds never collide."""

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        return seed.concat(ext(x, seed))

    columns = None
    if ext.affine:
        def columns(seed: BitVector) -> List[int]:
            return [col << ext.d for col in ext.matrix(seed)]

    return ExtractorDescriptor(
        name="seed_prefixed",
        n=ext.n, d=ext.d, m=ext.d + ext.m,
        k_claim=ext.k_claim, eps_claim=ext.eps_claim,
        locality_claim=ext.locality_claim,
        evaluate=evaluate,
        affine=ext.affine,
        seed_embedding="prefix",
        params={},
        children=[ext],
        columns=columns,
    )


def seed_embedded(ext: ExtractorDescriptor, where: str = "tail") -> ExtractorDescriptor:
    """Substitute d output bits (the first or the last d) by the seed verbatim."""
    if where not in ("head", "tail"):
        raise ParameterError(f"seed embedding position must be 'head' or 'tail', got {where!r}")
    if ext.m < ext.d:
        raise ParameterError(f"cannot embed a {ext.d}-bit seed into {ext.m} output bits")
    shift = 0 if where == "head" else ext.m - ext.d
    keep = ((1 << ext.m) - 1) ^ (((1 << ext.d) - 1) << shift)

    def evaluate(x: BitVector, seed: BitVector) -> BitVector:
        out = ext(x, seed)
        return BitVector(ext.m, (out.bits & keep) | (seed.bits << shift))

    columns = None
    if ext.affine:
        def columns(seed: BitVector) -> List[int]:
            return [col & keep for col in ext.matrix(seed)]

    return ExtractorDescriptor(
        name="seed_embedded",
        n=ext.n, d=ext.d, m=ext.m,
        k_claim=ext.k_claim, eps_claim=ext.eps_claim,
        locality_claim=ext.locality_claim,
        evaluate=evaluate,
        affine=ext.affine,
        seed_embedding=where,
        params={"where": where},
        children=[ext],
        columns=columns,
    )


# Construction registry

Factory = Callable[[Dict[str, Any], List[ExtractorDescriptor]], ExtractorDescriptor]
_REGISTRY: Dict[str, Factory] = {}

_REGISTERING_MODULES = (
    "services.primitives",
    "services.amplifier",
    "services.compositions",
    "services.condenser",
)


def register_construction(name: str):
    """Decorator registering a factory that rebuilds `name` from (params, children)."""

    def decorator(factory: Factory) -> Factory:
        _REGISTRY[name] = factory
        return factory

    return decorator


register_construction("seed_prefixed")(lambda params, children: seed_prefixed(children[0]))
register_construction("seed_embedded")(
    lambda params, children: seed_embedded(children[0], params.get("where", "tail"))
)


def registered_constructions() -> List[str]:
    for module in _REGISTERING_MODULES:
        importlib.import_module(module)
    return sorted(_REGISTRY)


def build_from_node(node: ConstructionNode) -> ExtractorDescriptor:
    """Rebuild a descriptor from a construction tree."""
    factory = _REGISTRY.get(node.name)
    if factory is None:
        names = registered_constructions()
        if node.name not in names:
            raise ParameterError(f"unknown construction {node.name!r}; available: {', '.join(names)}")
        factory = _REGISTRY[node.name]
    children = [build_from_node(child) for child in node.children]
    return factory(node.params, children)
