from typing import Annotated, Any, Dict, List, Optional

from pydantic import AfterValidator, BaseModel, Field

from models.artifacts import ConstructionNode, DesignKind
from models.hypergraph import Hypergraph, Predicate


def _check_bitvector(value: str) -> str:
    length, sep, _ = value.partition(":")
    if not sep or not length.strip().isdigit():
        raise ValueError("bit vectors are written as '<length>:<hex>'")
    return value


BitString = Annotated[str, AfterValidator(_check_bitvector)]


class ExtractRequest(BaseModel):
    """Evaluate a construction tree on one source string and one seed."""
    construction: ConstructionNode
    x: BitString
    seed: BitString


class ExtractResponse(BaseModel):
    output: str
    locality: int
    summary: Dict[str, Any]


class CondenseRequest(BaseModel):
    """Condense x; without a seed one is drawn from prng_seed."""
    n: int = Field(..., ge=4, le=64)
    k: int = Field(..., ge=1)
    x: BitString
    seed: Optional[BitString] = None
    prng_seed: Optional[int] = None
    compressed: bool = True
    lambda_target: float = Field(0.01, gt=0, lt=1)


class CondenseResponse(BaseModel):
    output: str
    seed: str
    rows: List[List[int]]
    clipped: List[bool]
    clipped_fraction: float


class LocalityRequest(BaseModel):
    construction: ConstructionNode
    seed: BitString
    trials: int = Field(8, ge=1, le=256)
    prng_seed: Optional[int] = None


class LocalityResponse(BaseModel):
    counts: List[int]
    max: int
    seed: str
    trials: int
    footprint_counts: Optional[List[int]] = None
    consistent: Optional[bool] = None


class DesignRequest(BaseModel):
    """
    Build a set family.

    design: {n, m, k, l}; weak_design: {m, kappa, l};
    design_extractor: {n0, b, d0, alpha, K, eps, target?}.
    """
    kind: DesignKind
    params: Dict[str, Any]


class DesignVerifyResponse(BaseModel):
    valid: bool
    content_hash: str
    message: Optional[str] = None


class NisanRequest(BaseModel):
    """Expand a Nisan seed of w·(2k+1) bits."""
    w: int = Field(..., ge=1, le=32)
    seed: BitString


class NisanResponse(BaseModel):
    output: str
    blocks: List[int]


class RLFRequest(BaseModel):
    """f_{G,Q} applied to each block of `inputs`."""
    hypergraph: Hypergraph
    predicate: Predicate
    inputs: List[BitString] = Field(..., min_length=1)


class NZRequest(BaseModel):
    construction: ConstructionNode
    seed: BitString
    rounds: int = Field(..., ge=1, le=4096)


class PRGResponse(BaseModel):
    output: str
    length: int


class BitFixRequest(BaseModel):
    """Bit-fixing source: `free` positions, the rest taken from `fixed`; x is one source string."""
    n: int
    free: List[int]
    fixed: BitString
    x: BitString


class BitFixResponse(BaseModel):
    output: str
    deterministic: str
    witness: Dict[str, Any]
    pipeline: Dict[str, Any]


class ExperimentRunRequest(BaseModel):
    prng_seed: Optional[int] = None
    params: Dict[str, Any] = Field(default_factory=dict)
