import hashlib
import json
from typing import Any, Dict, List, Optional
from enum import Enum
from pydantic import BaseModel, Field


def content_hash(payload: Dict[str, Any]) -> str:
    """SHA-256 over the canonical JSON form of a payload."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


class DesignKind(str, Enum):
    """Set-family artifact kinds."""
    DESIGN = "design"
    WEAK_DESIGN = "weak_design"
    DESIGN_EXTRACTOR = "design_extractor"


class DesignArtifact(BaseModel):
    """Serialized design, weak design or design-extractor graph."""
    kind: DesignKind
    params: Dict[str, Any]
    sets: List[List[int]]
    content_hash: Optional[str] = None

    def payload(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "params": self.params, "sets": self.sets}

    def compute_hash(self) -> str:
        return content_hash(self.payload())

    def sealed(self) -> "DesignArtifact":
        """Copy with the content hash filled in."""
        return self.model_copy(update={"content_hash": self.compute_hash()})


class ConstructionNode(BaseModel):
    """One node of a construction tree; leaves are primitive extractors."""
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    children: List["ConstructionNode"] = Field(default_factory=list)

    def digest(self) -> str:
        return content_hash(self.model_dump())


class MatrixArtifact(BaseModel):
    """Condenser matrix export: row index lists plus the generating seed."""
    n: int
    k: int
    seed: str
    compressed: bool = True
    rows: List[List[int]]
    clipped: List[bool]
    params_hash: str


ConstructionNode.model_rebuild()
