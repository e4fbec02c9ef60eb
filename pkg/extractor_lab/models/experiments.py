from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from config import PRNG_VERSION
from models.artifacts import content_hash


class ExperimentConfig(BaseModel):
    """Experiment invocation: registry name, PRNG seed and parameter overrides."""
    name: str
    prng_seed: int = 20240601
    params: Dict[str, Any] = Field(default_factory=dict)

    def config_hash(self) -> str:
        return content_hash(self.model_dump(mode="json"))


class ExperimentInfo(BaseModel):
    name: str
    title: str
    defaults: Dict[str, Any]


class ExperimentReport(BaseModel):
    """Outcome of one experiment with the raw numbers it was judged on."""
    name: str
    title: str
    passed: bool
    metrics: Dict[str, Any]
    thresholds: Dict[str, Any] = Field(default_factory=dict)
    params: Dict[str, Any] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)
    config_hash: str
    profile_hash: Optional[str] = None
    prng: str = PRNG_VERSION
    prng_seed: int
    elapsed_seconds: float
    created_at: datetime = Field(default_factory=datetime.utcnow)

    def csv_rows(self) -> List[Dict[str, Any]]:
        """One row per scalar metric."""
        rows = []
        for key, value in sorted(self.metrics.items()):
            if isinstance(value, (int, float, bool, str)) or value is None:
                rows.append({
                    "experiment": self.name,
                    "metric": key,
                    "value": value,
                    "passed": self.passed,
                    "config_hash": self.config_hash,
                    "prng_seed": self.prng_seed,
                })
        return rows
