from typing import List

from pydantic import BaseModel, Field, model_validator


class Hypergraph(BaseModel):
    """n vertices and m ordered hyperedges of arity d; repeated indices are allowed."""
    n: int = Field(..., ge=1)
    edges: List[List[int]]

    @model_validator(mode="after")
    def check_edges(self):
        arities = {len(e) for e in self.edges}
        if len(arities) > 1:
            raise ValueError("every hyperedge must have the same arity")
        if any(i < 0 or i >= self.n for e in self.edges for i in e):
            raise ValueError(f"hyperedge indices must lie in [0, {self.n})")
        return self

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def d(self) -> int:
        return len(self.edges[0]) if self.edges else 0


class Predicate(BaseModel):
    """
    Predicate on {0,1}^d as a truth table.

    Entry p of `table` is Q(z) for the pattern z whose bit j is z_j, i.e. the
    value of the j-th selected input.
    """
    d: int = Field(..., ge=0)
    table: List[int]

    @model_validator(mode="after")
    def check_table(self):
        if len(self.table) != 1 << self.d:
            raise ValueError(f"truth table must have 2^{self.d} entries, got {len(self.table)}")
        if any(v not in (0, 1) for v in self.table):
            raise ValueError("truth table entries must be 0 or 1")
        return self

    def __call__(self, pattern: int) -> int:
        return self.table[pattern]

    @classmethod
    def constant(cls, d: int, value: int = 0) -> "Predicate":
        return cls(d=d, table=[value] * (1 << d))

    @classmethod
    def projection(cls, d: int, coordinate: int = 0) -> "Predicate":
        return cls(d=d, table=[(p >> coordinate) & 1 for p in range(1 << d)])

    @classmethod
    def xor(cls, d: int) -> "Predicate":
        return cls(d=d, table=[p.bit_count() & 1 for p in range(1 << d)])

    @classmethod
    def majority(cls, d: int) -> "Predicate":
        return cls(d=d, table=[1 if 2 * p.bit_count() > d else 0 for p in range(1 << d)])
