import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, model_validator

from models.artifacts import content_hash


class ProfileKind(str, Enum):
    """Parameter profile families."""
    DESK = "desk"
    ASYMPTOTIC = "asymptotic"


class PipelineProfile(BaseModel):
    """
    Parameters of the basic extractor pipeline.

    Seed layout of one amp3 input z (l3 bits, low first): a (a_len), s (t_xor),
    v1 (l2), w (walk_coin_bits).
    """
    kind: ProfileKind = ProfileKind.DESK
    n: int
    k: float
    eps: float
    l1: int
    c2: int
    l2: int
    t_xor: int
    amp3_overlap: int
    a_len: int
    walk_coin_bits: int
    l3: int
    m: int
    nw_overlap: int
    d: int
    gamma: Optional[float] = None
    theta: Optional[float] = None

    @model_validator(mode="after")
    def check_layout(self):
        if self.l2 != 3 ** (self.c2 + 1) * self.l1:
            raise ValueError(f"l2 must equal 3^(c2+1)·l1 = {3 ** (self.c2 + 1) * self.l1}")
        if self.l3 != self.a_len + self.t_xor + self.l2 + self.walk_coin_bits:
            raise ValueError("l3 must equal a_len + t_xor + l2 + walk_coin_bits")
        if self.kind == ProfileKind.DESK and (self.d < self.l3 or self.a_len < self.l2):
            raise ValueError("design universes must be at least as large as their sets")
        return self

    @property
    def locality_bound(self) -> int:
        """t_xor · ∏_{i=1}^{c2+1} 3^{i−1}·l1, capped at n."""
        product = 1
        for i in range(1, self.c2 + 2):
            product *= 3 ** (i - 1) * self.l1
        return min(self.n, self.t_xor * product)

    def profile_hash(self) -> str:
        return content_hash(self.model_dump(mode="json"))


class CondenserParams(BaseModel):
    """
    Parameters of the sparse condenser.

    t = 10k rows; target weight divisor l = k/(2 log₂ n); expected row weight
    c = n/l; rows heavier than clip = 1.2c are zeroed.
    """
    n: int
    k: int
    t: int
    l: float
    c: float
    clip: float
    p_bits: int
    lambda_target: float = 0.01
    power: int
    prg_space: int
    prg_w: int
    prg_k: int
    r: int
    r0: int
    compressed: bool = True

    @model_validator(mode="after")
    def check_relations(self):
        if self.t != 10 * self.k:
            raise ValueError("t must equal 10k")
        if abs(self.clip - 1.2 * self.c) > 1e-9:
            raise ValueError("clip must equal 1.2c")
        if self.r0 < self.n * self.p_bits:
            raise ValueError("r0 must cover n blocks of p_bits digits")
        return self

    @property
    def p(self) -> float:
        """Row density 1/l."""
        return 1 / self.l

    @property
    def seed_length(self) -> int:
        """Start label plus walk coins for t−1 steps of the powered MGG (3 bits per base step)."""
        label = self.r if self.compressed else self.r0
        return label + (self.t - 1) * 3 * self.power

    @property
    def locality_claim(self) -> int:
        return math.floor(self.clip)

    def params_hash(self) -> str:
        return content_hash(self.model_dump(mode="json"))


class BitFixProfile(BaseModel):
    """
    Named schedule of the bit-fixing pipeline.

    mu = k/n, mu_prime = mu/2, s = k/2; graph parameters describe the design
    extractor built from a seed-prefixed polynomial hash.
    """
    n: int
    k: int
    mu: float
    mu_prime: float
    s: float
    gamma: float
    eps: float
    n0: int
    b: int
    d0: int
    alpha: float
    K: int
    target: Optional[int] = None

    @model_validator(mode="after")
    def check_right_side(self):
        if self.n != 1 << (self.d0 + self.b):
            raise ValueError(f"n must equal 2^(d0+b) = {1 << (self.d0 + self.b)} right vertices")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        return self

    @classmethod
    def schedule(cls, n: int, k: int, n0: int, b: int, d0: int, alpha: float, K: int,
                 gamma: float = 0.25, eps: float = 0.25, target: Optional[int] = None) -> "BitFixProfile":
        mu = k / n
        return cls(n=n, k=k, mu=mu, mu_prime=mu / 2, s=k / 2, gamma=gamma, eps=eps,
                   n0=n0, b=b, d0=d0, alpha=alpha, K=K, target=target)

    def profile_hash(self) -> str:
        return content_hash(self.model_dump(mode="json"))
