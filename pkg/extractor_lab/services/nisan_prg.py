"""
Nisan's generator for space-bounded computation and an exact ROBP distinguisher.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from config import get_config
from services.bitcore import BitVector, GF2Field
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NisanSeed:
    """
    Base block x plus k affine hashes h_j(y) = A_j ⊕ y·B_j over GF(2^w).

    Packed layout, low bits first: x, A_1, B_1, ..., A_k, B_k.
    """

    w: int
    x: int
    hashes: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.w < 1:
            raise ParameterError(f"block width must be >= 1, got {self.w}")
        limit = 1 << self.w
        values = [self.x] + [v for pair in self.hashes for v in pair]
        if any(v < 0 or v >= limit for v in values):
            raise ParameterError(f"seed components must lie in GF(2^{self.w})")

    @property
    def k(self) -> int:
        return len(self.hashes)

    @property
    def length(self) -> int:
        return self.w * (2 * self.k + 1)

    @classmethod
    def from_bits(cls, seed: BitVector, w: int) -> "NisanSeed":
        if seed.length % w or (seed.length // w) % 2 == 0:
            raise LengthMismatchError(f"seed of {seed.length} bits is not w·(2k+1) for w={w}")
        parts = [p.bits for p in seed.split([w] * (seed.length // w))]
        return cls(w, parts[0], tuple(zip(parts[1::2], parts[2::2])))

    def to_bits(self) -> BitVector:
        value = self.x
        shift = self.w
        for a, b in self.hashes:
            value |= a << shift
            value |= b << (shift + self.w)
            shift += 2 * self.w
        return BitVector(self.length, value)


def _expand(field: GF2Field, y: int, hashes: Tuple[Tuple[int, int], ...], j: int) -> List[int]:
    if j == 0:
        return [y]
    a, b = hashes[j - 1]
    return _expand(field, y, hashes, j - 1) + _expand(field, a ^ field.mul(y, b), hashes, j - 1)


def nisan_blocks(seed: NisanSeed) -> List[int]:
    """The 2^k output blocks of G_k(x), where G_j(x) = G_{j−1}(x) ∘ G_{j−1}(h_j(x))."""
    return _expand(GF2Field.standard(seed.w), seed.x, seed.hashes, seed.k)


def nisan_expand(seed: NisanSeed) -> BitVector:
    """Output of w·2^k bits; block b occupies bits [b·w, (b+1)·w)."""
    value = 0
    for b, block in enumerate(nisan_blocks(seed)):
        value |= block << (b * seed.w)
    return BitVector(seed.w << seed.k, value)


def _expand_array(field: GF2Field, y: np.ndarray, hashes, j: int) -> np.ndarray:
    if j == 0:
        return y[:, None]
    a, b = hashes[j - 1]
    left = _expand_array(field, y, hashes, j - 1)
    right = _expand_array(field, np.asarray(a, dtype=np.uint64) ^ field.mul_array(y, b), hashes, j - 1)
    return np.concatenate([left, right], axis=1)


def nisan_blocks_array(w: int, x: np.ndarray, hashes: List[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Vectorized nisan_blocks over S seeds: (S,) components in, (S, 2^k) blocks out."""
    return _expand_array(GF2Field.standard(w), np.asarray(x, dtype=np.uint64), hashes, len(hashes))


def nisan_params_for_space(space: int, length: int) -> Tuple[int, int]:
    """w = next power of two ≥ space, k = ⌈log₂ ⌈length / w⌉⌉."""
    if space < 1 or length < 1:
        raise ParameterError(f"space and length must be positive, got {space}, {length}")
    w = 1 << (space - 1).bit_length()
    blocks = math.ceil(length / w)
    k = (blocks - 1).bit_length()
    return w, k


# Read-once branching programs


class ROBP:
    """
    Width-W, length-L read-once branching program reading bit i at layer i.

    transitions[i, s, b] is the state after reading bit b in state s at layer i;
    the program starts in state 0 and accepts if the final state is in `accept`.
    """

    def __init__(self, transitions: np.ndarray, accept: np.ndarray):
        transitions = np.asarray(transitions, dtype=np.int64)
        accept = np.asarray(accept, dtype=bool)
        if transitions.ndim != 3 or transitions.shape[2] != 2:
            raise ParameterError("transitions must have shape (length, width, 2)")
        if transitions.shape[1] != accept.shape[0]:
            raise ParameterError("accept set does not match the program width")
        if transitions.size and (transitions.min() < 0 or transitions.max() >= transitions.shape[1]):
            raise ParameterError("transition leaves the state space")
        self.transitions = transitions
        self.accept = accept

    @property
    def length(self) -> int:
        return self.transitions.shape[0]

    @property
    def width(self) -> int:
        return self.transitions.shape[1]

    def evaluate(self, bits: BitVector) -> bool:
        if bits.length < self.length:
            raise LengthMismatchError(f"program reads {self.length} bits, input has {bits.length}")
        state = 0
        for i in range(self.length):
            state = int(self.transitions[i, state, (bits.bits >> i) & 1])
        return bool(self.accept[state])

    def evaluate_array(self, bits: np.ndarray) -> np.ndarray:
        """bits is (S, L) of 0/1; returns (S,) acceptance."""
        state = np.zeros(bits.shape[0], dtype=np.int64)
        for i in range(self.length):
            state = self.transitions[i, state, bits[:, i].astype(np.int64)]
        return self.accept[state]

    def accept_probability_uniform(self) -> float:
        """Exact acceptance probability on uniform input by propagating the state distribution."""
        dist = np.zeros(self.width)
        dist[0] = 1.0
        for i in range(self.length):
            nxt = np.zeros(self.width)
            np.add.at(nxt, self.transitions[i, :, 0], dist / 2)
            np.add.at(nxt, self.transitions[i, :, 1], dist / 2)
            dist = nxt
        return float(dist[self.accept].sum())


def constant_program(length: int, accept: bool = True) -> ROBP:
    return ROBP(np.zeros((length, 1, 2), dtype=np.int64), np.array([accept]))


def parity_program(length: int) -> ROBP:
    """Width-2 program accepting inputs of odd weight."""
    layer = np.array([[0, 1], [1, 0]], dtype=np.int64)
    return ROBP(np.repeat(layer[None, :, :], length, axis=0), np.array([False, True]))


def random_robp(width: int, length: int, rng: np.random.Generator) -> ROBP:
    transitions = rng.integers(0, width, size=(length, width, 2), dtype=np.int64)
    accept = rng.random(width) < 0.5
    return ROBP(transitions, accept)


@dataclass(frozen=True)
class DistinguishResult:
    advantage: float
    prg_accept: float
    uniform_accept: float
    seeds_enumerated: int
    hashes_used: int


def robp_distinguish(program: ROBP, w: int, k: int, budget: Optional[int] = None) -> DistinguishResult:
    """
    Exact |Pr_seed[accept G(seed)] − Pr_uniform[accept]|.

    The program reads the first L output bits, i.e. blocks 0..⌈L/w⌉−1, which
    depend only on x and h_1..h_j with j = ⌈log₂ ⌈L/w⌉⌉; enumerating those
    seed components is exact because the remaining hashes never reach the
    program.

    Raises:
        ParameterError: the generator output is shorter than the program
        BudgetExceededError: more relevant seeds than the configured budget
    """
    if program.length > w << k:
        raise ParameterError(f"generator output of {w << k} bits is shorter than the program ({program.length})")
    budget = budget or get_config().robp_seed_budget
    blocks_needed = max(1, math.ceil(program.length / w))
    j = (blocks_needed - 1).bit_length()
    seed_bits = w * (2 * j + 1)
    count = 1 << seed_bits
    if count > budget:
        raise BudgetExceededError(f"{count} relevant seeds exceed the distinguisher budget {budget}")

    seeds = np.arange(count, dtype=np.uint64)
    mask = np.uint64((1 << w) - 1)
    parts = [(seeds >> np.uint64(i * w)) & mask for i in range(2 * j + 1)]
    hashes = [(parts[1 + 2 * i], parts[2 + 2 * i]) for i in range(j)]
    blocks = nisan_blocks_array(w, parts[0], hashes)

    bits = np.empty((count, program.length), dtype=np.uint8)
    for i in range(program.length):
        bits[:, i] = ((blocks[:, i // w] >> np.uint64(i % w)) & np.uint64(1)).astype(np.uint8)
    prg_accept = float(program.evaluate_array(bits).mean())
    uniform_accept = program.accept_probability_uniform()
    advantage = abs(prg_accept - uniform_accept)
    logger.debug(f"ROBP width {program.width} length {program.length}: advantage {advantage:.6f} over {count} seeds")
    return DistinguishResult(advantage=advantage, prg_accept=prg_accept, uniform_accept=uniform_accept,
                             seeds_enumerated=count, hashes_used=j)
