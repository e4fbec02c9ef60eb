"""
Low-locality condenser: a sparse GF(2) matrix whose rows are Bernoulli
vectors indexed by an expander walk.

Each walk vertex is stretched by Nisan's generator into n blocks of
t_bits digits; block i against the dyadic expansion of p decides entry i of
the row. Rows heavier than 1.2c are zeroed, so every output bit reads at
most 1.2c source bits. The uncompressed variant skips the generator and
reads the blocks straight from a walk on 2^{r0} labels.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.artifacts import MatrixArtifact
from models.profiles import CondenserParams
from services.bitcore import BitVector
from services.descriptors import ExtractorDescriptor, register_construction
from services.errors import LengthMismatchError, ParameterError, VerificationError
from services.expander import PoweredGraph, mgg_for_bits, power_for_lambda, powered_graph, random_walk
from services.nisan_prg import nisan_blocks_array, nisan_params_for_space

logger = logging.getLogger(__name__)


# Bernoulli simulation


@dataclass(frozen=True)
class DyadicProbability:
    """p = 0.b_1…b_t as numerator / 2^t; b_1 is the most significant digit."""

    numerator: int
    t_bits: int

    def __post_init__(self):
        if self.t_bits < 1:
            raise ParameterError(f"need at least one digit, got {self.t_bits}")
        if not 0 <= self.numerator < 1 << self.t_bits:
            raise ParameterError(f"numerator {self.numerator} outside [0, 2^{self.t_bits})")

    @classmethod
    def from_float(cls, p: float, t_bits: int) -> "DyadicProbability":
        if not 0 <= p < 1:
            raise ParameterError(f"probability must lie in [0, 1), got {p}")
        return cls(min(round(p * (1 << t_bits)), (1 << t_bits) - 1), t_bits)

    @property
    def value(self) -> float:
        return self.numerator / (1 << self.t_bits)

    @property
    def digits(self) -> List[int]:
        return [(self.numerator >> (self.t_bits - 1 - j)) & 1 for j in range(self.t_bits)]


def bernoulli_bit(block: int, p: DyadicProbability) -> int:
    """
    1 iff 0.s_1…s_t < 0.b_1…b_t.

    Digits are compared in order: the first position where they differ
    decides, and a block equal to p in every digit gives 0.
    """
    for s, b in zip((((block >> j) & 1) for j in range(p.t_bits)), p.digits):
        if s != b:
            return 1 if s < b else 0
    return 0


def bernoulli_row(v: BitVector, p: DyadicProbability, n: int) -> BitVector:
    """Bit i is bernoulli_bit of block i = v[i·t_bits, (i+1)·t_bits)."""
    if v.length < n * p.t_bits:
        raise LengthMismatchError(f"row of {n} entries needs {n * p.t_bits} bits, got {v.length}")
    mask = (1 << p.t_bits) - 1
    value = 0
    for i in range(n):
        if bernoulli_bit((v.bits >> (i * p.t_bits)) & mask, p):
            value |= 1 << i
    return BitVector(n, value)


def bernoulli_rows_array(bits: np.ndarray, p: DyadicProbability, n: int) -> np.ndarray:
    """Vectorized bernoulli_row over a (rows, ≥ n·t_bits) 0/1 array; returns (rows, n) booleans."""
    if bits.shape[1] < n * p.t_bits:
        raise LengthMismatchError(f"row of {n} entries needs {n * p.t_bits} bits, got {bits.shape[1]}")
    blocks = bits[:, :n * p.t_bits].reshape(bits.shape[0], n, p.t_bits).astype(np.int64)
    weights = 1 << np.arange(p.t_bits - 1, -1, -1, dtype=np.int64)
    return (blocks @ weights) < p.numerator


def bernoulli_bias_exact(p: DyadicProbability) -> float:
    """Pr[bernoulli_bit = 1] by enumerating all 2^t blocks."""
    if p.t_bits > 20:
        raise ParameterError(f"enumerating 2^{p.t_bits} blocks is beyond desk scale")
    ones = sum(bernoulli_bit(block, p) for block in range(1 << p.t_bits))
    return ones / (1 << p.t_bits)


# Parameters


def condenser_params(n: int, k: int, compressed: bool = True, lambda_target: float = 0.01) -> CondenserParams:
    """
    t = 10k, l = k/(2 log₂ n), c = n/l, clip = 1.2c, t_bits = 2⌈log₂ n⌉.

    The generator runs in space 5⌈log₂ n⌉ + 2 and covers r0 = n·t_bits bits;
    its seed length r is the label width of the compressed walk.
    """
    if n < 4 or k < 1 or k > n:
        raise ParameterError(f"need 4 <= n and 1 <= k <= n, got n={n}, k={k}")
    log_n = math.log2(n)
    l = k / (2 * log_n)
    if l <= 1:
        raise ParameterError(f"k={k} too small for n={n}: row density 1/l = {1 / l:.3f} must be below 1")
    c = n / l
    p_bits = 2 * math.ceil(log_n)
    r0 = n * p_bits
    prg_space = 5 * math.ceil(log_n) + 2
    w, prg_k = nisan_params_for_space(prg_space, r0)
    r = w * (2 * prg_k + 1)
    label_bits = r if compressed else r0
    power = power_for_lambda(mgg_for_bits(label_bits), lambda_target)
    return CondenserParams(
        n=n, k=k, t=10 * k, l=l, c=c, clip=1.2 * c, p_bits=p_bits,
        lambda_target=lambda_target, power=power,
        prg_space=prg_space, prg_w=w, prg_k=prg_k, r=r, r0=r0,
        compressed=compressed,
    )


def row_probability(params: CondenserParams) -> DyadicProbability:
    return DyadicProbability.from_float(params.p, params.p_bits)


def collision_bound(params: CondenserParams, lam: Optional[float] = None) -> float:
    """2^{−0.5k+1} + (5/6 + λ)^t."""
    lam = params.lambda_target if lam is None else lam
    return min(1.0, 2.0 ** (-0.5 * params.k + 1) + (5 / 6 + lam) ** params.t)


# Matrices


@dataclass(frozen=True)
class SparseRowMatrix:
    """t rows over [n] as sorted index tuples, with the walk vertex and clip flag of each row."""

    n: int
    rows: Tuple[Tuple[int, ...], ...]
    vertices: Tuple[int, ...]
    clipped: Tuple[bool, ...]
    unclipped_weights: Tuple[int, ...]

    @property
    def t(self) -> int:
        return len(self.rows)

    @property
    def masks(self) -> List[int]:
        return [sum(1 << i for i in row) for row in self.rows]

    @property
    def weights(self) -> List[int]:
        return [len(row) for row in self.rows]

    @property
    def clipped_fraction(self) -> float:
        return sum(self.clipped) / self.t if self.t else 0.0

    def apply(self, x: BitVector) -> BitVector:
        if x.length != self.n:
            raise LengthMismatchError(f"matrix reads {self.n} bits, source has {x.length}")
        value = 0
        for i, mask in enumerate(self.masks):
            if (mask & x.bits).bit_count() & 1:
                value |= 1 << i
        return BitVector(self.t, value)

    def kills_array(self, diffs: np.ndarray) -> np.ndarray:
        """For n ≤ 64: which packed differences lie in the kernel (M·diff = 0)."""
        if self.n > 64:
            raise ParameterError(f"packed application needs n <= 64, matrix has n={self.n}")
        diffs = np.asarray(diffs, dtype=np.uint64)
        masks = np.array(self.masks, dtype=np.uint64)
        return ~parity_uint64(diffs[:, None] & masks[None, :]).any(axis=1)


def parity_uint64(values: np.ndarray) -> np.ndarray:
    """Elementwise parity of packed 64-bit words."""
    v = np.asarray(values, dtype=np.uint64).copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> np.uint64(shift)
    return (v & np.uint64(1)).astype(bool)


def _label_blocks(labels: Sequence[int], params: CondenserParams) -> np.ndarray:
    """Nisan expansion of each label into r0 bits, as a (rows, r0) 0/1 array."""
    w, k = params.prg_w, params.prg_k
    mask = (1 << w) - 1
    parts = [np.array([(label >> (i * w)) & mask for label in labels], dtype=np.uint64)
             for i in range(2 * k + 1)]
    hashes = [(parts[1 + 2 * i], parts[2 + 2 * i]) for i in range(k)]
    blocks = nisan_blocks_array(w, parts[0], hashes)
    shifts = np.arange(w, dtype=np.uint64)
    bits = (blocks[:, :, None] >> shifts) & np.uint64(1)
    return bits.reshape(len(labels), -1)[:, :params.r0].astype(np.uint8)


def _raw_blocks(labels: Sequence[int], width: int) -> np.ndarray:
    data = [label.to_bytes((width + 7) // 8, "little") for label in labels]
    raw = np.frombuffer(b"".join(data), dtype=np.uint8).reshape(len(labels), -1)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :width]


def walk_vertices(seed: BitVector, params: CondenserParams) -> List[int]:
    """Start label from the low bits, then t−1 steps of the powered MGG."""
    if seed.length != params.seed_length:
        raise LengthMismatchError(f"condenser seed has {seed.length} bits, expected {params.seed_length}")
    label_bits = params.r if params.compressed else params.r0
    graph = powered_graph(mgg_for_bits(label_bits), params.power)
    start, coins = seed.split([label_bits, seed.length - label_bits])
    transcript = random_walk(graph, start.bits % graph.num_vertices, params.t - 1, coins)
    base = graph.base if isinstance(graph, PoweredGraph) else graph
    return [base.label(v) for v in transcript.vertices]


def build_condenser_matrix(seed: BitVector, params: CondenserParams) -> SparseRowMatrix:
    """
    Walk, stretch each vertex to r0 bits, draw Bernoulli rows and clip rows heavier than 1.2c.

    Raises:
        LengthMismatchError: seed length differs from params.seed_length
    """
    labels = walk_vertices(seed, params)
    if params.compressed:
        bits = _label_blocks(labels, params)
    else:
        bits = _raw_blocks(labels, params.r0)
    entries = bernoulli_rows_array(bits, row_probability(params), params.n)

    rows: List[Tuple[int, ...]] = []
    clipped: List[bool] = []
    weights: List[int] = []
    for row in entries:
        idx = tuple(int(i) for i in np.flatnonzero(row))
        weights.append(len(idx))
        heavy = len(idx) > params.clip
        clipped.append(heavy)
        rows.append(() if heavy else idx)
    if any(clipped):
        logger.debug(f"condenser: clipped {sum(clipped)} of {params.t} rows above weight {params.clip:.1f}")
    return SparseRowMatrix(n=params.n, rows=tuple(rows), vertices=tuple(labels),
                           clipped=tuple(clipped), unclipped_weights=tuple(weights))


@lru_cache(maxsize=64)
def _cached_matrix(params_json: str, seed_length: int, seed_bits: int) -> SparseRowMatrix:
    params = CondenserParams.model_validate_json(params_json)
    return build_condenser_matrix(BitVector(seed_length, seed_bits), params)


def condenser_matrix(seed: BitVector, params: CondenserParams) -> SparseRowMatrix:
    return _cached_matrix(params.model_dump_json(), seed.length, seed.bits)


def condense(x: BitVector, seed: BitVector, params: CondenserParams) -> BitVector:
    """Cond(x, u) = M′x; bit i is the parity of x on row i."""
    if x.length != params.n:
        raise LengthMismatchError(f"condenser reads {params.n} bits, source has {x.length}")
    return condenser_matrix(seed, params).apply(x)


# Descriptor and export


@dataclass
class CondenserDescriptor(ExtractorDescriptor):
    """Linear descriptor of the condenser; footprints are the row masks of M′."""

    condenser: Optional[CondenserParams] = None

    def sparse_matrix(self, seed: BitVector) -> SparseRowMatrix:
        return condenser_matrix(seed, self.condenser)

    def export(self, seed: BitVector) -> MatrixArtifact:
        return export_matrix(seed, self.condenser)


def condenser_descriptor(params: CondenserParams) -> CondenserDescriptor:
    return CondenserDescriptor(
        name="condenser",
        n=params.n, d=params.seed_length, m=params.t,
        k_claim=params.k,
        eps_claim=min(1.0, (5 / 6 + params.lambda_target) ** params.t),
        locality_claim=params.locality_claim,
        evaluate=lambda x, seed: condense(x, seed, params),
        linear=True,
        params={"n": params.n, "k": params.k, "compressed": params.compressed,
                "lambda_target": params.lambda_target},
        footprints=lambda seed: condenser_matrix(seed, params).masks,
        condenser=params,
    )


def export_matrix(seed: BitVector, params: CondenserParams) -> MatrixArtifact:
    matrix = condenser_matrix(seed, params)
    return MatrixArtifact(
        n=params.n, k=params.k, seed=seed.to_hex(), compressed=params.compressed,
        rows=[list(row) for row in matrix.rows], clipped=list(matrix.clipped),
        params_hash=params.params_hash(),
    )


def rebuild_matrix(artifact: MatrixArtifact, lambda_target: float = 0.01) -> SparseRowMatrix:
    """
    Rebuild a matrix from its generating seed and check it against the exported rows.

    Raises:
        VerificationError: parameters or rows differ from the rebuild
    """
    params = condenser_params(artifact.n, artifact.k, compressed=artifact.compressed, lambda_target=lambda_target)
    if params.params_hash() != artifact.params_hash:
        raise VerificationError("condenser parameters differ from the exported ones")
    matrix = build_condenser_matrix(BitVector.from_hex(artifact.seed), params)
    if [list(row) for row in matrix.rows] != artifact.rows or list(matrix.clipped) != artifact.clipped:
        raise VerificationError("rebuilt condenser rows differ from the exported matrix")
    logger.info(f"Rebuilt condenser matrix n={artifact.n} k={artifact.k} from its seed")
    return matrix


@register_construction("condenser")
def _condenser_factory(params: Dict[str, Any], children) -> ExtractorDescriptor:
    return condenser_descriptor(condenser_params(params["n"], params["k"],
                                                 compressed=params.get("compressed", True),
                                                 lambda_target=params.get("lambda_target", 0.01)))
