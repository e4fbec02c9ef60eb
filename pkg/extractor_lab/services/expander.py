"""
Explicit expander graphs, random walks and spectral certification.

Graphs are regular undirected multigraphs given by a neighbor function
(v, j) ↦ v'. The Margulis–Gabber–Galil torus carries the analytic bound
λ ≤ 5√2/8; powering trades degree for spectral gap; table-backed graphs
serve as fixtures with known spectra.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from config import get_config
from services.bitcore import BitVector
from services.errors import BudgetExceededError, LengthMismatchError, ParameterError

logger = logging.getLogger(__name__)

MGG_LAMBDA = 5 * math.sqrt(2) / 8


class ExpanderGraph(ABC):
    """Regular graph with a neighbor function and a spectral bound."""

    name: str = "graph"

    def __init__(self, num_vertices: int, degree: int, lambda_bound: float, steps_per_edge: int = 1):
        if num_vertices < 1 or degree < 1:
            raise ParameterError(f"graph needs >= 1 vertex and degree >= 1, got {num_vertices}, {degree}")
        self.num_vertices = num_vertices
        self.degree = degree
        self.lambda_bound = lambda_bound
        self.steps_per_edge = steps_per_edge

    @property
    def coin_bits(self) -> int:
        """Coin bits consumed per step, ⌈log₂ degree⌉."""
        return (self.degree - 1).bit_length()

    def check_vertex(self, v: int) -> int:
        if v < 0 or v >= self.num_vertices:
            raise ParameterError(f"vertex {v} outside [0, {self.num_vertices})")
        return v

    @abstractmethod
    def neighbor(self, v: int, j: int) -> int:
        """j-th neighbor of v, j taken modulo the degree."""

    def neighbor_array(self, vs: np.ndarray, js: np.ndarray) -> np.ndarray:
        """Vectorized neighbor; subclasses override when a closed form exists."""
        vs = np.asarray(vs, dtype=np.int64)
        js = np.asarray(js, dtype=np.int64)
        out = np.empty_like(vs)
        for idx in np.ndindex(vs.shape):
            out[idx] = self.neighbor(int(vs[idx]), int(js[idx]))
        return out

    def neighbor_table(self) -> np.ndarray:
        """(N, D) array of neighbors; only for graphs within the spectral cap."""
        cap = get_config().spectral_cap
        if self.num_vertices > cap:
            raise BudgetExceededError(f"{self.num_vertices} vertices exceed the spectral cap {cap}")
        vs = np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.degree)
        js = np.tile(np.arange(self.degree, dtype=np.int64), self.num_vertices)
        return self.neighbor_array(vs, js).reshape(self.num_vertices, self.degree)

    def apply_normalized(self, vec: np.ndarray, table: Optional[np.ndarray] = None) -> np.ndarray:
        """(A/D)·vec using the neighbor table."""
        if table is None:
            table = self.neighbor_table()
        return vec[table].mean(axis=1)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "num_vertices": self.num_vertices,
            "degree": self.degree,
            "lambda_bound": self.lambda_bound,
            "steps_per_edge": self.steps_per_edge,
        }


class MGGGraph(ExpanderGraph):
    """
    Margulis–Gabber–Galil graph on Z_m × Z_m, vertex (x, y) labelled x·m + y.

    Neighbor maps, j = 0..7:
        (x ± 2y, y), (x ± (2y+1), y), (x, y ± 2x), (x, y ± (2x+1))
    They come in inverse pairs, so the graph is undirected and 8-regular.
    label_bits, when set, identifies vertex labels modulo 2^label_bits.
    """

    name = "mgg"

    def __init__(self, m: int, label_bits: Optional[int] = None):
        if m < 2:
            raise ParameterError(f"MGG torus side must be >= 2, got {m}")
        super().__init__(m * m, 8, MGG_LAMBDA)
        self.m = m
        self.label_bits = label_bits

    def neighbor(self, v: int, j: int) -> int:
        m = self.m
        x, y = divmod(v, m)
        j %= 8
        if j == 0:
            x = (x + 2 * y) % m
        elif j == 1:
            x = (x - 2 * y) % m
        elif j == 2:
            x = (x + 2 * y + 1) % m
        elif j == 3:
            x = (x - 2 * y - 1) % m
        elif j == 4:
            y = (y + 2 * x) % m
        elif j == 5:
            y = (y - 2 * x) % m
        elif j == 6:
            y = (y + 2 * x + 1) % m
        else:
            y = (y - 2 * x - 1) % m
        return x * m + y

    def neighbor_array(self, vs: np.ndarray, js: np.ndarray) -> np.ndarray:
        if self.m > 1 << 30:
            return super().neighbor_array(vs, js)
        m = np.int64(self.m)
        vs = np.asarray(vs, dtype=np.int64)
        js = np.asarray(js, dtype=np.int64) % 8
        x, y = np.divmod(vs, m)
        sign = np.where(js % 2 == 0, 1, -1).astype(np.int64)
        move_x = js < 4
        shift = np.where((js // 2) % 2 == 1, 1, 0).astype(np.int64)
        new_x = np.where(move_x, (x + sign * (2 * y + shift)) % m, x)
        new_y = np.where(move_x, y, (y + sign * (2 * x + shift)) % m)
        return new_x * m + new_y

    def label(self, v: int) -> int:
        if self.label_bits is None:
            return v
        return v & ((1 << self.label_bits) - 1)

    def describe(self) -> dict:
        info = super().describe()
        info.update({"m": self.m, "label_bits": self.label_bits})
        return info


def mgg_graph(m: int) -> MGGGraph:
    return MGGGraph(m)


def mgg_for_bits(r: int) -> MGGGraph:
    """Torus with side 2^{⌈r/2⌉} whose labels, reduced mod 2^r, cover [2^r] evenly."""
    if r < 2:
        raise ParameterError(f"need at least 2 label bits, got {r}")
    side = 1 << math.ceil(r / 2)
    return MGGGraph(side, label_bits=r if r % 2 else None)


class TableGraph(ExpanderGraph):
    """Graph given by explicit neighbor lists; lambda_bound is filled by estimate_lambda."""

    name = "table"

    def __init__(self, neighbors: Sequence[Sequence[int]], name: str = "table",
                 lambda_bound: float = 1.0):
        degrees = {len(row) for row in neighbors}
        if len(degrees) != 1:
            raise ParameterError("table graph must be regular")
        super().__init__(len(neighbors), degrees.pop(), lambda_bound)
        self.table = np.asarray(neighbors, dtype=np.int64)
        if self.table.min() < 0 or self.table.max() >= self.num_vertices:
            raise ParameterError("neighbor table references a vertex outside the graph")
        self.name = name

    def neighbor(self, v: int, j: int) -> int:
        return int(self.table[v, j % self.degree])

    def neighbor_array(self, vs: np.ndarray, js: np.ndarray) -> np.ndarray:
        return self.table[np.asarray(vs, dtype=np.int64), np.asarray(js, dtype=np.int64) % self.degree]


def complete_graph(q: int) -> TableGraph:
    if q < 2:
        raise ParameterError(f"complete graph needs q >= 2, got {q}")
    return TableGraph([[u for u in range(q) if u != v] for v in range(q)],
                      name=f"K_{q}", lambda_bound=1 / (q - 1))


def cycle_graph(n: int) -> TableGraph:
    if n < 3:
        raise ParameterError(f"cycle needs n >= 3, got {n}")
    return TableGraph([[(v + 1) % n, (v - 1) % n] for v in range(n)], name=f"C_{n}",
                      lambda_bound=1.0 if n % 2 == 0 else abs(math.cos(math.pi * (n - 1) / n)))


def disjoint_union(*graphs: TableGraph) -> TableGraph:
    rows: List[List[int]] = []
    offset = 0
    for g in graphs:
        rows.extend([[int(u) + offset for u in row] for row in g.table])
        offset += g.num_vertices
    return TableGraph(rows, name="+".join(g.name for g in graphs), lambda_bound=1.0)


class PoweredGraph(ExpanderGraph):
    """Edges are s-step walks on the base graph; edge label j lists the s base digits, first step lowest."""

    name = "powered"

    def __init__(self, base: ExpanderGraph, s: int):
        if s < 1:
            raise ParameterError(f"power must be >= 1, got {s}")
        super().__init__(base.num_vertices, base.degree ** s, base.lambda_bound ** s,
                         steps_per_edge=base.steps_per_edge * s)
        self.base = base
        self.s = s
        self.name = f"{base.name}^{s}"

    @property
    def coin_bits(self) -> int:
        return self.s * self.base.coin_bits

    def neighbor(self, v: int, j: int) -> int:
        for _ in range(self.s):
            j, digit = divmod(j, self.base.degree)
            v = self.base.neighbor(v, digit)
        return v

    def neighbor_array(self, vs: np.ndarray, js: np.ndarray) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.int64)
        js = np.asarray(js, dtype=object if self.degree >= 1 << 62 else np.int64)
        for _ in range(self.s):
            digits = (js % self.base.degree).astype(np.int64)
            js = js // self.base.degree
            vs = self.base.neighbor_array(vs, digits)
        return vs

    def apply_normalized(self, vec: np.ndarray, table: Optional[np.ndarray] = None) -> np.ndarray:
        base_table = self.base.neighbor_table() if table is None else table
        for _ in range(self.s):
            vec = self.base.apply_normalized(vec, base_table)
        return vec

    def neighbor_table(self) -> np.ndarray:
        if self.degree > 1 << 16:
            raise BudgetExceededError(f"degree {self.degree} too large for an explicit table")
        return super().neighbor_table()

    def describe(self) -> dict:
        info = super().describe()
        info.update({"base": self.base.describe(), "s": self.s})
        return info


def powered_graph(g: ExpanderGraph, s: int) -> ExpanderGraph:
    if s == 1:
        return g
    return PoweredGraph(g, s)


# Walks


@dataclass(frozen=True)
class WalkTranscript:
    start: int
    coins: BitVector
    vertices: List[int]


def random_walk(g: ExpanderGraph, start: int, t: int, coins: BitVector) -> WalkTranscript:
    """
    t-step walk from `start`; step i reads the i-th ⌈log₂ D⌉-bit coin chunk.

    Raises:
        LengthMismatchError: fewer than t·⌈log₂ D⌉ coin bits
    """
    g.check_vertex(start)
    width = g.coin_bits
    if coins.length < t * width:
        raise LengthMismatchError(f"walk of {t} steps needs {t * width} coin bits, got {coins.length}")
    mask = (1 << width) - 1
    vertices = [start]
    v = start
    for i in range(t):
        v = g.neighbor(v, (coins.bits >> (i * width)) & mask)
        vertices.append(v)
    return WalkTranscript(start=start, coins=coins, vertices=vertices)


def walk_batch(g: ExpanderGraph, starts: np.ndarray, digits: np.ndarray) -> np.ndarray:
    """
    Vectorized walks; digits is (N, t) with entries in [0, base degree) per base step.

    For a powered graph each edge consumes s consecutive base digits, so
    digits must have t·s columns for a t-step walk; the result is the
    (N, t+1) array of powered-walk vertices.
    """
    starts = np.asarray(starts, dtype=np.int64)
    digits = np.asarray(digits, dtype=np.int64)
    base = g.base if isinstance(g, PoweredGraph) else g
    s = g.s if isinstance(g, PoweredGraph) else 1
    if digits.shape[1] % s:
        raise LengthMismatchError(f"{digits.shape[1]} base digits do not split into steps of {s}")
    steps = digits.shape[1] // s
    out = np.empty((starts.shape[0], steps + 1), dtype=np.int64)
    out[:, 0] = starts
    v = starts
    for i in range(steps):
        for j in range(s):
            v = base.neighbor_array(v, digits[:, i * s + j])
        out[:, i + 1] = v
    return out


def random_walk_batch(g: ExpanderGraph, t: int, count: int, rng: np.random.Generator,
                      starts: Optional[np.ndarray] = None) -> np.ndarray:
    """`count` independent t-step walks from uniform (or given) starts."""
    if starts is None:
        starts = rng.integers(0, g.num_vertices, size=count, dtype=np.int64)
    base = g.base if isinstance(g, PoweredGraph) else g
    s = g.s if isinstance(g, PoweredGraph) else 1
    digits = rng.integers(0, base.degree, size=(count, t * s), dtype=np.int64)
    return walk_batch(g, starts, digits)


# Spectral certification


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    method: str
    mode: str
    iterations: int = 0

    @property
    def analytic(self) -> bool:
        return self.method == "analytic"


def estimate_lambda(g: ExpanderGraph, mode: str = "absolute", iterations: Optional[int] = None,
                    tolerance: Optional[float] = None, seed: Optional[int] = None) -> LambdaEstimate:
    """
    Second eigenvalue of the normalized adjacency operator by power iteration.

    The uniform vector (the trivial eigenvector of a regular graph) is projected
    out each step. mode="absolute" returns max |μ| over the rest of the spectrum;
    mode="signed" returns the second-largest eigenvalue, iterating on (A + I)/2.
    Graphs over the spectral cap get their analytic bound instead.
    """
    if mode not in ("absolute", "signed"):
        raise ParameterError(f"unknown lambda mode {mode!r}")
    config = get_config()
    if g.num_vertices > config.spectral_cap:
        logger.warning(f"{g.name}: {g.num_vertices} vertices exceed the spectral cap; using the analytic bound")
        return LambdaEstimate(value=g.lambda_bound, method="analytic", mode=mode)
    iterations = iterations or config.power_iterations
    tolerance = tolerance or config.power_tolerance
    n = g.num_vertices
    if n == 1:
        return LambdaEstimate(value=0.0, method="power-iteration", mode=mode)

    table = g.base.neighbor_table() if isinstance(g, PoweredGraph) else g.neighbor_table()
    rng = np.random.default_rng(config.prng_seed if seed is None else seed)
    vec = rng.standard_normal(n)
    vec -= vec.mean()
    vec /= np.linalg.norm(vec)

    def step(v: np.ndarray) -> np.ndarray:
        w = g.apply_normalized(v, table)
        if mode == "signed":
            w = (w + v) / 2
        return w - w.mean()

    estimate = 0.0
    done = 0
    for done in range(1, iterations + 1):
        w = step(vec)
        if mode == "absolute":
            # ||A²v|| converges to μ² without oscillating between ±μ
            w = step(w)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            estimate = 0.0
            break
        new_estimate = math.sqrt(norm) if mode == "absolute" else norm
        vec = w / norm
        if abs(new_estimate - estimate) < tolerance:
            estimate = new_estimate
            break
        estimate = new_estimate
    value = estimate if mode == "absolute" else 2 * estimate - 1
    logger.debug(f"{g.name}: λ ({mode}) ≈ {value:.8f} after {done} iterations")
    return LambdaEstimate(value=min(1.0, value), method="power-iteration", mode=mode, iterations=done)


def power_for_lambda(g: ExpanderGraph, target: float, certified: bool = False) -> int:
    """Smallest s with bound^s ≤ target; the bound is analytic unless certified."""
    if not 0 < target < 1:
        raise ParameterError(f"target λ must lie in (0, 1), got {target}")
    bound = g.lambda_bound
    if certified:
        estimate = estimate_lambda(g)
        bound = estimate.value + 1e-6 if not estimate.analytic else estimate.value
    if bound >= 1:
        raise ParameterError(f"{g.name} has λ bound {bound:.4f}; powering cannot reach {target}")
    if bound <= 0:
        return 1
    return max(1, math.ceil(math.log(target) / math.log(bound)))


def dense_adjacency(g: ExpanderGraph, cap: int = 1 << 12) -> np.ndarray:
    """Normalized adjacency matrix (A/D) for small graphs; used as an eigen-solve oracle."""
    if g.num_vertices > cap:
        raise BudgetExceededError(f"{g.num_vertices} vertices exceed the dense cap {cap}")
    n = g.num_vertices
    matrix = np.zeros((n, n))
    eye = np.eye(n)
    for v in range(n):
        matrix[:, v] = g.apply_normalized(eye[:, v])
    return matrix
