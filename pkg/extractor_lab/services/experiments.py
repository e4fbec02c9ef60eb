"""
Registry of reproducible experiments.

Each experiment takes an ExperimentConfig (PRNG seed plus parameter
overrides of its defaults) and returns an ExperimentReport holding the raw
numbers, the thresholds they were judged against and the pass verdict.
Defaults are the acceptance-scale settings; tests pass smaller overrides.
"""

import csv
import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from models.experiments import ExperimentConfig, ExperimentInfo, ExperimentReport
from services.amplifier import desk_profile, get_basic_extractor
from services.bitcore import BitVector, gf2_kernel_basis
from services.bitfix import BitFixingSource, compute_nobf_witness, design_graph_for_profile, verification_profile
from services.compositions import ErrorReductionParams, error_reduction_bound, error_reduction_descriptor
from services.condenser import (
    DyadicProbability,
    bernoulli_bias_exact,
    build_condenser_matrix,
    collision_bound,
    condenser_params,
)
from services.designs import get_design, get_weak_design, load_design_artifact
from services.errors import ParameterError
from services.expander import mgg_graph, power_for_lambda, powered_graph, random_walk_batch
from services.harness import (
    FiniteDistribution,
    collision_entropy,
    dense_sd_from_uniform,
    extractor_error_exact,
    extractor_error_sampled,
    locality_audit,
    make_rng,
    make_source,
    min_entropy,
    random_distribution,
    seed_error,
    statistical_distance,
    xor_convolve_many,
)
from services.nisan_prg import random_robp, robp_distinguish
from services.primitives import leftover_hash_descriptor, pairwise_values, short_seed_hash_descriptor

logger = logging.getLogger(__name__)

Runner = Callable[[Dict[str, Any], np.random.Generator], "Outcome"]


@dataclass
class Outcome:
    passed: bool
    metrics: Dict[str, Any]
    thresholds: Dict[str, Any]
    notes: List[str]
    profile_hash: Optional[str] = None


@dataclass
class _Entry:
    name: str
    title: str
    defaults: Dict[str, Any]
    runner: Runner


_EXPERIMENTS: Dict[str, _Entry] = {}


def experiment(name: str, title: str, **defaults):
    def decorator(runner: Runner) -> Runner:
        _EXPERIMENTS[name] = _Entry(name=name, title=title, defaults=defaults, runner=runner)
        return runner
    return decorator


def list_experiments() -> List[ExperimentInfo]:
    return [ExperimentInfo(name=e.name, title=e.title, defaults=e.defaults) for e in _EXPERIMENTS.values()]


def _plain(values: Dict[str, Any]) -> Dict[str, Any]:
    """numpy scalars to Python numbers so reports serialize."""
    return {key: value.item() if isinstance(value, np.generic) else value for key, value in values.items()}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """
    Run one registered experiment.

    Raises:
        ParameterError: unknown experiment or unknown parameter override
    """
    entry = _EXPERIMENTS.get(config.name)
    if entry is None:
        raise ParameterError(f"unknown experiment {config.name!r}")
    unknown = set(config.params) - set(entry.defaults)
    if unknown:
        raise ParameterError(f"{config.name} has no parameters {sorted(unknown)}")
    params = {**entry.defaults, **config.params}
    rng = make_rng(config.prng_seed)
    logger.info(f"Running experiment {config.name} with {params}")
    started = time.perf_counter()
    outcome = entry.runner(params, rng)
    elapsed = time.perf_counter() - started
    logger.info(f"Experiment {config.name}: {'passed' if outcome.passed else 'FAILED'} in {elapsed:.2f}s")
    return ExperimentReport(
        name=entry.name, title=entry.title, passed=bool(outcome.passed),
        metrics=_plain(outcome.metrics), thresholds=_plain(outcome.thresholds), params=params, notes=outcome.notes,
        config_hash=config.config_hash(), profile_hash=outcome.profile_hash,
        prng_seed=config.prng_seed, elapsed_seconds=round(elapsed, 4),
    )


def write_csv(reports: List[ExperimentReport], path: str):
    rows = [row for report in reports for row in report.csv_rows()]
    fields = ["experiment", "metric", "value", "passed", "config_hash", "prng_seed"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


# Experiments


@experiment("leftover_hash", "Leftover hash lemma on flat sources", n=12, k=8, delta=2, sources=20)
def _leftover_hash(params, rng):
    ext = leftover_hash_descriptor(params["n"], params["k"], params["delta"])
    errors = [
        extractor_error_exact(ext, make_source("flat", {"n": params["n"], "k": params["k"]}, rng))
        for _ in range(params["sources"])
    ]
    bound = 2.0 ** -params["delta"]
    return Outcome(
        passed=max(errors) <= bound,
        metrics={"max_sd": max(errors), "mean_sd": float(np.mean(errors)), "m": ext.m},
        thresholds={"sd_bound": bound},
        notes=[],
    )


@experiment("pairwise", "Pairwise independence of A ⊕ i·B", l=4)
def _pairwise(params, rng):
    l = params["l"]
    count = 1 << l
    seeds = [(a, b) for a in range(count) for b in range(count)]
    strings = np.array([pairwise_values(l, a, b, count) for a, b in seeds])
    worst = 0
    for i, j in itertools.permutations(range(count), 2):
        pairs = strings[:, i] * count + strings[:, j]
        hist = np.bincount(pairs, minlength=count * count)
        worst = max(worst, int(np.abs(hist - 1).max()))
    return Outcome(
        passed=worst == 0,
        metrics={"pairs_checked": count * (count - 1), "max_count_deviation": worst},
        thresholds={"max_count_deviation": 0},
        notes=[],
    )


def crafted_distribution(bits: int, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Half the outcomes raised and half lowered by 2ε/2^bits; SD from uniform is exactly ε."""
    size = 1 << bits
    step = 2 * eps / size
    if step > 1 / size:
        raise ParameterError(f"ε = {eps} too large for a {bits}-bit crafted distribution")
    signs = np.array([1.0] * (size // 2) + [-1.0] * (size // 2))
    rng.shuffle(signs)
    return np.full(size, 1.0 / size) + signs * step


@experiment("xor_law", "XOR error reduction (2ε)^t", bits=4, eps_values=[0.125, 0.25], t_values=[2, 3], repeats=5)
def _xor_law(params, rng):
    rows = []
    passed = True
    for eps in params["eps_values"]:
        for t in params["t_values"]:
            for _ in range(params["repeats"]):
                dists = [crafted_distribution(params["bits"], eps, rng) for _ in range(t)]
                sd = dense_sd_from_uniform(xor_convolve_many(dists))
                bound = (2 * eps) ** t
                passed &= sd <= bound + 1e-15
                rows.append(sd / bound)
    return Outcome(
        passed=passed,
        metrics={"cases": len(rows), "max_ratio_to_bound": max(rows)},
        thresholds={"ratio": 1.0},
        notes=[],
    )


@experiment("hitting", "Expander walk hitting bound", side=64, beta=1 / 3, t=10, walks=100_000,
            lambda_target=0.01)
def _hitting(params, rng):
    base = mgg_graph(params["side"])
    s = power_for_lambda(base, params["lambda_target"], certified=True)
    graph = powered_graph(base, s)
    planted = rng.choice(base.num_vertices, size=int(params["beta"] * base.num_vertices), replace=False)
    in_b = np.zeros(base.num_vertices, dtype=bool)
    in_b[planted] = True
    beta = in_b.mean()
    starts = rng.choice(planted, size=params["walks"])
    walks = random_walk_batch(graph, params["t"], params["walks"], rng, starts=starts)
    stayed = in_b[walks].all(axis=1)
    rate = float(stayed.mean())
    sigma = math.sqrt(max(rate * (1 - rate), 1 / params["walks"]) / params["walks"])
    bound = (beta + params["lambda_target"]) ** params["t"]
    return Outcome(
        passed=rate <= bound + 3 * sigma,
        metrics={"stay_rate": rate, "sigma": sigma, "power": s, "beta": float(beta)},
        thresholds={"bound": bound},
        notes=["walks start inside B; the event is that all t steps stay in B"],
    )


@experiment("design_artifacts", "Design artifacts re-verify on load", n=16)
def _design_artifacts(params, rng):
    profile = desk_profile(params["n"])
    families = [
        get_design(profile.a_len, profile.t_xor, profile.amp3_overlap, profile.l2),
        get_design(profile.d, profile.m, profile.nw_overlap, profile.l3),
        get_weak_design(4, 2.0, 4),
        design_graph_for_profile(verification_profile()),
    ]
    verified = 0
    for family in families:
        load_design_artifact(family.to_artifact())
        verified += 1
    return Outcome(passed=verified == len(families), metrics={"artifacts_verified": verified},
                   thresholds={"artifacts": len(families)}, notes=[], profile_hash=profile.profile_hash())


@experiment("basic_structure", "Basic extractor linearity, locality and nested evaluation",
            n=16, triples=1000, audit_seeds=3, pairs=10_000)
def _basic_structure(params, rng):
    profile = desk_profile(params["n"])
    basic = get_basic_extractor(profile)
    ext = basic.descriptor()
    linear_ok = 0
    for _ in range(params["triples"]):
        x, y, u = BitVector.random(ext.n, rng), BitVector.random(ext.n, rng), BitVector.random(ext.d, rng)
        linear_ok += ext(x ^ y, u) == ext(x, u) ^ ext(y, u)
    audits = [locality_audit(ext, BitVector.random(ext.d, rng), rng=rng) for _ in range(params["audit_seeds"])]
    nested_ok = 0
    for _ in range(params["pairs"]):
        x, u = BitVector.random(ext.n, rng), BitVector.random(ext.d, rng)
        nested_ok += basic.evaluate(x, u) == basic.nested_evaluate(x, u)
    max_locality = max(a.max_locality for a in audits)
    return Outcome(
        passed=(linear_ok == params["triples"] and all(a.consistent for a in audits)
                and nested_ok == params["pairs"] and max_locality <= ext.locality_claim),
        metrics={"linear_ok": linear_ok, "audits_consistent": sum(bool(a.consistent) for a in audits),
                 "nested_ok": nested_ok, "max_locality": max_locality},
        thresholds={"triples": params["triples"], "pairs": params["pairs"],
                    "locality_claim": ext.locality_claim},
        notes=[],
        profile_hash=profile.profile_hash(),
    )


def kernel_aligned_source(ext, seed: BitVector, k: int, rng: np.random.Generator) -> FiniteDistribution:
    """Affine source spanned by k kernel vectors of the output map at `seed`; constant output there."""
    kernel = gf2_kernel_basis(ext.rows(seed), ext.n)
    if len(kernel) < k:
        raise ParameterError(f"kernel has dimension {len(kernel)} < {k}")
    return make_source("affine", {"n": ext.n, "k": k, "basis": kernel[:k], "offset": 0}, rng)


@experiment("desk_quality", "Desk extraction quality on affine sources", n=16, k=12, sources=50,
            seeds_per_source=32, fraction=0.95)
def _desk_quality(params, rng):
    profile = desk_profile(params["n"], k=params["k"])
    ext = get_basic_extractor(profile).descriptor()
    estimates = []
    for _ in range(params["sources"]):
        source = make_source("affine", {"n": ext.n, "k": params["k"]}, rng)
        estimates.append(extractor_error_sampled(ext, source, params["seeds_per_source"], rng))
    within = sum(e.value <= profile.eps for e in estimates)
    seed = BitVector.random(ext.d, rng)
    adversarial = seed_error(ext, seed, kernel_aligned_source(ext, seed, params["k"], rng))
    needed = math.ceil(params["fraction"] * params["sources"])
    return Outcome(
        passed=within >= needed and adversarial > profile.eps,
        metrics={"sources_within_eps": within, "mean_sd": float(np.mean([e.value for e in estimates])),
                 "max_sd": max(e.value for e in estimates), "adversarial_seed_sd": adversarial},
        thresholds={"eps": profile.eps, "sources_needed": needed},
        notes=["per-source SD is the exact per-seed SD averaged over sampled seeds",
               "the adversarial value is the SD at the seed whose kernel spans the source"],
        profile_hash=profile.profile_hash(),
    )


@experiment("error_reduction", "Error-reduction combinator against its composition bound",
            n=12, k=10, sources=2, inner_sources=200)
def _error_reduction(params, rng):
    inner0 = short_seed_hash_descriptor(params["n"], 5, 8)
    inner1 = short_seed_hash_descriptor(4, 3, 2)
    combo = ErrorReductionParams(t1=2, t2=2, inner0=inner0, inner1=inner1)
    composed = error_reduction_descriptor(combo)
    eps1 = max(extractor_error_exact(inner1, make_source("flat", {"n": 4, "k": 3}, rng))
               for _ in range(params["inner_sources"]))
    results = []
    for _ in range(params["sources"]):
        source = make_source("flat", {"n": params["n"], "k": params["k"]}, rng)
        eps0 = extractor_error_exact(inner0, source)
        bound = error_reduction_bound(eps0, eps1, combo.t1, combo.t2)
        results.append((extractor_error_exact(composed, source), bound, eps0))
    return Outcome(
        passed=all(sd <= bound + 1e-12 for sd, bound, _ in results) and composed.m == combo.t2 * inner1.m,
        metrics={"max_sd": max(r[0] for r in results), "min_bound": min(r[1] for r in results),
                 "max_eps0": max(r[2] for r in results), "eps1": eps1, "m": composed.m, "d": composed.d},
        thresholds={"m": combo.t2 * inner1.m},
        notes=["ε₁ is the worst measured error of the second-stage hash over random flat (4, 3)-sources"],
    )


@experiment("condenser", "Condenser collision probability and row weights", n=64, k=16, matrices=100,
            pairs_per_matrix=1000)
def _condenser(params, rng):
    cp = condenser_params(params["n"], params["k"])
    collisions = 0
    trials = 0
    clipped = []
    max_weight = 0
    in_range = 0
    unclipped = 0
    for _ in range(params["matrices"]):
        matrix = build_condenser_matrix(BitVector.random(cp.seed_length, rng), cp)
        clipped.append(matrix.clipped_fraction)
        max_weight = max(max_weight, max(matrix.weights))
        for w, c in zip(matrix.unclipped_weights, matrix.clipped):
            if not c:
                unclipped += 1
                in_range += 0.8 * cp.c <= w <= 1.2 * cp.c
        support = np.unique(rng.integers(0, (1 << cp.n) - 1, size=1 << cp.k, dtype=np.uint64, endpoint=True))
        x1 = rng.choice(support, size=params["pairs_per_matrix"])
        x2 = rng.choice(support, size=params["pairs_per_matrix"])
        collisions += int(matrix.kills_array(x1 ^ x2).sum())
        trials += params["pairs_per_matrix"]
    rate = collisions / trials
    sigma = math.sqrt(max(rate * (1 - rate), 1 / trials) / trials)
    clip_rate = float(np.mean(clipped))
    clip_sigma = math.sqrt(max(clip_rate * (1 - clip_rate), 1 / cp.t) / (cp.t * len(clipped)))
    bound = collision_bound(cp)
    return Outcome(
        passed=(rate <= bound + 3 * sigma and max_weight <= cp.clip and clip_rate <= 0.002 + 3 * clip_sigma),
        metrics={"collision_rate": rate, "sigma": sigma, "max_row_weight": max_weight,
                 "clipped_fraction": clip_rate, "in_weight_range": in_range / max(unclipped, 1),
                 "seed_length": cp.seed_length, "power": cp.power},
        thresholds={"collision_bound": bound, "clip": cp.clip, "clipped_fraction": 0.002},
        notes=["each matrix is paired with a fresh random flat source"],
        profile_hash=cp.params_hash(),
    )


@experiment("bernoulli", "Bernoulli simulation bias", max_bits=12, numerators_per_width=8)
def _bernoulli(params, rng):
    checked = 0
    worst = 0.0
    for t in range(1, params["max_bits"] + 1):
        top = 1 << t
        numerators = {0, top - 1} | {int(v) for v in rng.integers(0, top, size=params["numerators_per_width"])}
        for num in sorted(numerators):
            p = DyadicProbability(num, t)
            worst = max(worst, abs(bernoulli_bias_exact(p) - p.value))
            checked += 1
    return Outcome(passed=worst == 0.0, metrics={"cases": checked, "max_error": worst},
                   thresholds={"max_error": 0.0}, notes=[])


@experiment("bitfix", "Bit-fixing reduction t-wise independence", sources=5, free=12)
def _bitfix(params, rng):
    profile = verification_profile()
    graph = design_graph_for_profile(profile)
    witnesses = []
    for _ in range(params["sources"]):
        source = BitFixingSource.random(profile.n, params["free"], rng)
        witnesses.append(compute_nobf_witness(graph, source, profile.eps))
    passed = all(w.unique_neighbor_ok and w.exhaustive_ok and w.gamma == 0.0 for w in witnesses)
    return Outcome(
        passed=passed,
        metrics={"N": graph.left_count, "min_good": min(len(w.good) for w in witnesses),
                 "t_wise": min(w.t_wise for w in witnesses),
                 "subsets_checked": sum(w.subsets_checked for w in witnesses),
                 "max_gamma": max(w.gamma for w in witnesses)},
        thresholds={"gamma": 0.0},
        notes=[],
        profile_hash=profile.profile_hash(),
    )


@experiment("nisan", "Nisan generator against random ROBPs", w=4, k=3, programs=100, width=3, length=16,
            required=95)
def _nisan(params, rng):
    advantages = []
    for _ in range(params["programs"]):
        program = random_robp(params["width"], params["length"], rng)
        advantages.append(robp_distinguish(program, params["w"], params["k"]).advantage)
    threshold = 2.0 ** -params["w"]
    fooled = sum(a <= threshold for a in advantages)
    return Outcome(
        passed=fooled >= params["required"],
        metrics={"fooled": fooled, "max_advantage": max(advantages), "mean_advantage": float(np.mean(advantages))},
        thresholds={"advantage": threshold, "required": params["required"]},
        notes=[],
    )


@experiment("sd_axioms", "Statistical distance axioms on random tables", triples=1000, bits=3)
def _sd_axioms(params, rng):
    bits = params["bits"]
    violations = 0
    entropy_violations = 0
    for _ in range(params["triples"]):
        p, q, r = (random_distribution(bits, rng) for _ in range(3))
        if statistical_distance(p, r) > statistical_distance(p, q) + statistical_distance(q, r) + 1e-12:
            violations += 1
        table = rng.integers(0, 1 << (bits - 1), size=1 << bits)
        f = lambda v: int(table[v])  # noqa: E731
        if statistical_distance(p.push_forward(f, bits - 1), q.push_forward(f, bits - 1)) > \
                statistical_distance(p, q) + 1e-12:
            violations += 1
        if 2 * min_entropy(p) < collision_entropy(p) - 1e-9:
            entropy_violations += 1
    return Outcome(
        passed=violations == 0 and entropy_violations == 0,
        metrics={"sd_violations": violations, "entropy_violations": entropy_violations},
        thresholds={"violations": 0},
        notes=[],
    )
