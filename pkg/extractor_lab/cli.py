"""
Command-line front end of the extractor lab.

Bit vectors are written as "<length>:<hex>"; construction trees, hypergraphs,
predicates and source specs are JSON files. Results are printed as JSON and
also written to --out when given.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

from config import get_config  # noqa: E402
from models.artifacts import ConstructionNode, DesignArtifact, DesignKind  # noqa: E402
from models.experiments import ExperimentConfig, ExperimentReport  # noqa: E402
from models.hypergraph import Hypergraph, Predicate  # noqa: E402
from services.applications import nz_prg, parallel_rlf  # noqa: E402
from services.bitcore import BitVector  # noqa: E402
from services.bitfix import BitFixingSource, compute_nobf_witness, pipeline_for_length  # noqa: E402
from services.condenser import condense, condenser_params, export_matrix  # noqa: E402
from services.descriptors import build_from_node  # noqa: E402
from services.designs import load_design_artifact  # noqa: E402
from services.errors import LabError, LengthMismatchError  # noqa: E402
from services.experiments import list_experiments, run_experiment, write_csv  # noqa: E402
from services.families import build_family  # noqa: E402
from services.harness import locality_audit, make_rng  # noqa: E402
from services.nisan_prg import NisanSeed, nisan_expand  # noqa: E402

logger = logging.getLogger("extractor_lab.cli")


def _load_json(path: str) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _emit(result: Any, out: Optional[str] = None):
    text = json.dumps(result, indent=2, sort_keys=True, default=str)
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")


def _parse_param(text: str) -> tuple:
    key, sep, raw = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


# Commands


def cmd_extract(args) -> Dict[str, Any]:
    ext = build_from_node(ConstructionNode.model_validate(_load_json(args.construction)))
    output = ext(BitVector.from_hex(args.x), BitVector.from_hex(args.seed))
    return {"output": output.to_hex(), "locality": ext.locality_claim, "summary": ext.summary()}


def cmd_condense(args) -> Dict[str, Any]:
    params = condenser_params(args.n, args.k, compressed=not args.uncompressed, lambda_target=args.lambda_target)
    if args.seed:
        seed = BitVector.from_hex(args.seed)
    else:
        seed = BitVector.random(params.seed_length, make_rng(args.prng_seed))
    output = condense(BitVector.from_hex(args.x), seed, params)
    if args.export_matrix:
        with open(args.export_matrix, "w") as fh:
            fh.write(export_matrix(seed, params).model_dump_json(indent=2))
        logger.info(f"Wrote condenser matrix to {args.export_matrix}")
    return {"output": output.to_hex(), "seed": seed.to_hex(), "params": params.model_dump()}


def cmd_bitfix_extract(args) -> Dict[str, Any]:
    source_json = _load_json(args.source)
    n = int(source_json["n"])
    fixed = BitVector.from_hex(source_json["fixed"]) if "fixed" in source_json else BitVector.zeros(n)
    if fixed.length != n:
        raise LengthMismatchError(f"fixed bits have length {fixed.length}, expected {n}")
    source = BitFixingSource(n=n, free=tuple(source_json["free"]), fixed_values=fixed.bits)
    pipeline = pipeline_for_length(n)
    x = BitVector.from_hex(args.x) if args.x else source.sample(make_rng(args.prng_seed))
    witness = compute_nobf_witness(pipeline.graph, source, pipeline.profile.eps, exhaustive=not args.no_exhaustive)
    return {
        "x": x.to_hex(),
        "output": pipeline.extract(x).to_hex(),
        "deterministic": pipeline.deterministic(x).to_hex(),
        "witness": witness.to_dict(),
        "pipeline": pipeline.describe(),
    }


def cmd_gen_design(args) -> Dict[str, Any]:
    params = json.loads(args.params)
    artifact = build_family(DesignKind(args.kind), params).to_artifact()
    with open(args.out, "w") as fh:
        fh.write(artifact.model_dump_json(indent=2))
    # Re-read what was written; the family is rebuilt and every bound re-checked
    load_design_artifact(DesignArtifact.model_validate(_load_json(args.out)))
    return {"kind": artifact.kind.value, "params": artifact.params, "sets": len(artifact.sets),
            "content_hash": artifact.content_hash, "path": args.out, "verified": True}


def cmd_prg(args) -> Optional[Dict[str, Any]]:
    if args.generator == "nisan":
        output = nisan_expand(NisanSeed.from_bits(BitVector.from_hex(args.seed), args.w))
    elif args.generator == "rlf":
        g = Hypergraph.model_validate(_load_json(args.graph))
        q = Predicate.model_validate(_load_json(args.predicate))
        output = parallel_rlf(g, q, [BitVector.from_hex(x) for x in args.inputs])
    else:
        ext = build_from_node(ConstructionNode.model_validate(_load_json(args.construction)))
        output = nz_prg(BitVector.from_hex(args.seed), ext, args.rounds)
    if args.out:
        return {"output": output.to_hex(), "length": output.length}
    sys.stdout.write(output.to_hex() + "\n")
    return None


def cmd_audit_locality(args) -> Dict[str, Any]:
    ext = build_from_node(ConstructionNode.model_validate(_load_json(args.construction)))
    report = locality_audit(ext, BitVector.from_hex(args.seed), trials=args.trials, rng=make_rng(args.prng_seed))
    return report.to_dict()


def cmd_experiment(args) -> Optional[Any]:
    if args.action == "list":
        return [info.model_dump() for info in list_experiments()]
    if args.action == "run":
        prng_seed = get_config().prng_seed if args.prng_seed is None else args.prng_seed
        reports = [run_experiment(ExperimentConfig(name=name, prng_seed=prng_seed, params=dict(args.param or [])))
                   for name in args.names]
        if args.csv:
            write_csv(reports, args.csv)
        result = [r.model_dump(mode="json") for r in reports]
        return result[0] if len(result) == 1 else result
    reports = []
    for path in args.reports:
        data = _load_json(path)
        items = data if isinstance(data, list) else [data]
        reports.extend(ExperimentReport.model_validate(item) for item in items)
    if args.csv:
        write_csv(reports, args.csv)
    return {
        "passed": all(r.passed for r in reports),
        "experiments": [{"name": r.name, "passed": r.passed, "config_hash": r.config_hash,
                         "elapsed_seconds": r.elapsed_seconds} for r in reports],
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extractor-lab", description="Low-locality extractors and generators.")
    parser.add_argument("--log-level", default=None, help="Overrides LAB_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="Evaluate a construction tree on (x, seed)")
    p.add_argument("--construction", required=True, help="Construction tree JSON file")
    p.add_argument("--x", required=True)
    p.add_argument("--seed", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("condense", help="Apply the sparse condenser")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--seed", help="Condenser seed; drawn from --prng-seed when absent")
    p.add_argument("--prng-seed", type=int)
    p.add_argument("--uncompressed", action="store_true", help="Walk on full r0-bit labels")
    p.add_argument("--lambda-target", type=float, default=0.01)
    p.add_argument("--export-matrix", help="Write the generated matrix artifact here")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_condense)

    p = sub.add_parser("bitfix-extract", help="Deterministic extraction from a bit-fixing source")
    p.add_argument("--source", required=True, help="JSON {n, free, fixed}")
    p.add_argument("--x", help="Source string; sampled from the source when absent")
    p.add_argument("--prng-seed", type=int)
    p.add_argument("--no-exhaustive", action="store_true", help="Skip the exhaustive XOR check")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_bitfix_extract)

    p = sub.add_parser("gen-design", help="Generate and re-verify a set-family artifact")
    p.add_argument("--kind", required=True, choices=[k.value for k in DesignKind])
    p.add_argument("--params", required=True, help='JSON object, e.g. \'{"n": 16, "m": 8, "k": 2, "l": 4}\'')
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_gen_design)

    p = sub.add_parser("prg", help="Run a pseudorandom generator")
    prg_sub = p.add_subparsers(dest="generator", required=True)
    q = prg_sub.add_parser("nisan")
    q.add_argument("--w", type=int, required=True)
    q.add_argument("--seed", required=True)
    q.add_argument("--out")
    q = prg_sub.add_parser("rlf")
    q.add_argument("--graph", required=True, help="Hypergraph JSON file")
    q.add_argument("--predicate", required=True, help="Predicate JSON file")
    q.add_argument("--inputs", nargs="+", required=True)
    q.add_argument("--out")
    q = prg_sub.add_parser("nz")
    q.add_argument("--construction", required=True)
    q.add_argument("--seed", required=True)
    q.add_argument("--rounds", type=int, required=True)
    q.add_argument("--out")
    p.set_defaults(handler=cmd_prg)

    p = sub.add_parser("audit-locality", help="Toggling audit of output dependencies")
    p.add_argument("--construction", required=True)
    p.add_argument("--seed", required=True)
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--prng-seed", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_audit_locality)

    p = sub.add_parser("experiment", help="Run or summarize experiments")
    exp_sub = p.add_subparsers(dest="action", required=True)
    q = exp_sub.add_parser("list")
    q.add_argument("--out")
    q = exp_sub.add_parser("run")
    q.add_argument("names", nargs="+")
    q.add_argument("--param", action="append", type=_parse_param, help="Override as key=value (JSON values)")
    q.add_argument("--prng-seed", type=int)
    q.add_argument("--csv")
    q.add_argument("--out")
    q = exp_sub.add_parser("report")
    q.add_argument("reports", nargs="+", help="Report JSON files")
    q.add_argument("--csv")
    q.add_argument("--out")
    p.set_defaults(handler=cmd_experiment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(args.log_level or get_config().log_level).upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.handler(args)
    except LabError as e:
        print(f"error [{e.error_type}]: {e.message}", file=sys.stderr)
        return 2
    except ValidationError as e:
        print(f"error [VALIDATION_ERROR]: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error [INPUT_ERROR]: {e}", file=sys.stderr)
        return 2
    if result is not None:
        _emit(result, getattr(args, "out", None))
    return 0


if __name__ == "__main__":
    sys.exit(main())
