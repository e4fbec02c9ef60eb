from fastapi import APIRouter, HTTPException

from models.requests import (
    CondenseRequest, CondenseResponse, ExtractRequest, ExtractResponse, LocalityRequest, LocalityResponse,
)
from routes.common import lab_http_error, server_error
from services.bitcore import BitVector
from services.condenser import condense, condenser_matrix, condenser_params
from services.descriptors import build_from_node
from services.errors import LabError
from services.harness import locality_audit, make_rng

router = APIRouter(tags=["extractors"])


@router.post("/extract", response_model=ExtractResponse)
async def extract(request: ExtractRequest):
    """Rebuild a construction tree and evaluate it on (x, seed)."""
    try:
        ext = build_from_node(request.construction)
        output = ext(BitVector.from_hex(request.x), BitVector.from_hex(request.seed))
        return ExtractResponse(output=output.to_hex(), locality=ext.locality_claim, summary=ext.summary())
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("evaluate extractor", e)


@router.post("/condense", response_model=CondenseResponse)
async def condense_source(request: CondenseRequest):
    """M′x for the matrix generated by `seed` (drawn from prng_seed when absent)."""
    try:
        params = condenser_params(request.n, request.k, compressed=request.compressed,
                                  lambda_target=request.lambda_target)
        if request.seed is None:
            seed = BitVector.random(params.seed_length, make_rng(request.prng_seed))
        else:
            seed = BitVector.from_hex(request.seed)
        output = condense(BitVector.from_hex(request.x), seed, params)
        matrix = condenser_matrix(seed, params)
        return CondenseResponse(
            output=output.to_hex(),
            seed=seed.to_hex(),
            rows=[list(row) for row in matrix.rows],
            clipped=list(matrix.clipped),
            clipped_fraction=matrix.clipped_fraction,
        )
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("condense source", e)


@router.post("/audit-locality", response_model=LocalityResponse)
async def audit_locality(request: LocalityRequest):
    """Toggling audit of every output bit for one seed."""
    try:
        ext = build_from_node(request.construction)
        report = locality_audit(ext, BitVector.from_hex(request.seed), trials=request.trials,
                                rng=make_rng(request.prng_seed))
        return LocalityResponse(**report.to_dict())
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("audit locality", e)
