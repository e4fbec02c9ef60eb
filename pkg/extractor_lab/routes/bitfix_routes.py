from fastapi import APIRouter, HTTPException

from models.requests import BitFixRequest, BitFixResponse
from routes.common import lab_http_error, server_error
from services.bitcore import BitVector
from services.bitfix import BitFixingSource, compute_nobf_witness, pipeline_for_length
from services.errors import LabError, LengthMismatchError

router = APIRouter(prefix="/bitfix", tags=["bit-fixing"])

# Exhaustive XOR checks enumerate 2^k assignments per subset
EXHAUSTIVE_FREE_LIMIT = 12


@router.post("/extract", response_model=BitFixResponse)
async def bitfix_extract(request: BitFixRequest):
    """Run the deterministic pipeline on x and report the source's NOBF witness."""
    try:
        pipeline = pipeline_for_length(request.n)
        fixed = BitVector.from_hex(request.fixed)
        x = BitVector.from_hex(request.x)
        if fixed.length != request.n:
            raise LengthMismatchError(f"fixed bits have length {fixed.length}, expected {request.n}")
        source = BitFixingSource(n=request.n, free=tuple(request.free), fixed_values=fixed.bits)
        witness = compute_nobf_witness(pipeline.graph, source, pipeline.profile.eps,
                                       exhaustive=source.k <= EXHAUSTIVE_FREE_LIMIT)
        return BitFixResponse(
            output=pipeline.extract(x).to_hex(),
            deterministic=pipeline.deterministic(x).to_hex(),
            witness=witness.to_dict(),
            pipeline=pipeline.describe(),
        )
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("extract from bit-fixing source", e)
