from fastapi import APIRouter, HTTPException

from models.requests import NisanRequest, NisanResponse, NZRequest, PRGResponse, RLFRequest
from routes.common import lab_http_error, server_error
from services.applications import nz_prg, parallel_rlf
from services.bitcore import BitVector
from services.descriptors import build_from_node
from services.errors import LabError
from services.nisan_prg import NisanSeed, nisan_blocks, nisan_expand

router = APIRouter(prefix="/prg", tags=["pseudorandom-generators"])


@router.post("/nisan", response_model=NisanResponse)
async def nisan(request: NisanRequest):
    """Expand a packed Nisan seed to w·2^k bits."""
    try:
        seed = NisanSeed.from_bits(BitVector.from_hex(request.seed), request.w)
        return NisanResponse(output=nisan_expand(seed).to_hex(), blocks=nisan_blocks(seed))
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("expand Nisan seed", e)


@router.post("/rlf", response_model=PRGResponse)
async def random_local_function(request: RLFRequest):
    """f_{G,Q}(x^{(1)}) ∘ ... ∘ f_{G,Q}(x^{(t)})."""
    try:
        blocks = [BitVector.from_hex(x) for x in request.inputs]
        output = parallel_rlf(request.hypergraph, request.predicate, blocks)
        return PRGResponse(output=output.to_hex(), length=output.length)
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("evaluate local function", e)


@router.post("/nz", response_model=PRGResponse)
async def nisan_zuckerman(request: NZRequest):
    """Nisan–Zuckerman expansion with the extractor rebuilt from its construction tree."""
    try:
        ext = build_from_node(request.construction)
        output = nz_prg(BitVector.from_hex(request.seed), ext, request.rounds)
        return PRGResponse(output=output.to_hex(), length=output.length)
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("run Nisan-Zuckerman generator", e)
