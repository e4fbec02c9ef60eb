from fastapi import APIRouter, HTTPException, Request

from middleware.rate_limit_middleware import limiter
from models.artifacts import DesignArtifact
from models.requests import DesignRequest, DesignVerifyResponse
from routes.common import lab_http_error, server_error
from services.designs import load_design_artifact
from services.errors import LabError, VerificationError
from services.families import build_family

router = APIRouter(prefix="/designs", tags=["designs"])


@router.post("", response_model=DesignArtifact)
@limiter.limit("30/minute")
async def generate_design(request: Request, payload: DesignRequest):
    """Generate a design, weak design or design-extractor graph as a sealed artifact."""
    try:
        return build_family(payload.kind, payload.params).to_artifact()
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("generate design", e)


@router.post("/verify", response_model=DesignVerifyResponse)
async def verify_design(artifact: DesignArtifact):
    """Re-verify an artifact's hash and every bound it claims."""
    try:
        load_design_artifact(artifact)
        return DesignVerifyResponse(valid=True, content_hash=artifact.compute_hash())
    except VerificationError as e:
        return DesignVerifyResponse(valid=False, content_hash=artifact.compute_hash(), message=e.message)
    except KeyError as e:
        return DesignVerifyResponse(valid=False, content_hash=artifact.compute_hash(),
                                    message=f"artifact is missing parameter {e}")
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error("verify design", e)
