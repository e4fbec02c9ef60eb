from typing import List

from fastapi import APIRouter, HTTPException, Request

from config import get_config
from middleware.rate_limit_middleware import experiment_rate_limiter
from models.experiments import ExperimentConfig, ExperimentInfo, ExperimentReport
from models.requests import ExperimentRunRequest
from routes.common import lab_http_error, server_error
from services.errors import LabError
from services.experiments import list_experiments, run_experiment

router = APIRouter(prefix="/experiments", tags=["experiments"])


@router.get("", response_model=List[ExperimentInfo])
async def get_experiments():
    """Registered experiments with their default parameters."""
    return list_experiments()


@router.post("/{name}/run", response_model=ExperimentReport)
def run(name: str, payload: ExperimentRunRequest, request: Request):
    """Run one experiment; rate limited to LAB_EXPERIMENT_RATE runs per minute."""
    experiment_rate_limiter(request)
    try:
        prng_seed = get_config().prng_seed if payload.prng_seed is None else payload.prng_seed
        return run_experiment(ExperimentConfig(name=name, prng_seed=prng_seed, params=payload.params))
    except LabError as e:
        raise lab_http_error(e)
    except HTTPException:
        raise
    except Exception as e:
        raise server_error(f"run experiment {name}", e)
