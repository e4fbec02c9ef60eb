import logging
from datetime import datetime

from fastapi import HTTPException, status

from services.errors import BudgetExceededError, InfeasibleError, LabError

logger = logging.getLogger(__name__)


def lab_http_error(error: LabError) -> HTTPException:
    """400 for malformed input, 422 when well-formed parameters cannot be served."""
    if isinstance(error, (BudgetExceededError, InfeasibleError)):
        code = status.HTTP_422_UNPROCESSABLE_ENTITY
    else:
        code = status.HTTP_400_BAD_REQUEST
    return HTTPException(status_code=code, detail=error.to_detail())


def server_error(action: str, error: Exception) -> HTTPException:
    logger.exception(f"{action} failed: {error}")
    return HTTPException(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        detail={
            "code": "INTERNAL_SERVER_ERROR",
            "message": f"Failed to {action}",
            "timestamp": datetime.utcnow().isoformat()
        }
    )
