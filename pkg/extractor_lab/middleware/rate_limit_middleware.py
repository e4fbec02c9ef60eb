import time
from datetime import datetime
from typing import Any, Dict

from fastapi import HTTPException, Request, status
from fastapi.responses import JSONResponse
from slowapi import Limiter
from slowapi.errors import RateLimitExceeded
from slowapi.util import get_remote_address

from config import get_config


# In-memory rate limit store; one process, one window per client and path
rate_limit_store: Dict[str, Dict[str, Any]] = {}


def cleanup_expired_entries():
    """Drop entries whose window has closed."""
    current_time = time.time()
    expired_keys = [key for key, data in rate_limit_store.items() if data.get('reset_time', 0) < current_time]
    for key in expired_keys:
        del rate_limit_store[key]


class CustomRateLimiter:
    """Fixed-window limiter keyed by client address and request path."""

    def __init__(self, max_requests: int, window_seconds: int, message: str = "Rate limit exceeded"):
        self.max_requests = max_requests
        self.window_seconds = window_seconds
        self.message = message

    def __call__(self, request: Request):
        """Count the request and raise 429 once the window is full."""
        if len(rate_limit_store) > 1000:
            cleanup_expired_entries()

        client_ip = get_remote_address(request)
        key = f"{client_ip}:{request.url.path}"

        current_time = time.time()
        entry = rate_limit_store.get(key)
        if entry is None or entry['reset_time'] < current_time:
            rate_limit_store[key] = {'count': 1, 'reset_time': current_time + self.window_seconds}
        else:
            entry['count'] += 1

        count = rate_limit_store[key]['count']
        if count > self.max_requests:
            retry_after = max(1, int(rate_limit_store[key]['reset_time'] - current_time))
            raise HTTPException(
                status_code=status.HTTP_429_TOO_MANY_REQUESTS,
                detail={
                    "code": "RATE_LIMIT_EXCEEDED",
                    "message": self.message,
                    "retry_after": retry_after,
                    "timestamp": datetime.utcnow().isoformat()
                },
                headers={"Retry-After": str(retry_after)}
            )

        return True


# Experiment runs enumerate sources and seeds; LAB_EXPERIMENT_RATE per minute
experiment_rate_limiter = CustomRateLimiter(
    max_requests=get_config().experiment_rate,
    window_seconds=60,
    message="Too many experiment runs, please try again in a minute"
)

general_api_rate_limiter = CustomRateLimiter(
    max_requests=600,
    window_seconds=15 * 60,  # 15 minutes
    message="Too many API requests, please try again later"
)


# SlowAPI limiter for general use
limiter = Limiter(key_func=get_remote_address)


def rate_limit_exceeded_handler(request: Request, exc: RateLimitExceeded):
    """Render slowapi's RateLimitExceeded with the lab's error body."""
    return JSONResponse(
        status_code=status.HTTP_429_TOO_MANY_REQUESTS,
        content={
            "code": "RATE_LIMIT_EXCEEDED",
            "message": f"Rate limit exceeded: {exc.detail}",
            "timestamp": datetime.utcnow().isoformat()
        }
    )
