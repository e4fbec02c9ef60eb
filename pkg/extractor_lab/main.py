import logging
from datetime import datetime

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from slowapi.errors import RateLimitExceeded

# Load environment variables before the configuration is first read
load_dotenv()

from config import PRNG_VERSION, get_config, validate_config_on_startup  # noqa: E402
from middleware.rate_limit_middleware import (  # noqa: E402
    general_api_rate_limiter, limiter, rate_limit_exceeded_handler,
)
from routes.bitfix_routes import router as bitfix_router  # noqa: E402
from routes.design_routes import router as design_router  # noqa: E402
from routes.experiment_routes import router as experiment_router  # noqa: E402
from routes.extractor_routes import router as extractor_router  # noqa: E402
from routes.prg_routes import router as prg_router  # noqa: E402

logging.basicConfig(level=get_config().log_level,
                    format="%(asctime)s %(levelname)s %(name)s: %(message)s")
validate_config_on_startup()

app = FastAPI(
    title="Extractor Lab API",
    description="Low-locality seeded extractors, condensers, bit-fixing extractors and the generators built on them",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Add rate limiting
app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, rate_limit_exceeded_handler)


@app.middleware("http")
async def rate_limit_middleware(request: Request, call_next):
    """Apply general rate limiting to all API endpoints."""
    if request.url.path.startswith("/api/"):
        try:
            general_api_rate_limiter(request)
        except HTTPException as e:
            return JSONResponse(status_code=e.status_code, content=e.detail, headers=e.headers)

    response = await call_next(request)
    return response


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "OK",
        "timestamp": datetime.utcnow().isoformat()
    }


@app.get("/api")
async def api_info():
    """API information endpoint."""
    return {
        "message": "Extractor Lab API",
        "version": "1.0.0",
        "prng": PRNG_VERSION,
        "endpoints": {
            "extract": "/api/extract",
            "condense": "/api/condense",
            "audit_locality": "/api/audit-locality",
            "designs": "/api/designs",
            "verify_design": "/api/designs/verify",
            "nisan": "/api/prg/nisan",
            "rlf": "/api/prg/rlf",
            "nz": "/api/prg/nz",
            "bitfix": "/api/bitfix/extract",
            "experiments": "/api/experiments",
        },
        "timestamp": datetime.utcnow().isoformat()
    }


app.include_router(extractor_router, prefix="/api")
app.include_router(design_router, prefix="/api")
app.include_router(prg_router, prefix="/api")
app.include_router(bitfix_router, prefix="/api")
app.include_router(experiment_router, prefix="/api")


@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    """Structured details are returned as the body itself."""
    content = exc.detail if isinstance(exc.detail, dict) else {
        "code": "HTTP_ERROR",
        "message": str(exc.detail),
        "timestamp": datetime.utcnow().isoformat()
    }
    return JSONResponse(status_code=exc.status_code, content=content, headers=exc.headers)


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Global exception handler for unhandled errors."""
    logging.getLogger(__name__).exception("Unhandled error")
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={
            "code": "INTERNAL_SERVER_ERROR",
            "message": "An unexpected error occurred",
            "timestamp": datetime.utcnow().isoformat()
        }
    )


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=get_config().port,
        reload=True
    )
