"""
FastAPI application entry point
"""
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from starlette.exceptions import HTTPException as StarletteHTTPException

from app.api.v1.router import api_router
from app.config import settings
from app.exceptions import FchcError
from app.middleware.error_handler import (
    general_exception_handler,
    http_exception_handler,
    solver_exception_handler,
    validation_exception_handler,
)
from app.middleware.logging import LoggingMiddleware
from app.services.hybrid import default_model
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

SOLVE_MODES = ["classical", "nonrecursive", "hybrid"]


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Validate the default space model once and log the solver limits

    Args:
        app: FastAPI application instance
    """
    model = default_model()
    logger.info(f"{settings.APP_NAME} v{settings.APP_VERSION} ({settings.ENVIRONMENT})")
    logger.info(
        f"oracle n<={settings.HYBRID_FCHC_ORACLE_LIMIT}, exhaustive r<={settings.EXHAUSTIVE_SEARCH_LIMIT}, "
        f"space model A={model.A} B={model.B} a={model.a}, hybrid needs c<{model.f_max:.4f}"
    )
    yield
    logger.info("stopped")


app = FastAPI(
    title=settings.APP_NAME,
    version=settings.APP_VERSION,
    description="Classical, nonrecursive quantum and hybrid solvers for forced cubic Hamiltonian cycle",
    debug=settings.DEBUG,
    lifespan=lifespan,
)

# Handlers are matched by class; FchcError before the ValueError catch-all for bad parameters
app.add_exception_handler(RequestValidationError, validation_exception_handler)
app.add_exception_handler(FchcError, solver_exception_handler)
app.add_exception_handler(ValueError, solver_exception_handler)
app.add_exception_handler(StarletteHTTPException, http_exception_handler)
app.add_exception_handler(Exception, general_exception_handler)

app.add_middleware(LoggingMiddleware)
app.include_router(api_router, prefix=settings.API_V1_PREFIX)


@app.get("/")
async def root():
    """Service index"""
    prefix = settings.API_V1_PREFIX
    return {
        "name": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "modes": SOLVE_MODES,
        "endpoints": {
            "health": f"{prefix}/health",
            "solve": f"{prefix}/solve",
            "analyze": f"{prefix}/analyze",
        },
        "docs": "/docs",
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host=settings.HOST, port=settings.PORT, reload=settings.DEBUG)
