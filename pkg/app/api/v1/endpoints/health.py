"""
Health check endpoint
"""
from datetime import datetime, timezone

from fastapi import APIRouter, Depends

from app.config import Settings
from app.dependencies import get_settings
from app.models.schemas import HealthResponse

router = APIRouter()


@router.get("/health", response_model=HealthResponse)
async def health_check(cfg: Settings = Depends(get_settings)):
    """
    Health check endpoint

    Returns:
        Version and the brute-force oracle limit in effect
    """
    return HealthResponse(
        status="healthy",
        version=cfg.APP_VERSION,
        timestamp=datetime.now(timezone.utc),
        oracle_limit=cfg.HYBRID_FCHC_ORACLE_LIMIT,
    )
