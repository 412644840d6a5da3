"""
Shared dependencies for FastAPI routes
"""
from functools import lru_cache

from fastapi import Depends

from app.config import Settings, settings
from app.services.solve_service import SolveService


@lru_cache()
def get_settings() -> Settings:
    return settings


def get_solve_service(cfg: Settings = Depends(get_settings)) -> SolveService:
    """
    Dependency providing a solve service with the configured thread count

    Returns:
        SolveService instance
    """
    return SolveService(threads=cfg.DEFAULT_THREADS)
