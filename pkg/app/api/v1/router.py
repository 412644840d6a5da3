"""
API v1 router aggregation
"""
from fastapi import APIRouter
from app.api.v1.endpoints import health, solve

api_router = APIRouter()

# Include all endpoint routers
api_router.include_router(health.router, tags=["Health"])
api_router.include_router(solve.router, tags=["Solve"])
