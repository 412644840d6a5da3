"""
Solve and analyze endpoints
"""
from typing import List, Optional

from fastapi import APIRouter, Depends, Query

from app.dependencies import get_solve_service
from app.models.schemas import AnalyzeDocument, ErrorResponse, SolveDocument, SolveRequest
from app.services.solve_service import DEFAULT_ANALYZE_NS, SolveService, parse_c_grid
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

router = APIRouter()


# Solver endpoints are plain functions so FastAPI runs them in its thread pool.
@router.post("/solve", response_model=SolveDocument, responses={422: {"model": ErrorResponse}})
def solve_instance(
    request: SolveRequest,
    service: SolveService = Depends(get_solve_service),
):
    """
    Decide one forced cubic Hamiltonian cycle instance

    Args:
        request: Instance text and solver options

    Returns:
        Verdict, statistics and timings
    """
    if request.threads is not None:
        service.threads = request.threads
    if request.mode == "hybrid" and request.c is None:
        raise ValueError("hybrid mode needs a qubit fraction c")
    doc = service.solve_text(
        request.graph,
        mode=request.mode,
        c=request.c,
        oracle_check=request.oracle_check,
        backend=request.backend,
    )
    logger.info(f"solved n={doc.n} mode={doc.mode}: {doc.verdict}")
    return doc


@router.get("/analyze", response_model=AnalyzeDocument, responses={422: {"model": ErrorResponse}})
def analyze(
    c_grid: str = Query("0.01:0.5:50", description="start:stop:count or comma separated values"),
    ns: Optional[List[int]] = Query(None),
    service: SolveService = Depends(get_solve_service),
):
    """Speedup and threshold table under the default space model"""
    return service.analyze(parse_c_grid(c_grid), ns or DEFAULT_ANALYZE_NS)
