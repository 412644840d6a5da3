"""
Pydantic models for request/response validation and for the documents the
command line prints
"""
import json
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from app.config import settings

SolveMode = Literal["classical", "nonrecursive", "hybrid"]


class HealthResponse(BaseModel):
    """Health check response model"""
    status: str
    version: str
    timestamp: datetime
    oracle_limit: int


class ErrorResponse(BaseModel):
    """Error response model"""
    detail: Any
    error: Optional[str] = None


class VersionedDocument(BaseModel):
    """Base for every structured output; serialized with sorted keys"""
    schema_version: str = Field(default_factory=lambda: settings.SCHEMA_VERSION)

    def to_json(self, exclude: Optional[set] = None) -> str:
        return json.dumps(self.model_dump(mode="json", exclude=exclude), sort_keys=True, indent=2)


# Solving


class SolveRequest(BaseModel):
    """Solve request model"""
    graph: str = Field(..., description="Instance text: 'p n m' header, 'e u v' edges, optional 'f idx' forced edges")
    mode: SolveMode = "classical"
    c: Optional[float] = Field(None, gt=0, description="Qubit fraction, required for hybrid mode")
    oracle_check: bool = False
    backend: Literal["classical", "reversible"] = "classical"
    threads: Optional[int] = Field(None, ge=1)


class SolveStats(BaseModel):
    nodes: int
    depth: int
    tau_sum: Optional[int] = None
    r: Optional[int] = None
    t: Optional[int] = None
    grover_estimate: Optional[int] = None
    peak_cells: Optional[int] = None
    oracle: Optional[bool] = None

    # hybrid runs only
    budget: Optional[int] = None
    s_tilde: Optional[int] = None
    handoff_depth: Optional[int] = None
    quantum_calls: Optional[int] = None
    refused_handoffs: Optional[int] = None
    modeled_cost: Optional[int] = None
    theorem_bound: Optional[float] = None


class SolveDocument(VersionedDocument):
    verdict: bool
    n: int
    m: int
    s: int
    mode: SolveMode
    stats: SolveStats
    timings: Dict[str, float] = Field(default_factory=dict)


# Analytics


class SpeedupRow(BaseModel):
    c: float
    n: int
    f_c: Optional[float] = None
    negative_gap: float
    s_tilde: Optional[int] = None


class CalibrationSummary(BaseModel):
    points: int
    inflation: float
    residual_rms: float
    coverage: float
    fitted: Dict[str, float]


class AnalyzeDocument(VersionedDocument):
    model: Dict[str, float]
    gamma: float
    gamma_q: float
    rows: List[SpeedupRow]
    calibration: Optional[CalibrationSummary] = None


class TraceDocument(VersionedDocument):
    n: int
    s: int
    r: int
    sizes: List[int]
    schedule: List[Dict[str, int]]
    witness: Optional[List[int]] = None
    cases: Optional[List[int]] = None
