"""
Hybrid scheduler: branch classically until the effective size drops to the
crossover threshold, then hand the subinstance to the reversible search.

Also holds the analytic side: the qubit-cost model G(s, n), its inverse via
the lower branch of the Lambert W function, speedup exponents and the
recurrence solver for branching frameworks.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.optimize import bisect, nnls
from scipy.special import logsumexp

from app.config import settings
from app.exceptions import DomainError, InsufficientData, TooSmallBudget
from app.services.eppstein import (
    Handoff,
    RunStats,
    Solver,
    select_branch_edge,
    terminal_check,
    triv_red,
)
from app.services.graph import FchcInstance, size_metric
from app.services.qsim import enumerate_search, qubit_accounting
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

BRANCH_POINT = -1.0 / math.e
HALLEY_MAX_ITER = 100


# Lambert W, lower branch


def _branch_series(q: float) -> float:
    """Expansion of W_{-1} around -1/e in p = -sqrt(2(e x + 1))"""
    p = -math.sqrt(2.0 * max(q, 0.0))
    return -1.0 + p - p * p / 3.0 + 11.0 * p ** 3 / 72.0


def lambert_w_m1(x: float) -> float:
    """
    Lower real branch W_{-1}(x) for x in [-1/e, 0)

    Series initialization near the branch point, asymptotic log form
    elsewhere, refined by Halley's method.

    Raises:
        DomainError: x outside [-1/e, 0)
    """
    if not math.isfinite(x) or x >= 0.0 or x < BRANCH_POINT - 1e-15:
        raise DomainError(f"W_-1 is real only on [-1/e, 0), got {x!r}")
    q = math.e * x + 1.0
    if q < 1e-10:
        return _branch_series(q)

    if x < -0.25:
        w = _branch_series(q)
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    for _ in range(HALLEY_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) < 0.7e-16 * (2.0 + abs(w)):
            break
    return w


def _w_m1_from_log(log_neg_x: float) -> float:
    """W_{-1}(x) given ln(-x), for arguments too small to hold in a float"""
    w = log_neg_x - math.log(-log_neg_x)
    for _ in range(HALLEY_MAX_ITER):
        # Newton on w + ln(-w) = ln(-x)
        step = (w + math.log(-w) - log_neg_x) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) < 1e-15 * abs(w):
            break
    return w


# Cost model


class SpaceModel(BaseModel):
    """Qubit cost G(s, n) = A s ln(n/s) + B s + a ln n"""

    A: float = Field(ge=0.0)
    B: float = Field(ge=0.0)
    a: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _nonzero(self) -> "SpaceModel":
        if self.A <= 0.0 and self.B <= 0.0:
            raise ValueError("A or B must be positive")
        return self

    @property
    def lam_tilde(self) -> float:
        """Where F stops increasing; infinite for a linear model"""
        if self.A == 0.0:
            return math.inf
        return math.exp(self.B / self.A - 1.0)

    @property
    def f_max(self) -> float:
        """F(lam_tilde), the supremum of admissible qubit fractions"""
        if self.A == 0.0:
            return math.inf
        return self.A * self.lam_tilde

    def G(self, s: float, n: float) -> float:
        s_term = self.A * s * math.log(n / s) if s > 0 else 0.0
        return s_term + self.B * s + self.a * math.log(n)

    def F(self, lam: float) -> float:
        if lam <= 0.0:
            return 0.0
        return self.A * lam * math.log(1.0 / lam) + self.B * lam

    def F_prime(self, lam: float) -> float:
        return self.A * math.log(1.0 / lam) - self.A + self.B

    def save(self, path: Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: Path) -> "SpaceModel":
        return cls.model_validate_json(Path(path).read_text())


def default_model() -> SpaceModel:
    """The calibrated model file when one is configured, else the constants from settings"""
    if settings.SPACE_MODEL_FILE:
        return SpaceModel.load(Path(settings.SPACE_MODEL_FILE))
    return SpaceModel(A=settings.SPACE_MODEL_A, B=settings.SPACE_MODEL_B, a=settings.SPACE_MODEL_LOG)


class HybridConfig(BaseModel):
    c: float = Field(gt=0.0)
    gamma: float = Field(default_factory=lambda: settings.GAMMA_CLASSICAL)
    gamma_q: float = Field(default_factory=lambda: settings.GAMMA_QUANTUM)
    strict: bool = False

    @model_validator(mode="after")
    def _ordered_exponents(self) -> "HybridConfig":
        if not self.gamma_q < self.gamma:
            raise ValueError(f"gamma_q={self.gamma_q} must be below gamma={self.gamma}")
        return self

    def budget(self, n: int) -> int:
        """M = floor(c n)"""
        return math.floor(self.c * n)

    def check_model(self, model: SpaceModel) -> None:
        if not self.c < model.f_max:
            raise DomainError(f"c={self.c} is not below F(lam_tilde)={model.f_max}")


def f_inverse(c: float, model: SpaceModel) -> float:
    """lambda with F(lambda) = c on the increasing part of F"""
    if not 0.0 < c < model.f_max:
        raise DomainError(f"F^-1 defined on (0, {model.f_max}), got {c}")
    if model.A == 0.0:
        return c / model.B
    log_neg_x = math.log(c / model.A) - model.B / model.A
    x = -math.exp(log_neg_x)
    if x == 0.0:
        w = _w_m1_from_log(log_neg_x)
    else:
        w = lambert_w_m1(max(x, BRANCH_POINT))
    return -c / (model.A * w)


def threshold(cfg: HybridConfig, model: SpaceModel, n: int) -> int:
    """
    Crossover size s~ = floor(n F^-1(c - a ln n / n))

    Raises:
        TooSmallBudget: c n does not exceed the fixed a ln n term
    """
    remaining = cfg.c - model.a * math.log(n) / n
    if remaining <= 0.0:
        raise TooSmallBudget(
            f"budget c*n={cfg.c * n:.3f} does not exceed a*ln(n)={model.a * math.log(n):.3f}"
        )
    s_tilde = math.floor(n * f_inverse(remaining, model))
    while s_tilde > 0 and model.G(s_tilde, n) > cfg.c * n:
        s_tilde -= 1
    return s_tilde


def speedup_exponent(cfg: HybridConfig, model: SpaceModel) -> float:
    """f(c) = (gamma - gamma_q) F^-1(c)"""
    return (cfg.gamma - cfg.gamma_q) * f_inverse(cfg.c, model)


def negative_model_exponent(c: float, n: int, gamma: Optional[float] = None) -> float:
    """Exponent left when the qubit cost grows like s log n: gamma - c / log2 n"""
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n}")
    gamma = settings.GAMMA_CLASSICAL if gamma is None else gamma
    return gamma - c / math.log2(n)


def derivative_lower_bound(model: SpaceModel, lam: float, points: int = 2048) -> float:
    """min F' over (0, lam] on a geometric grid; must stay positive"""
    if not 0.0 < lam < model.lam_tilde:
        raise DomainError(f"lambda={lam} outside (0, {model.lam_tilde})")
    grid = np.geomspace(lam * 1e-12, lam, points)
    kappa = float(np.min(model.A * np.log(1.0 / grid) - model.A + model.B))
    if kappa <= 0.0:
        raise DomainError(f"F' is not bounded away from zero on (0, {lam}]: {kappa}")
    return kappa


def theorem_bound(cfg: HybridConfig, model: SpaceModel, s: int, n: int) -> float:
    """max(2^(gamma s - f(c) n), 2^(gamma_q s))"""
    f_c = speedup_exponent(cfg, model)
    return max(2.0 ** (cfg.gamma * s - f_c * n), 2.0 ** (cfg.gamma_q * s))


# Branching frameworks


class Branch(BaseModel):
    decrease: int = Field(ge=1)
    count: int = Field(default=1, ge=1)


class FrameworkSpec(BaseModel):
    """Per case, the size decrease of each branch, with repeated branches compressed"""

    cases: List[List[Branch]] = Field(min_length=1)

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[int]]) -> "FrameworkSpec":
        """Rows are branches, columns are cases; a 0 entry means the case has fewer branches"""
        cols = len(rows[0])
        if any(len(row) != cols for row in rows):
            raise ValueError("branch matrix rows differ in length")
        for row in rows:
            if any(v < 0 for v in row):
                raise ValueError("branch decreases must be non-negative")
        cases = [
            [Branch(decrease=row[j]) for row in rows if row[j] > 0]
            for j in range(cols)
        ]
        if any(not case for case in cases):
            raise ValueError("every case needs at least one branch")
        return cls(cases=cases)


def _case_exponent(case: List[Branch]) -> float:
    """Root of sum count * 2^(-decrease x) = 1 over x >= 0"""
    log_counts = np.log([b.count for b in case], dtype=float)
    decreases = np.array([b.decrease for b in case], dtype=float)

    def log_sum(x: float) -> float:
        return float(logsumexp(log_counts - decreases * x * math.log(2.0)))

    if log_sum(0.0) <= 0.0:
        return 0.0
    hi = 1.0
    while log_sum(hi) > 0.0:
        hi *= 2.0
    if log_sum(hi) == 0.0:
        return hi
    return bisect(log_sum, 0.0, hi, xtol=1e-13, maxiter=500)


def recurrence_exponent(framework: FrameworkSpec) -> float:
    return max(_case_exponent(case) for case in framework.cases)


# Scheduler


@dataclass
class HybridVerdict:
    result: bool
    stats: RunStats
    n: int
    budget: int
    s_tilde: Optional[int]
    modeled_cost: int
    bound: Optional[float] = None

    @property
    def classical_nodes(self) -> int:
        return self.stats.nodes_expanded - len(self.stats.handoffs)

    @property
    def quantum_calls(self) -> int:
        return len(self.stats.handoffs)

    @property
    def handoff_depth(self) -> Optional[int]:
        if not self.stats.handoffs:
            return None
        return min(h.depth for h in self.stats.handoffs)


class HybridSolver(Solver):
    """Branching solver that hands subinstances of size <= s~ to the reversible search"""

    def __init__(
        self,
        cfg: HybridConfig,
        model: SpaceModel,
        check_2c: bool = True,
        threads: Optional[int] = None,
    ):
        super().__init__(check_2c=check_2c, exhaustive=False, threads=threads)
        self.cfg = cfg
        self.model = model
        self.budget = 0
        self.s_tilde: Optional[int] = None

    def delegate(self, state: FchcInstance, depth: int, stats: RunStats) -> Optional[bool]:
        if self.s_tilde is None:
            return None
        s = size_metric(state)
        if s > self.s_tilde:
            return None
        space = qubit_accounting(state).total_bits
        if space > self.budget:
            stats.refused_handoffs += 1
            logger.debug(f"handoff refused at depth {depth}: s={s} needs {space} bits > M={self.budget}")
            return None
        report = enumerate_search(state, mode="pruned", backend="classical")
        stats.handoffs.append(
            Handoff(depth, s, report.r, space, report.found, report.grover_estimate)
        )
        return report.found

    def solve(self, inst: FchcInstance) -> HybridVerdict:
        n = inst.n
        self.cfg.check_model(self.model)
        self.budget = self.cfg.budget(n)
        try:
            self.s_tilde = threshold(self.cfg, self.model, n)
        except TooSmallBudget as exc:
            if self.cfg.strict:
                raise
            logger.warning(f"{exc}; running classically")
            self.s_tilde = None

        verdict = self.run(inst)
        stats = verdict.stats
        cost = stats.nodes_expanded + sum(h.grover_estimate for h in stats.handoffs)
        result = HybridVerdict(
            result=verdict.result,
            stats=stats,
            n=n,
            budget=self.budget,
            s_tilde=self.s_tilde,
            modeled_cost=cost,
            bound=theorem_bound(self.cfg, self.model, stats.s_root, n),
        )
        logger.info(
            f"hybrid n={n} c={self.cfg.c} M={self.budget} s~={self.s_tilde}: "
            f"result={result.result} classical={result.classical_nodes} "
            f"handoffs={result.quantum_calls} refused={stats.refused_handoffs}"
        )
        return result


def hybrid_solve(
    inst: FchcInstance,
    cfg: HybridConfig,
    model: Optional[SpaceModel] = None,
    threads: Optional[int] = None,
) -> HybridVerdict:
    return HybridSolver(cfg, model or default_model(), threads=threads).solve(inst)


# Calibration


@dataclass(frozen=True)
class SpacePoint:
    s: int
    n: int
    bits: float


@dataclass
class Calibration:
    model: SpaceModel
    fitted: SpaceModel
    inflation: float
    residual_rms: float
    coverage: float
    points: List[SpacePoint] = field(default_factory=list)


def _design(points: Sequence[SpacePoint]) -> np.ndarray:
    rows = [
        (p.s * math.log(p.n / p.s) if p.s > 0 else 0.0, float(p.s), math.log(p.n))
        for p in points
    ]
    return np.array(rows, dtype=float)


def fit_space_model(points: Sequence[SpacePoint], coverage: Optional[float] = None) -> Calibration:
    """
    Non-negative least squares fit of (A, B, a), then a uniform inflation so
    the model covers the requested share of the measured points.

    Raises:
        InsufficientData: too few points, or points that cannot separate the three terms
    """
    coverage = settings.CALIBRATION_COVERAGE if coverage is None else coverage
    if len(points) < 3:
        raise InsufficientData(f"need at least 3 measurements, got {len(points)}")
    design = _design(points)
    if np.linalg.matrix_rank(design) < 3:
        raise InsufficientData("measurements do not vary enough in s and n")
    measured = np.array([p.bits for p in points], dtype=float)
    coef, residual = nnls(design, measured)
    A, B, a = (float(v) for v in coef)
    if A <= 0.0 and B <= 0.0:
        raise InsufficientData("fit has no size-dependent term")
    fitted = SpaceModel(A=A, B=B, a=a)

    predicted = design @ coef
    if np.any((predicted <= 0.0) & (measured > 0.0)):
        raise InsufficientData("fit predicts no space for a measured point")
    ratios = np.where(predicted > 0.0, measured / np.where(predicted > 0.0, predicted, 1.0), 0.0)
    kappa = max(1.0, float(np.quantile(ratios, coverage, method="higher")))
    model = SpaceModel(A=A * kappa, B=B * kappa, a=a * kappa)
    covered = float(np.mean(design @ (coef * kappa) >= measured * (1.0 - 1e-12)))
    logger.info(
        f"calibrated on {len(points)} points: A={A:.4f} B={B:.4f} a={a:.4f} "
        f"inflation={kappa:.4f} coverage={covered:.3f}"
    )
    return Calibration(
        model=model,
        fitted=fitted,
        inflation=kappa,
        residual_rms=float(residual / math.sqrt(len(points))),
        coverage=covered,
        points=list(points),
    )


def branch_states(inst: FchcInstance, limit: int) -> List[FchcInstance]:
    """Reduced, non-terminal subinstances in breadth-first order, root first"""
    root, _ = triv_red(inst)
    states: List[FchcInstance] = []
    queue = deque([root])
    while queue and len(states) < limit:
        state = queue.popleft()
        if terminal_check(state) is not None:
            continue
        states.append(state)
        _, e = select_branch_edge(state)
        queue.append(triv_red(state.force(e))[0])
        queue.append(triv_red(state.delete(e))[0])
    return states


def measure(instances: Iterable[FchcInstance], per_instance: int = 8) -> List[SpacePoint]:
    points = []
    seen = set()
    for inst in instances:
        for state in branch_states(inst, per_instance):
            report = qubit_accounting(state)
            key = (state.g, report.r, report.s)
            if key in seen:
                continue
            seen.add(key)
            points.append(SpacePoint(report.s, report.n, float(report.total_bits)))
    return points


def calibrate(
    instances: Iterable[FchcInstance],
    per_instance: int = 8,
    coverage: Optional[float] = None,
) -> Calibration:
    return fit_space_model(measure(instances, per_instance), coverage)


def speedup_table(model: SpaceModel, cs: Sequence[float], ns: Sequence[int]) -> List[dict]:
    """Rows of f(c), the negative-model gap c/log2 n, and s~(n) for each c"""
    rows = []
    for c in cs:
        cfg = HybridConfig(c=c)
        try:
            f_c = speedup_exponent(cfg, model)
        except DomainError:
            f_c = None
        for n in ns:
            try:
                s_tilde: Optional[int] = threshold(cfg, model, n)
            except (TooSmallBudget, DomainError):
                s_tilde = None
            rows.append({
                "c": c,
                "n": n,
                "f_c": f_c,
                "negative_gap": c / math.log2(n),
                "s_tilde": s_tilde,
            })
    return rows
