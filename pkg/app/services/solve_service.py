"""
Solve service layer shared by the command line and the HTTP API
"""
import time
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from app.config import settings
from app.exceptions import OracleLimitExceeded, OracleMismatch
from app.models.schemas import (
    AnalyzeDocument,
    CalibrationSummary,
    SolveDocument,
    SolveStats,
    SpeedupRow,
    TraceDocument,
)
from app.services.corpus import desk_corpus
from app.services.eppstein import solve, terminal_check, triv_red
from app.services.graph import FchcInstance, brute_force_fchc, parse_instance, size_metric
from app.services.hybrid import (
    HybridConfig,
    SpaceModel,
    calibrate,
    default_model,
    hybrid_solve,
    speedup_table,
)
from app.services.qsim import QsimContext, classical_reduce, enumerate_search
from app.services.setgen import plan, trace_schedule
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_ANALYZE_NS = (16, 64, 256, 1024, 4096, 16384, 65536)


def parse_c_grid(text: str) -> List[float]:
    """'start:stop:count' (inclusive linspace) or a comma separated list"""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"c grid must look like start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1 or not 0 < start <= stop:
            raise ValueError(f"bad c grid {text!r}")
        return [float(c) for c in np.linspace(start, stop, count)]
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values or any(v <= 0 for v in values):
        raise ValueError(f"bad c grid {text!r}")
    return values


class SolveService:
    """Runs one of the three solvers and assembles the result document"""

    def __init__(self, model: Optional[SpaceModel] = None, threads: Optional[int] = None):
        self.model = model or default_model()
        self.threads = threads

    def solve_text(
        self,
        text: str,
        mode: str = "classical",
        c: Optional[float] = None,
        oracle_check: bool = False,
        backend: str = "classical",
    ) -> SolveDocument:
        timings: Dict[str, float] = {}
        start = time.perf_counter()
        inst = parse_instance(text)
        timings["parse"] = time.perf_counter() - start
        return self.solve(inst, mode, c, oracle_check, backend, timings)

    def solve(
        self,
        inst: FchcInstance,
        mode: str = "classical",
        c: Optional[float] = None,
        oracle_check: bool = False,
        backend: str = "classical",
        timings: Optional[Dict[str, float]] = None,
    ) -> SolveDocument:
        """
        Solve one instance

        Args:
            inst: Parsed instance
            mode: classical | nonrecursive | hybrid
            c: Qubit fraction (hybrid only)
            oracle_check: Cross-check against brute force when n is within the oracle limit
            backend: Evaluation backend of the nonrecursive search

        Returns:
            Structured result document
        """
        timings = dict(timings or {})
        start = time.perf_counter()
        if mode == "classical":
            verdict, stats = self._classical(inst)
        elif mode == "nonrecursive":
            verdict, stats = self._nonrecursive(inst, backend)
        elif mode == "hybrid":
            if c is None:
                raise ValueError("hybrid mode needs a qubit fraction c")
            verdict, stats = self._hybrid(inst, c)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        timings["solve"] = time.perf_counter() - start

        if oracle_check:
            start = time.perf_counter()
            stats.oracle = self._oracle(inst, verdict)
            timings["oracle"] = time.perf_counter() - start

        return SolveDocument(
            verdict=verdict,
            n=inst.n,
            m=inst.g.m,
            s=size_metric(triv_red(inst)[0]),
            mode=mode,
            stats=stats,
            timings=timings,
        )

    def _classical(self, inst: FchcInstance):
        verdict = solve(inst, threads=self.threads)
        st = verdict.stats
        tau_sum = st.accepting[0].tau_sum + st.root_tau if st.accepting else st.root_tau
        return verdict.result, SolveStats(nodes=st.nodes_expanded, depth=st.max_depth, tau_sum=tau_sum)

    def _nonrecursive(self, inst: FchcInstance, backend: str):
        reduced, tau = triv_red(inst)
        decided = terminal_check(reduced)
        if decided is not None:
            return decided, SolveStats(nodes=1, depth=0, tau_sum=tau)
        report = enumerate_search(reduced, mode="pruned", backend=backend)
        stats = SolveStats(
            nodes=report.leaves,
            depth=report.branch_bits if report.found else report.r,
            tau_sum=tau,
            r=report.r,
            t=report.t_measured,
            grover_estimate=report.grover_estimate,
            peak_cells=report.peak_cells,
        )
        return report.found, stats

    def _hybrid(self, inst: FchcInstance, c: float):
        result = hybrid_solve(inst, HybridConfig(c=c), self.model, threads=self.threads)
        st = result.stats
        stats = SolveStats(
            nodes=result.classical_nodes,
            depth=st.max_depth,
            tau_sum=st.root_tau,
            grover_estimate=sum(h.grover_estimate for h in st.handoffs) if st.handoffs else None,
            budget=result.budget,
            s_tilde=result.s_tilde,
            handoff_depth=result.handoff_depth,
            quantum_calls=result.quantum_calls,
            refused_handoffs=st.refused_handoffs,
            modeled_cost=result.modeled_cost,
            theorem_bound=result.bound,
        )
        return result.result, stats

    @staticmethod
    def _oracle(inst: FchcInstance, verdict: bool) -> Optional[bool]:
        try:
            expected = brute_force_fchc(inst)
        except OracleLimitExceeded as exc:
            logger.warning(f"oracle check skipped: {exc}")
            return None
        if expected != verdict:
            raise OracleMismatch(f"solver says {verdict}, brute force says {expected}")
        return expected

    # Analytics

    def analyze(
        self,
        cs: Sequence[float],
        ns: Iterable[int] = DEFAULT_ANALYZE_NS,
        calibrate_on: Optional[Sequence[FchcInstance]] = None,
    ) -> AnalyzeDocument:
        summary = None
        if calibrate_on is not None:
            result = calibrate(calibrate_on)
            self.model = result.model
            summary = CalibrationSummary(
                points=len(result.points),
                inflation=result.inflation,
                residual_rms=result.residual_rms,
                coverage=result.coverage,
                fitted=result.fitted.model_dump(),
            )
        rows = [SpeedupRow(**row) for row in speedup_table(self.model, cs, list(ns))]
        return AnalyzeDocument(
            model=self.model.model_dump(),
            gamma=settings.GAMMA_CLASSICAL,
            gamma_q=settings.GAMMA_QUANTUM,
            rows=rows,
            calibration=summary,
        )

    @staticmethod
    def calibration_corpus(seed: int = 0) -> List[FchcInstance]:
        return desk_corpus(ns=(6, 8, 10), per_n=4, seed=seed)

    # Tracing

    @staticmethod
    def trace(inst: FchcInstance) -> TraceDocument:
        reduced, _ = triv_red(inst)
        ctx = QsimContext(reduced)
        gen_plan = plan(ctx.r)
        doc = TraceDocument(
            n=inst.n,
            s=ctx.s,
            r=ctx.r,
            sizes=list(gen_plan.sizes),
            schedule=trace_schedule(ctx.r),
        )
        if terminal_check(reduced) is None:
            report = enumerate_search(reduced, mode="pruned")
            if report.found:
                doc.witness = report.witness
                doc.cases = classical_reduce(ctx, report.witness)[1]
        for entry in doc.schedule:
            logger.debug(f"R({entry['i']}, {entry['l']}) depth={entry['depth']} calls={entry['calls']}")
        return doc
