"""
Classical branching solver for the forced cubic Hamiltonian cycle problem

The recursion applies trivial reductions, checks terminal conditions, then
branches on one edge: force it, or delete it.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from app.config import settings
from app.exceptions import AuditFailure, SelectionImpossible
from app.services.graph import (
    FchcInstance,
    forced_cycle_lengths,
    forced_is_cycle_collection,
    free_four_cycles,
    free_graph_is_collection,
    is_connected,
    is_isolated,
    size_metric,
)
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

CASE_CYCLE = "3a"
CASE_PATH = "3b"
CASE_ANY = "3c"


# Trivial reductions, one edge at a time


def rule_degree_two(inst: FchcInstance) -> Optional[int]:
    """Free edge at a vertex of degree two (to force)"""
    for v in range(1, inst.n + 1):
        if inst.degree(v) == 2:
            free = inst.free_edges(v)
            if free:
                return free[0]
    return None


def rule_saturated(inst: FchcInstance) -> Optional[int]:
    """Free edge at a degree-three vertex already holding two forced edges (to delete)"""
    for v in range(1, inst.n + 1):
        if inst.degree(v) == 3 and inst.forced_degree(v) == 2:
            free = inst.free_edges(v)
            if free:
                return free[0]
    return None


def rule_opposite_cycle(inst: FchcInstance) -> Optional[int]:
    """Non-cycle edge of a free 4-cycle whose opposite vertices both touch F (to force)"""
    for cycle in free_four_cycles(inst):
        vs = cycle.vertices
        for a, b, others in ((0, 2, (1, 3)), (1, 3, (0, 2))):
            if not (inst.touches_forced(vs[a]) and inst.touches_forced(vs[b])):
                continue
            for v in sorted(vs[t] for t in others):
                spokes = [e for e in inst.free_edges(v) if e not in cycle.edges]
                if spokes:
                    return spokes[0]
    return None


def trivial_step(inst: FchcInstance) -> Optional[Tuple[str, int]]:
    """First applicable reduction as (action, edge); action is 'force' or 'delete'"""
    e = rule_degree_two(inst)
    if e is not None:
        return "force", e
    e = rule_saturated(inst)
    if e is not None:
        return "delete", e
    e = rule_opposite_cycle(inst)
    if e is not None:
        return "force", e
    return None


def apply_step(inst: FchcInstance, step: Tuple[str, int]) -> FchcInstance:
    action, e = step
    return inst.force(e) if action == "force" else inst.delete(e)


def triv_red(inst: FchcInstance) -> Tuple[FchcInstance, int]:
    tau = 0
    while True:
        step = trivial_step(inst)
        if step is None:
            return inst, tau
        inst = apply_step(inst, step)
        tau += 1


# Terminal conditions


def dead_end(inst: FchcInstance) -> bool:
    return any(
        inst.degree(v) <= 1 or inst.forced_degree(v) >= 3 for v in range(1, inst.n + 1)
    )


def short_forced_cycle(inst: FchcInstance) -> bool:
    return any(length < inst.n for length in forced_cycle_lengths(inst))


def terminal_check(inst: FchcInstance, check_2c: bool = True) -> Optional[bool]:
    if dead_end(inst):
        return False
    if free_graph_is_collection(inst):
        return is_connected(inst.g, inst.deleted)
    if check_2c and short_forced_cycle(inst):
        return False
    return None


# Edge selection


def on_isolated_cycle(inst: FchcInstance, e: int) -> bool:
    return any(e in c.edges and is_isolated(inst, c) for c in free_four_cycles(inst))


def select_cycle_spoke(inst: FchcInstance) -> Optional[int]:
    for cycle in free_four_cycles(inst):
        touching = [inst.touches_forced(v) for v in cycle.vertices]
        if sum(touching) != 2:
            continue
        for v in sorted(v for v, t in zip(cycle.vertices, touching) if not t):
            spokes = [e for e in inst.free_edges(v) if e not in cycle.edges]
            if spokes:
                return spokes[0]
    return None


def select_path_extension(inst: FchcInstance) -> Optional[int]:
    if not inst.forced or forced_is_cycle_collection(inst):
        return None
    for f in sorted(inst.forced):
        for y in inst.g.edges[f]:
            for e in inst.free_edges(y):
                if not on_isolated_cycle(inst, e):
                    return e
    return None


def select_any(inst: FchcInstance) -> Optional[int]:
    for e in range(inst.g.m):
        if inst.free(e) and not on_isolated_cycle(inst, e):
            return e
    return None


def select_branch_edge(inst: FchcInstance) -> Tuple[str, int]:
    for label, rule in (
        (CASE_CYCLE, select_cycle_spoke),
        (CASE_PATH, select_path_extension),
        (CASE_ANY, select_any),
    ):
        e = rule(inst)
        if e is not None:
            return label, e
    raise SelectionImpossible(
        f"no branching edge: n={inst.n}, |F|={len(inst.forced)}, |D|={len(inst.deleted)}"
    )


def edge_select(inst: FchcInstance) -> int:
    return select_branch_edge(inst)[1]


# Recursion and statistics


@dataclass(frozen=True)
class ChildRecord:
    s: int
    tau: int
    terminal: Optional[bool]


@dataclass(frozen=True)
class NodeRecord:
    depth: int
    s: int
    forced_nonempty: bool
    case: str
    edge: int
    force: ChildRecord
    delete: ChildRecord

    @property
    def in_hypothesis(self) -> bool:
        return (
            self.forced_nonempty
            and self.force.terminal is None
            and self.delete.terminal is None
        )

    @property
    def decrease(self) -> Tuple[int, int]:
        return self.s - self.force.s, self.s - self.delete.s


@dataclass(frozen=True)
class AcceptingPath:
    tau_sum: int
    branchings: int
    audited_depth: int


@dataclass(frozen=True)
class Handoff:
    """Subinstance passed to another solver instead of being branched on"""

    depth: int
    s: int
    r: int
    space_bits: int
    result: bool
    grover_estimate: int


@dataclass
class RunStats:
    s_root: int = 0
    root_tau: int = 0
    root_forced_empty: bool = True
    nodes_expanded: int = 0
    max_depth: int = 0
    max_audited_depth: int = 0
    taus: List[int] = field(default_factory=list)
    records: List[NodeRecord] = field(default_factory=list)
    accepting: List[AcceptingPath] = field(default_factory=list)
    cases: Counter[str] = field(default_factory=Counter)
    handoffs: List[Handoff] = field(default_factory=list)
    refused_handoffs: int = 0

    def merge(self, other: "RunStats") -> None:
        self.nodes_expanded += other.nodes_expanded
        self.max_depth = max(self.max_depth, other.max_depth)
        self.max_audited_depth = max(self.max_audited_depth, other.max_audited_depth)
        self.taus.extend(other.taus)
        self.records.extend(other.records)
        self.accepting.extend(other.accepting)
        self.cases.update(other.cases)
        self.handoffs.extend(other.handoffs)
        self.refused_handoffs += other.refused_handoffs


@dataclass
class Verdict:
    result: bool
    stats: RunStats


@dataclass(frozen=True)
class _Path:
    depth: int = 0
    tau_sum: int = 0
    branchings: int = 0
    audited: int = 0


class Solver:
    """One run of the branching algorithm over a single instance"""

    def __init__(
        self,
        check_2c: bool = True,
        exhaustive: bool = False,
        threads: Optional[int] = None,
    ):
        self.check_2c = check_2c
        self.exhaustive = exhaustive
        self.threads = threads or settings.DEFAULT_THREADS
        self.split_depth = math.ceil(math.log2(self.threads)) if self.threads > 1 else 0

    def run(self, inst: FchcInstance) -> Verdict:
        reduced, tau = triv_red(inst)
        stats = RunStats(
            s_root=size_metric(reduced),
            root_tau=tau,
            root_forced_empty=not reduced.forced,
        )
        result, sub = self._explore(reduced, tau, _Path())
        stats.merge(sub)
        logger.debug(
            f"solve n={inst.n}: result={result} nodes={stats.nodes_expanded} "
            f"s_root={stats.s_root} max_depth={stats.max_depth}"
        )
        return Verdict(result, stats)

    def delegate(self, state: FchcInstance, depth: int, stats: RunStats) -> Optional[bool]:
        """Hook for solvers that hand small subinstances elsewhere; None keeps branching"""
        return None

    def _explore(self, state: FchcInstance, tau: int, path: _Path) -> Tuple[bool, RunStats]:
        stats = RunStats()
        stats.nodes_expanded = 1
        stats.max_depth = path.depth
        stats.max_audited_depth = path.audited
        stats.taus.append(tau)

        verdict = terminal_check(state, self.check_2c)
        if verdict is not None:
            if verdict:
                stats.accepting.append(AcceptingPath(path.tau_sum, path.branchings, path.audited))
            return verdict, stats

        delegated = self.delegate(state, path.depth, stats)
        if delegated is not None:
            if delegated:
                stats.accepting.append(AcceptingPath(path.tau_sum, path.branchings, path.audited))
            return delegated, stats

        label, e = select_branch_edge(state)
        stats.cases[label] += 1
        left, left_tau = triv_red(state.force(e))
        right, right_tau = triv_red(state.delete(e))
        record = NodeRecord(
            depth=path.depth,
            s=size_metric(state),
            forced_nonempty=bool(state.forced),
            case=label,
            edge=e,
            force=ChildRecord(size_metric(left), left_tau, terminal_check(left, self.check_2c)),
            delete=ChildRecord(size_metric(right), right_tau, terminal_check(right, self.check_2c)),
        )
        stats.records.append(record)

        audited = path.audited + (1 if record.in_hypothesis else 0)
        left_path = _Path(path.depth + 1, path.tau_sum + left_tau, path.branchings + 1, audited)
        right_path = _Path(path.depth + 1, path.tau_sum + right_tau, path.branchings + 1, audited)

        if path.depth < self.split_depth:
            with ThreadPoolExecutor(max_workers=2) as pool:
                fut_left = pool.submit(self._explore, left, left_tau, left_path)
                fut_right = pool.submit(self._explore, right, right_tau, right_path)
                left_result, left_stats = fut_left.result()
                right_result, right_stats = fut_right.result()
            stats.merge(left_stats)
            if left_result and not self.exhaustive:
                return True, stats
            stats.merge(right_stats)
            return left_result or right_result, stats

        left_result, left_stats = self._explore(left, left_tau, left_path)
        stats.merge(left_stats)
        if left_result and not self.exhaustive:
            return True, stats
        right_result, right_stats = self._explore(right, right_tau, right_path)
        stats.merge(right_stats)
        return left_result or right_result, stats


def solve(
    inst: FchcInstance,
    check_2c: bool = True,
    exhaustive: bool = False,
    threads: Optional[int] = None,
) -> Verdict:
    return Solver(check_2c=check_2c, exhaustive=exhaustive, threads=threads).run(inst)


# Audits


@dataclass
class AuditReport:
    audited_nodes: int
    excluded_nodes: int
    whitelisted_decreases: List[Tuple[int, int]]
    max_audited_depth: int
    depth_bound: int
    tau_sums: List[int]
    tau_bound: int
    max_branchings: int = 0

    @property
    def raw_within_bound(self) -> bool:
        """All branchings on accepting paths, root and final step included"""
        return self.max_branchings <= self.depth_bound


def decrease_ok(dec: Tuple[int, int]) -> bool:
    a, b = dec
    return (a >= 3 and b >= 3) or (a >= 2 and b >= 5) or (a >= 5 and b >= 2)


def audit_branch_decrease(stats: RunStats) -> AuditReport:
    audited = 0
    excluded = 0
    whitelisted = []
    for rec in stats.records:
        if not rec.forced_nonempty:
            whitelisted.append(rec.decrease)
            continue
        if not rec.in_hypothesis:
            excluded += 1
            continue
        audited += 1
        if not decrease_ok(rec.decrease):
            raise AuditFailure(
                f"node at depth {rec.depth} (case {rec.case}, edge {rec.edge + 1}, s={rec.s}) "
                f"decreased by {rec.decrease}"
            )

    depth_bound = math.ceil(stats.s_root / 2)
    if stats.max_audited_depth > depth_bound:
        raise AuditFailure(
            f"branching depth {stats.max_audited_depth} exceeds {depth_bound} for s={stats.s_root}"
        )
    tau_bound = 4 * stats.s_root
    for path in stats.accepting:
        if path.tau_sum > tau_bound:
            raise AuditFailure(
                f"accepting path forced or deleted {path.tau_sum} edges, bound {tau_bound}"
            )
    return AuditReport(
        audited_nodes=audited,
        excluded_nodes=excluded,
        whitelisted_decreases=whitelisted,
        max_audited_depth=stats.max_audited_depth,
        depth_bound=depth_bound,
        tau_sums=[p.tau_sum for p in stats.accepting],
        tau_bound=tau_bound,
        max_branchings=max((p.branchings for p in stats.accepting), default=0),
    )
