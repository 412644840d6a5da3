"""
Multigraphs of maximum degree 3 and forced cubic Hamiltonian cycle instances
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx
import numpy as np

from app.config import settings
from app.exceptions import (
    DegreeExceeded,
    GenerationFailed,
    OracleLimitExceeded,
    ParseError,
    SelfLoop,
)
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_DEGREE = 3


@dataclass(frozen=True)
class FourCycle:
    vertices: Tuple[int, int, int, int]  # cyclic order
    edges: Tuple[int, int, int, int]  # edges[t] joins vertices[t] and vertices[t + 1]


@dataclass(frozen=True)
class MultiGraph:
    n: int
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        degree = [0] * (self.n + 1)
        for idx, (u, v) in enumerate(self.edges):
            if u == v:
                raise SelfLoop(f"edge {idx + 1} is a loop at vertex {u}")
            for x in (u, v):
                if not 1 <= x <= self.n:
                    raise ParseError(f"edge {idx + 1} names vertex {x} outside 1..{self.n}")
                degree[x] += 1
                if degree[x] > MAX_DEGREE:
                    raise DegreeExceeded(f"vertex {x} has degree above {MAX_DEGREE}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> Tuple[Tuple[int, ...], ...]:
        inc: List[List[int]] = [[] for _ in range(self.n + 1)]
        for idx, (u, v) in enumerate(self.edges):
            inc[u].append(idx)
            inc[v].append(idx)
        return tuple(tuple(lst) for lst in inc)

    def degree(self, v: int) -> int:
        return len(self.incidence[v])

    def other(self, e: int, v: int) -> int:
        u, w = self.edges[e]
        return w if u == v else u

    def is_cubic(self) -> bool:
        return all(self.degree(v) == 3 for v in range(1, self.n + 1))

    @cached_property
    def four_cycles(self) -> Tuple[FourCycle, ...]:
        """All 4-cycles on distinct vertices, each listed once, in enumeration order"""
        found = []
        for v0 in range(1, self.n + 1):
            for e01 in self.incidence[v0]:
                v1 = self.other(e01, v0)
                if v1 < v0:
                    continue
                for e12 in self.incidence[v1]:
                    v2 = self.other(e12, v1)
                    if v2 in (v0, v1) or v2 < v0:
                        continue
                    for e23 in self.incidence[v2]:
                        v3 = self.other(e23, v2)
                        if v3 in (v0, v1, v2) or v3 < v0 or v3 < v1:
                            continue
                        for e30 in self.incidence[v3]:
                            if self.other(e30, v3) == v0:
                                found.append(FourCycle((v0, v1, v2, v3), (e01, e12, e23, e30)))
        return tuple(found)

    def triangle(self) -> Optional[Tuple[int, int, int]]:
        adj = [set(self.other(e, v) for e in self.incidence[v]) for v in range(self.n + 1)]
        for u in range(1, self.n + 1):
            for v in sorted(adj[u]):
                if v <= u:
                    continue
                for w in sorted(adj[v]):
                    if w > v and u in adj[w]:
                        return u, v, w
        return None

    def to_networkx(self, keep: Optional[Iterable[int]] = None) -> nx.MultiGraph:
        """All vertices, with the edges in keep (every edge by default) keyed by index"""
        g = nx.MultiGraph()
        g.add_nodes_from(range(1, self.n + 1))
        indices = range(self.m) if keep is None else sorted(keep)
        g.add_edges_from((*self.edges[idx], idx) for idx in indices)
        return g


@dataclass(frozen=True)
class FchcInstance:
    g: MultiGraph
    forced: FrozenSet[int] = field(default_factory=frozenset)
    deleted: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.forced & self.deleted:
            raise ValueError(f"edges both forced and deleted: {sorted(self.forced & self.deleted)}")

    @property
    def n(self) -> int:
        return self.g.n

    def force(self, e: int) -> "FchcInstance":
        return replace(self, forced=self.forced | {e})

    def delete(self, e: int) -> "FchcInstance":
        return replace(self, deleted=self.deleted | {e})

    def live(self, e: int) -> bool:
        return e not in self.deleted

    def free(self, e: int) -> bool:
        return e not in self.deleted and e not in self.forced

    def free_edges(self, v: int) -> List[int]:
        return [e for e in self.g.incidence[v] if self.free(e)]

    def degree(self, v: int) -> int:
        return sum(1 for e in self.g.incidence[v] if e not in self.deleted)

    def forced_degree(self, v: int) -> int:
        return sum(1 for e in self.g.incidence[v] if e in self.forced)

    def touches_forced(self, v: int) -> bool:
        return any(e in self.forced for e in self.g.incidence[v])


def free_four_cycles(inst: FchcInstance) -> List[FourCycle]:
    """4-cycles of G\\F (every edge live and unforced)"""
    return [c for c in inst.g.four_cycles if all(inst.free(e) for e in c.edges)]


def is_isolated(inst: FchcInstance, cycle: FourCycle) -> bool:
    """The cycle is a whole connected component of G\\F"""
    return all(len(inst.free_edges(v)) == 2 for v in cycle.vertices)


def unforced_isolated_cycles(inst: FchcInstance) -> List[FourCycle]:
    return [c for c in free_four_cycles(inst) if all(inst.touches_forced(v) for v in c.vertices)]


def size_metric(inst: FchcInstance) -> int:
    return max(inst.n - len(inst.forced) - len(unforced_isolated_cycles(inst)), 0)


def _components(g: MultiGraph, keep: Iterable[int]) -> List[Set[int]]:
    return list(nx.connected_components(g.to_networkx(keep)))


def is_connected(g: MultiGraph, deleted: Iterable[int] = ()) -> bool:
    removed = set(deleted)
    return nx.is_connected(g.to_networkx(e for e in range(g.m) if e not in removed))


def free_graph_is_collection(inst: FchcInstance, extra_forced: Iterable[int] = ()) -> bool:
    """G\\F\\D consists only of disjoint 4-cycles and isolated vertices"""
    taken = inst.forced | inst.deleted | set(extra_forced)
    kept = [idx for idx in range(inst.g.m) if idx not in taken]
    degree = [0] * (inst.n + 1)
    for idx in kept:
        for v in inst.g.edges[idx]:
            degree[v] += 1
    if any(d not in (0, 2) for d in degree[1:]):
        return False
    for comp in _components(inst.g, kept):
        if len(comp) > 1 and len(comp) != 4:
            return False
    return True


def forced_cycle_lengths(inst: FchcInstance) -> List[int]:
    """Vertex counts of the connected components of F that are cycles"""
    lengths = []
    for comp in _components(inst.g, inst.forced):
        if len(comp) > 1 and all(inst.forced_degree(v) == 2 for v in comp):
            lengths.append(len(comp))
    return lengths


def forced_is_cycle_collection(inst: FchcInstance) -> bool:
    return all(inst.forced_degree(v) in (0, 2) for v in range(1, inst.n + 1))


def three_forced_meet(inst: FchcInstance) -> bool:
    return any(inst.forced_degree(v) >= 3 for v in range(1, inst.n + 1))


# File format


def parse_instance(text: str) -> FchcInstance:
    n: Optional[int] = None
    m: Optional[int] = None
    edges: List[Tuple[int, int]] = []
    forced: List[Tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        try:
            values = [int(p) for p in parts[1:]]
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno)
        tag = parts[0]
        if tag == "p":
            if n is not None or len(values) != 2:
                raise ParseError("expected a single header 'p <n> <m>'", lineno)
            n, m = values
            if n < 1 or m < 0:
                raise ParseError(f"bad header sizes n={n}, m={m}", lineno)
        elif tag == "e":
            if n is None:
                raise ParseError("edge before header", lineno)
            if len(values) != 2:
                raise ParseError("expected 'e <u> <v>'", lineno)
            u, v = values
            if u == v:
                raise SelfLoop(f"line {lineno}: loop at vertex {u}")
            if not (1 <= u <= n and 1 <= v <= n):
                raise ParseError(f"vertex outside 1..{n}", lineno)
            edges.append((u, v))
        elif tag == "f":
            if len(values) != 1:
                raise ParseError("expected 'f <edge-index>'", lineno)
            forced.append((values[0], lineno))
        else:
            raise ParseError(f"unknown line type {tag!r}", lineno)
    if n is None:
        raise ParseError("missing header 'p <n> <m>'")
    if len(edges) != m:
        raise ParseError(f"header announces {m} edges, found {len(edges)}")
    g = MultiGraph(n, tuple(edges))
    forced_idx = set()
    for idx, lineno in forced:
        if not 1 <= idx <= m:
            raise ParseError(f"forced edge {idx} outside 1..{m}", lineno)
        forced_idx.add(idx - 1)
    return FchcInstance(g, frozenset(forced_idx))


def parse(text: str) -> MultiGraph:
    return parse_instance(text).g


def serialize(g: MultiGraph, forced: Iterable[int] = ()) -> str:
    lines = [f"p {g.n} {g.m}"]
    lines.extend(f"e {u} {v}" for u, v in g.edges)
    lines.extend(f"f {e + 1}" for e in sorted(forced))
    return "\n".join(lines) + "\n"


# Transformations and generators


def contract_triangles(g: MultiGraph) -> MultiGraph:
    """Merge triangles into single vertices until none is left (stops at 3 vertices)"""
    while g.n > 3:
        tri = g.triangle()
        if tri is None:
            break
        u, v, w = tri
        inside = {u, v, w}
        kept = [x for x in range(1, g.n + 1) if x not in (v, w)]
        label = {old: new for new, old in enumerate(kept, start=1)}
        merged = lambda x: u if x in inside else x  # noqa: E731
        edges = tuple(
            (label[merged(a)], label[merged(b)])
            for a, b in g.edges
            if not (a in inside and b in inside)
        )
        logger.debug(f"contracted triangle {tri}")
        g = MultiGraph(len(kept), edges)
    return g


def random_cubic(n: int, seed: int) -> MultiGraph:
    """Simple connected cubic graph from the pairing model with rejection"""
    if n < 4 or n % 2:
        raise GenerationFailed(f"cubic graphs need an even n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    for _ in range(settings.RANDOM_CUBIC_MAX_RETRIES):
        points = rng.permutation(3 * n)
        pairs = set()
        ok = True
        for i in range(0, 3 * n, 2):
            a, b = int(points[i]) // 3 + 1, int(points[i + 1]) // 3 + 1
            if a == b or (min(a, b), max(a, b)) in pairs:
                ok = False
                break
            pairs.add((min(a, b), max(a, b)))
        if not ok:
            continue
        g = MultiGraph(n, tuple(sorted(pairs)))
        if is_connected(g):
            return g
    raise GenerationFailed(f"no simple connected cubic graph on {n} vertices after retries")


def brute_force_fchc(inst: FchcInstance) -> bool:
    """Backtracking search for a Hamiltonian cycle through F avoiding D"""
    g = inst.g
    if g.n > settings.HYBRID_FCHC_ORACLE_LIMIT:
        raise OracleLimitExceeded(f"n={g.n} above oracle limit {settings.HYBRID_FCHC_ORACLE_LIMIT}")
    n = g.n
    if n < 2 or any(inst.forced_degree(v) > 2 for v in range(1, n + 1)):
        return False
    forced = inst.forced
    start = 1
    visited = [False] * (n + 1)
    visited[start] = True
    used: List[int] = []

    def forced_ok(v: int, a: int, b: int) -> bool:
        return all(e in (a, b) for e in g.incidence[v] if e in forced)

    def extend(v: int, in_edge: int, count: int) -> bool:
        if count == n:
            for e in g.incidence[v]:
                if inst.live(e) and g.other(e, v) == start and e not in used:
                    if forced_ok(v, in_edge, e) and forced_ok(start, used[0], e):
                        return True
            return False
        for e in g.incidence[v]:
            if not inst.live(e) or e in used:
                continue
            u = g.other(e, v)
            if visited[u]:
                continue
            if v != start and not forced_ok(v, in_edge, e):
                continue
            visited[u] = True
            used.append(e)
            if extend(u, e, count + 1):
                return True
            used.pop()
            visited[u] = False
        return False

    return extend(start, -1, 1)
