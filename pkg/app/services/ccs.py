"""
Gate-level pieces of the check-and-select scans and of the Check clauses.

A scan walks a fixed list of objects: vertices, 4-cycles, edges, or pairs
of a forced edge with one of its endpoints. For each object the forced and
deleted bits of the edges it reads are loaded into a status register by
membership queries against the encoded prefix. A local program decides on
those bits and the bits are unloaded again. Local programs never see the
step index, so one is built per object and shared by every step.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from app.services.circuits import NOT, ProgramBuilder
from app.services.encoding import block_params, block_sizes, contains_prog, eff_contains_prog
from app.services.graph import FourCycle, MultiGraph
from app.services.revcore import Cell, Control, Program, View

CASE_DEGREE_TWO = 1
CASE_SATURATED = 2
CASE_OPPOSITE = 3
CASE_DUMMY = 4
CASE_SPOKE = 5
CASE_PATH = 6
CASE_ANY = 7
CASES = range(1, 8)
IGNORED_CASES = frozenset({CASE_DEGREE_TWO, CASE_SATURATED, CASE_OPPOSITE, CASE_DUMMY})

NU = -1  # action copied from the step's decision bit

Choice = Tuple[List[Control], int, int]


def negate(lit: Control) -> Control:
    cell, value = lit
    return cell, 1 - value


def _unique(edges: Iterable[int]) -> Tuple[int, ...]:
    return tuple(dict.fromkeys(edges))


def status_width(edges: Sequence[int]) -> int:
    """Forced and deleted bit per edge, never empty"""
    return max(2 * len(edges), 1)


# Objects of each scan


@dataclass(frozen=True)
class ScanObject:
    key: Tuple[int, ...]
    edges: Tuple[int, ...]


@lru_cache(maxsize=None)
def cycles_through(g: MultiGraph) -> Tuple[Tuple[FourCycle, ...], ...]:
    found: List[List[FourCycle]] = [[] for _ in range(g.m)]
    for cycle in g.four_cycles:
        for e in cycle.edges:
            found[e].append(cycle)
    return tuple(tuple(lst) for lst in found)


def _cycle_edges(g: MultiGraph, cycle: FourCycle) -> Tuple[int, ...]:
    return _unique(itertools.chain(cycle.edges, *(g.incidence[v] for v in cycle.vertices)))


def _isolation_edges(g: MultiGraph, e: int) -> Tuple[int, ...]:
    return _unique(itertools.chain.from_iterable(_cycle_edges(g, c) for c in cycles_through(g)[e]))


@lru_cache(maxsize=None)
def scan_objects(g: MultiGraph, case: int) -> Tuple[ScanObject, ...]:
    """Objects of one scan in the order the classical rule visits them"""
    vertices = range(1, g.n + 1)
    if case == CASE_DEGREE_TWO:
        return tuple(ScanObject((v,), g.incidence[v]) for v in vertices if g.degree(v) >= 2)
    if case == CASE_SATURATED:
        return tuple(ScanObject((v,), g.incidence[v]) for v in vertices if g.degree(v) == 3)
    if case == CASE_DUMMY:
        return tuple(ScanObject((v,), g.incidence[v]) for v in vertices)
    if case in (CASE_OPPOSITE, CASE_SPOKE):
        return tuple(ScanObject((j,), _cycle_edges(g, c)) for j, c in enumerate(g.four_cycles))
    if case == CASE_PATH:
        objects = []
        for f in range(g.m):
            for y in g.edges[f]:
                reach = [_isolation_edges(g, x) for x in g.incidence[y] if x != f]
                objects.append(ScanObject((f, y), _unique(itertools.chain((f,), g.incidence[y], *reach))))
        return tuple(objects)
    if case == CASE_ANY:
        return tuple(ScanObject((x,), _unique((x, *_isolation_edges(g, x)))) for x in range(g.m))
    raise ValueError(f"unknown case {case}")


# Status terms over one vertex, mutually exclusive so they can be summed


def low_degree_terms(deleted: Sequence[Control]) -> List[List[Control]]:
    """At most one live edge among the given deleted bits"""
    d = len(deleted)
    terms = []
    for live in (0, 1):
        for S in itertools.combinations(range(d), live):
            terms.append([(deleted[p][0], 0 if p in S else 1) for p in range(d)])
    return terms


def all_forced_terms(forced: Sequence[Control]) -> List[List[Control]]:
    return [[(c, 1) for c, _ in forced]] if len(forced) >= 3 else []


def odd_forced_terms(forced: Sequence[Control]) -> List[List[Control]]:
    d = len(forced)
    return [
        [(forced[p][0], int(p in S)) for p in range(d)]
        for size in range(1, d + 1, 2)
        for S in itertools.combinations(range(d), size)
    ]


# Local decision programs


class LocalLogic:
    """
    Builder of one object's decision. Derived bits are computed into 'defs'
    as AND/OR of status bits, the first choice whose literals hold writes
    its element and action when 'on' is set, and the derived bits are
    uncomputed in reverse.
    """

    def __init__(self, name: str, edges: Sequence[int], w: int, materialize: bool):
        self.b = ProgramBuilder(name, materialize)
        self._pos = {e: p for p, e in enumerate(edges)}
        self.st = self.b.cells(self.b.param("st", status_width(edges)))
        self.nu = self.b.cells(self.b.param("nu", 1))[0]
        self.on = self.b.cells(self.b.param("on", 1))[0]
        self.e = self.b.cells(self.b.param("e", w))
        self.a = self.b.cells(self.b.param("a", 1))[0]
        self.fb = self.b.cells(self.b.param("fb", 1))[0]
        self._defs = 0
        self._ops: List[Tuple[Cell, Tuple[Control, ...]]] = []
        self._memo: Dict[Tuple, Control] = {}

    def forced(self, x: int, value: int = 1) -> Control:
        return self.st[2 * self._pos[x]], value

    def deleted(self, x: int, value: int = 1) -> Control:
        return self.st[2 * self._pos[x] + 1], value

    def _define(self, terms: Sequence[Sequence[Control]]) -> Cell:
        cell = Cell("defs", self._defs)
        self._defs += 1
        for term in terms:
            self.b.mc_gate(cell, NOT, term)
            self._ops.append((cell, tuple(term)))
        return cell

    def conj(self, lits: Sequence[Control]) -> Control:
        if len(lits) == 1:
            return lits[0]
        return self._define([lits]), 1

    def disj(self, lits: Sequence[Control]) -> Control:
        if len(lits) == 1:
            return lits[0]
        return self._define([[negate(lit) for lit in lits]]), 0

    def exclusive(self, terms: Sequence[Sequence[Control]]) -> Control:
        """OR of terms known never to hold together"""
        return self._define(terms), 1

    def free(self, x: int) -> Control:
        key = ("free", x)
        if key not in self._memo:
            self._memo[key] = self.conj([self.forced(x, 0), self.deleted(x, 0)])
        return self._memo[key]

    def touches(self, inc: Sequence[int]) -> Control:
        key = ("touch", tuple(inc))
        if key not in self._memo:
            self._memo[key] = self.disj([self.forced(x) for x in inc])
        return self._memo[key]

    def exactly_free(self, inc: Sequence[int], count: int) -> Control:
        key = ("exact", tuple(inc), count)
        if key not in self._memo:
            frees = [self.free(x) for x in inc]
            self._memo[key] = self.exclusive([
                [lit if p in S else negate(lit) for p, lit in enumerate(frees)]
                for S in itertools.combinations(range(len(inc)), count)
            ])
        return self._memo[key]

    def cycle_free(self, cycle: FourCycle) -> Control:
        key = ("cycle", cycle.edges)
        if key not in self._memo:
            self._memo[key] = self.conj([self.free(x) for x in cycle.edges])
        return self._memo[key]

    def isolated(self, g: MultiGraph, x: int) -> Optional[Control]:
        """x lies on a free 4-cycle whose vertices have exactly two free edges each"""
        cycles = cycles_through(g)[x]
        if not cycles:
            return None
        terms = [
            self.conj([self.cycle_free(c), *(self.exactly_free(g.incidence[v], 2) for v in c.vertices)])
            for c in cycles
        ]
        return self.disj(terms)

    def finish(self, choices: Sequence[Choice]) -> Program:
        hits = [self.conj(lits) for lits, _, _ in choices]
        for j, (_, element, action) in enumerate(choices):
            fire = self.conj([hits[j], *(negate(h) for h in hits[:j])])
            ctl = [fire, (self.on, 1)]
            self.b.xor_const(self.e, element, ctl)
            if action == 1:
                self.b.mc_gate(self.a, NOT, ctl)
            elif action == NU:
                self.b.mc_gate(self.a, NOT, [*ctl, (self.nu, 1)])
            self.b.mc_gate(self.fb, NOT, ctl)
        for target, controls in reversed(self._ops):
            self.b.mc_gate(target, NOT, controls)
        if self._defs:
            self.b.ancilla("defs", self._defs)
        return self.b.build()


def _spokes(g: MultiGraph, cycle: FourCycle, v: int) -> List[int]:
    return [x for x in g.incidence[v] if x not in cycle.edges]


def _choices(g: MultiGraph, case: int, key: Tuple[int, ...], L: LocalLogic) -> List[Choice]:
    if case == CASE_DEGREE_TWO:
        inc = g.incidence[key[0]]
        deleted = [L.deleted(x) for x in inc]
        two = L.exclusive([
            [(deleted[p][0], 0 if p in S else 1) for p in range(len(inc))]
            for S in itertools.combinations(range(len(inc)), 2)
        ])
        return [([two, L.free(x)], x + 1, 0) for x in inc]

    if case == CASE_SATURATED:
        inc = g.incidence[key[0]]
        live = [L.deleted(x, 0) for x in inc]
        two = L.exclusive([
            [L.forced(x, int(p in S)) for p, x in enumerate(inc)]
            for S in itertools.combinations(range(3), 2)
        ])
        return [([*live, two, L.free(x)], x + 1, 1) for x in inc]

    if case == CASE_DUMMY:
        inc = g.incidence[key[0]]
        forced = [L.forced(x) for x in inc]
        dead = L.exclusive(low_degree_terms([L.deleted(x) for x in inc]) + all_forced_terms(forced))
        return [([dead], 0, 0)]

    if case in (CASE_OPPOSITE, CASE_SPOKE):
        cycle = g.four_cycles[key[0]]
        vs = cycle.vertices
        free = L.cycle_free(cycle)
        touch = [L.touches(g.incidence[v]) for v in vs]
        choices: List[Choice] = []
        if case == CASE_OPPOSITE:
            for a, b, others in ((0, 2, (1, 3)), (1, 3, (0, 2))):
                for v in sorted(vs[t] for t in others):
                    for x in _spokes(g, cycle, v):
                        choices.append(([free, touch[a], touch[b], L.free(x)], x + 1, 0))
            return choices
        two = L.exclusive([
            [touch[t] if t in S else negate(touch[t]) for t in range(4)]
            for S in itertools.combinations(range(4), 2)
        ])
        for v in sorted(vs):
            quiet = negate(touch[vs.index(v)])
            for x in _spokes(g, cycle, v):
                choices.append(([free, two, quiet, L.free(x)], x + 1, NU))
        return choices

    if case == CASE_PATH:
        f, y = key
        choices = []
        for x in g.incidence[y]:
            if x == f:
                continue
            lits = [L.forced(f), L.free(x)]
            iso = L.isolated(g, x)
            if iso is not None:
                lits.append(negate(iso))
            choices.append((lits, x + 1, NU))
        return choices

    if case == CASE_ANY:
        (x,) = key
        lits = [L.free(x)]
        iso = L.isolated(g, x)
        if iso is not None:
            lits.append(negate(iso))
        return [(lits, x + 1, NU)]

    raise ValueError(f"unknown case {case}")


@lru_cache(maxsize=None)
def local_program(g: MultiGraph, w: int, case: int, obj: ScanObject, materialize: bool) -> Program:
    """st, nu, on, e, a, fb: the object's first applicable choice, when on is set"""
    L = LocalLogic(f"local[{case},{','.join(map(str, obj.key))}]", obj.edges, w, materialize)
    return L.finish(_choices(g, case, obj.key, L))


# Loading statuses


class StatusLoader:
    """
    Writes the forced and deleted bits of edges into a status register.
    Classically fixed edges become constant flips; the rest are queried
    against the prefix blocks. Loading the same edges again unloads them.
    """

    def __init__(
        self,
        b: ProgramBuilder,
        m: int,
        N: int,
        forced: FrozenSet[int],
        deleted: FrozenSet[int],
        sizes: Tuple[int, ...],
        blocks: Sequence[View],
        qx: str,
        st: str,
        expand_queries: bool = False,
    ):
        self.b = b
        self.m = m
        self.forced = forced
        self.deleted = deleted
        self.qx = qx
        self.st = st
        mat = None if expand_queries else False
        self.queries: List[Tuple[Program, Dict[str, View]]] = []
        if not sizes:
            return
        self.qx_cells = b.cells(qx)
        if sizes == block_sizes(sum(sizes)):
            prog = eff_contains_prog(N, sum(sizes), mat)
            self.queries.append((prog, dict(zip(block_params(sum(sizes)), blocks))))
        else:
            for size, view in zip(sizes, blocks):
                self.queries.append((contains_prog(N, size, mat), {"enc": view}))

    def _status(self, index: int, element: int, known: bool) -> None:
        b = self.b
        if known:
            b.gate(Cell(self.st, index), NOT)
            return
        if not self.queries:
            return
        b.xor_const(self.qx_cells, element)
        for prog, views in self.queries:
            b.call(prog, **views, x=b.view(self.qx), out=b.view(self.st, index, 1))
        b.xor_const(self.qx_cells, element)

    def load(self, edges: Sequence[int]) -> None:
        for p, x in enumerate(edges):
            self._status(2 * p, x + 1, x in self.forced)
            self._status(2 * p + 1, x + 1 + self.m, x in self.deleted)

    def cells(self, edges: Sequence[int]) -> Tuple[List[Control], List[Control]]:
        """(forced, deleted) bits of loaded edges, as set controls"""
        forced = [(Cell(self.st, 2 * p), 1) for p in range(len(edges))]
        deleted = [(Cell(self.st, 2 * p + 1), 1) for p in range(len(edges))]
        return forced, deleted
