"""
Non-recursive branching search over decision bits nu, compiled to
reversible Reduce and Check programs.

Element numbering over the edge indices e = 0..m-1 of the instance:
forcing e is element e + 1, deleting it is e + 1 + m, and the dummy added
at step i is i + 2m. The universe is N = 2m + max(m, r).
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from app.config import settings
from app.exceptions import (
    AncillaNotClean,
    InstanceNotReduced,
    NoWitness,
    SearchSpaceTooLarge,
    SelectionImpossible,
)
from app.services.ccs import (
    CASE_ANY,
    CASE_DEGREE_TWO,
    CASE_DUMMY,
    CASE_OPPOSITE,
    CASE_PATH,
    CASE_SATURATED,
    CASE_SPOKE,
    CASES,
    IGNORED_CASES,
    StatusLoader,
    all_forced_terms,
    cycles_through,
    local_program,
    low_degree_terms,
    negate,
    odd_forced_terms,
    scan_objects,
    status_width,
)
from app.services.circuits import NOT, ProgramBuilder, equals
from app.services.encoding import (
    bitlen,
    block_params,
    block_sizes,
    capacity,
    contains_parity,
    decode_eff,
    eff_contains_prog,
    eff_layout,
    element_width,
)
from app.services.eppstein import (
    dead_end,
    rule_degree_two,
    rule_opposite_cycle,
    rule_saturated,
    select_any,
    select_cycle_spoke,
    select_path_extension,
    triv_red,
)
from app.services.graph import (
    FchcInstance,
    MultiGraph,
    free_graph_is_collection,
    is_connected,
    size_metric,
    three_forced_meet,
)
from app.services.revcore import CALCULATE_TAG, Control, Cost, Machine, Program, Semantics, Slot, Values
from app.services.setgen import SetGenerator
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

MODES = ("exhaustive", "pruned", "sampled")
BACKENDS = ("classical", "reversible")


def _xor_bits(bits: Sequence[int], value: int) -> List[int]:
    return [b ^ ((value >> p) & 1) for p, b in enumerate(bits)]


def steps_for(s: int) -> int:
    """r = floor(s/2) + 4s, with at least one step"""
    return max(s // 2 + 4 * s, 1)


@dataclass(frozen=True)
class Selection:
    case: int
    element: int
    action: int


class QsimContext:
    """Fixed classical data of one trivial-reduction-free instance"""

    def __init__(self, inst: FchcInstance):
        _, tau = triv_red(inst)
        if tau:
            raise InstanceNotReduced(f"{tau} trivial reductions still apply")
        self.inst = inst
        self.g: MultiGraph = inst.g
        self.m = inst.g.m
        self.s = size_metric(inst)
        self.r = steps_for(self.s)
        self.N = 2 * self.m + max(self.m, self.r)
        self.w = element_width(self.N)
        self._calc_cache: Dict[Tuple[int, FrozenSet[int]], Tuple[Selection, ...]] = {}
        self._member_cache: Dict[Tuple, FrozenSet[int]] = {}

    def forced_element(self, e: int) -> int:
        return e + 1

    def deleted_element(self, e: int) -> int:
        return e + 1 + self.m

    def dummy_element(self, i: int) -> int:
        return i + 2 * self.m

    def state(self, X: Set[int]) -> FchcInstance:
        forced = {x - 1 for x in X if 1 <= x <= self.m}
        deleted = {x - 1 - self.m for x in X if self.m < x <= 2 * self.m}
        return FchcInstance(
            self.g,
            self.inst.forced | frozenset(forced),
            self.inst.deleted | frozenset(deleted),
        )


# Classical reference of Calculate, one function per case


def _edge_case(rule: Callable[[FchcInstance], Optional[int]], action: Optional[int]):
    def select(ctx: QsimContext, state: FchcInstance, i: int, nu_i: int) -> Optional[Tuple[int, int]]:
        e = rule(state)
        if e is None:
            return None
        a = nu_i if action is None else action
        return ctx.forced_element(e), a

    return select


def _dummy_case(ctx: QsimContext, state: FchcInstance, i: int, nu_i: int) -> Optional[Tuple[int, int]]:
    if dead_end(state) or free_graph_is_collection(state):
        return ctx.dummy_element(i), 0
    return None


CASE_RULES = {
    CASE_DEGREE_TWO: _edge_case(rule_degree_two, 0),
    CASE_SATURATED: _edge_case(rule_saturated, 1),
    CASE_OPPOSITE: _edge_case(rule_opposite_cycle, 0),
    CASE_DUMMY: _dummy_case,
    CASE_SPOKE: _edge_case(select_cycle_spoke, None),
    CASE_PATH: _edge_case(select_path_extension, None),
    CASE_ANY: _edge_case(select_any, None),
}


def element_of(ctx: QsimContext, e: int, a: int) -> int:
    return e + a * ctx.m


def classical_calculate(ctx: QsimContext, X: Set[int], i: int, nu_i: int) -> Tuple[int, int]:
    """x_i and the case that produced it"""
    choices = _choices(ctx, X, i)
    sel = choices[min(nu_i, len(choices) - 1)]
    return sel.element, sel.case


def _choices(ctx: QsimContext, X: Set[int], i: int) -> Tuple[Selection, ...]:
    """Selections for nu_i = 0 and nu_i = 1 (a single entry when nu_i is ignored)"""
    key = (i, frozenset(X))
    cached = ctx._calc_cache.get(key)
    if cached is not None:
        return cached
    state = ctx.state(X)
    for case in CASES:
        hit0 = CASE_RULES[case](ctx, state, i, 0)
        if hit0 is None:
            continue
        if case in IGNORED_CASES:
            result = (Selection(case, element_of(ctx, *hit0), hit0[1]),)
        else:
            e = hit0[0]
            result = (Selection(case, element_of(ctx, e, 0), 0), Selection(case, element_of(ctx, e, 1), 1))
        ctx._calc_cache[key] = result
        return result
    raise SelectionImpossible(f"no Calculate case applies at step {i}")


def classical_reduce(ctx: QsimContext, nu: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Z(nu) in insertion order and the case of every step"""
    X: Set[int] = set()
    Z: List[int] = []
    cases: List[int] = []
    for i in range(1, ctx.r + 1):
        x, case = classical_calculate(ctx, X, i, nu[i - 1])
        X.add(x)
        Z.append(x)
        cases.append(case)
    return Z, cases


def classical_check(ctx: QsimContext, X: Set[int]) -> bool:
    state = ctx.state(X)
    if dead_end(state):
        return False
    if not free_graph_is_collection(state):
        return False
    return is_connected(state.g, state.deleted)


# Reversible programs


def _members(ctx: QsimContext, sizes: Sequence[int], v: Values) -> FrozenSet[int]:
    """Edge elements an EffContains query would report for the given blocks"""
    key = (tuple(sizes), *(tuple(v[f"b{j}"]) for j in range(len(sizes))))
    cached = ctx._member_cache.get(key)
    if cached is not None:
        return cached
    found = set()
    for x in range(1, 2 * ctx.m + 1):
        for j, size in enumerate(sizes):
            if contains_parity(ctx.N, size, v[f"b{j}"], x):
                found.add(x)
                break
    result = frozenset(found)
    ctx._member_cache[key] = result
    return result


class QsimPrograms:
    """
    Calculate, Reduce and Check programs for one context, built lazily.

    By default every program is only counted: its cost is exact but it runs
    through its semantics. With materialize=True the scans, cascades and
    Calculate steps keep their gate lists; expand_queries also expands the
    membership queries they make.
    """

    def __init__(self, ctx: QsimContext, materialize: bool = False, expand_queries: bool = False):
        self.ctx = ctx
        self.N = ctx.N
        self.nu_width = ctx.r
        self.materialize = materialize
        self.expand_queries = expand_queries
        self._scan: Dict[Tuple[int, Tuple[int, ...]], Program] = {}
        self._select: Dict[Tuple[int, int, Tuple[int, ...]], Program] = {}
        self._cascade: Dict[Tuple[int, Tuple[int, ...]], Program] = {}
        self._calc: Dict[Tuple[int, Tuple[int, ...]], Program] = {}
        self._collection: Dict[Tuple[int, ...], Program] = {}
        self._clauses: Dict[str, Program] = {}
        self._reduce: Optional[Program] = None
        self._check: Optional[Program] = None

    @staticmethod
    def _sizes(i: int, sizes: Optional[Tuple[int, ...]]) -> Tuple[int, ...]:
        if sizes is not None:
            return tuple(sizes)
        return block_sizes(i - 1) if i > 1 else ()

    def _blocks(self, b: ProgramBuilder, sizes: Sequence[int]) -> List[Slot]:
        return [b.param(f"b{j}", capacity(self.N, size), 3) for j, size in enumerate(sizes)]

    def _loader(self, b: ProgramBuilder, sizes: Tuple[int, ...], blocks: Sequence[Slot], edges: int) -> StatusLoader:
        ctx = self.ctx
        if sizes:
            b.ancilla("qx", ctx.w)
        b.ancilla("st", 2 * max(edges, 1))
        return StatusLoader(
            b, ctx.m, ctx.N, ctx.inst.forced, ctx.inst.deleted, sizes,
            [b.view(s) for s in blocks], "qx", "st", self.expand_queries,
        )

    def counter_width(self, case: int) -> int:
        return bitlen(len(scan_objects(self.ctx.g, case)) + 2)

    def scan(self, case: int, sizes: Tuple[int, ...]) -> Program:
        """
        One pass over the case's objects: the first object that applies
        writes its element and action into e and a and sets fb; cnt counts
        the objects visited since then. nu is the decision bit of the step,
        so one scan serves every step with the same prefix layout.
        """
        key = (case, sizes)
        if key in self._scan:
            return self._scan[key]
        ctx = self.ctx
        g = ctx.g
        objects = scan_objects(g, case)
        b = ProgramBuilder(f"scan[{case},{sum(sizes)}]", self.materialize)
        nu = b.param("nu", 1)
        blocks = self._blocks(b, sizes)
        e = b.param("e", ctx.w)
        a = b.param("a", 1)
        fb = b.param("fb", 1)
        cnt = b.cells(b.param("cnt", self.counter_width(case)))
        widest = max([len(o.edges) for o in objects] + [max(g.degree(v) for v in range(1, g.n + 1))])
        loader = self._loader(b, sizes, blocks, widest)
        on = b.cells(b.ancilla("on", 1))[0]
        fb_cell = b.cells(fb)[0]
        guard = equals(cnt, 0)

        def odd_pass() -> None:
            for v in range(1, g.n + 1):
                inc = g.incidence[v]
                if not inc:
                    continue
                forced, _ = loader.cells(inc)
                loader.load(inc)
                for term in odd_forced_terms(forced):
                    b.increment(pc, term)
                loader.load(inc)

        if case == CASE_PATH:
            # only while some vertex has odd forced degree
            pre = b.cells(b.ancilla("pre", 1))[0]
            pc = b.cells(b.ancilla("pc", bitlen(g.n + 1)))
            odd_pass()
            b.flip_if_equal(pre, pc, 0)
            b.gate(pre, NOT)
            guard = [*guard, (pre, 1)]

        outputs = dict(on=b.view("on"), e=b.view(e), a=b.view(a), fb=b.view(fb))
        for obj in objects:
            local = local_program(g, ctx.w, case, obj, self.materialize)
            b.mc_gate(on, NOT, guard)
            loader.load(obj.edges)
            b.call(local, st=b.view("st", 0, status_width(obj.edges)), nu=b.view(nu), **outputs)
            loader.load(obj.edges)
            b.mc_gate(on, NOT, guard)
            b.increment(cnt, [(fb_cell, 1)])

        if case == CASE_DUMMY:
            coll = b.cells(b.ancilla("coll", 1))[0]
            prog = self.collection(sizes)
            views = dict({s.name: b.view(s) for s in blocks}, out=b.view("coll"))
            b.mc_gate(on, NOT, guard)
            b.call(prog, **views)
            b.gate(fb_cell, NOT, [(coll, 1), (on, 1)])
            b.call(prog, inverse=True, **views)
            b.mc_gate(on, NOT, guard)
            b.increment(cnt, [(fb_cell, 1)])

        if case == CASE_PATH:
            b.gate(pre, NOT)
            b.flip_if_equal(pre, pc, 0)
            with b.inverted():
                odd_pass()

        prog = b.build()
        self._scan[key] = prog
        return prog

    def check_select(self, i: int, case: int, sizes: Optional[Tuple[int, ...]] = None) -> Program:
        """CheckSelect_case for step i: scan, copy the selection under enable, unscan"""
        sizes = self._sizes(i, sizes)
        key = (i, case, sizes)
        if key in self._select:
            return self._select[key]
        ctx = self.ctx
        b = ProgramBuilder(f"check_select[{i},{case}]", self.materialize)
        nu = b.param("nu", self.nu_width)
        blocks = self._blocks(b, sizes)
        enable = b.cells(b.param("enable", 1))[0]
        e = b.cells(b.param("e", ctx.w))
        a = b.cells(b.param("a", 1))[0]
        fb = b.cells(b.param("fb", 1))[0]
        e_tmp = b.ancilla("e_tmp", ctx.w)
        a_tmp = b.ancilla("a_tmp", 1)
        fb_tmp = b.ancilla("fb_tmp", 1)
        cnt = b.ancilla("cnt", self.counter_width(case))
        scan = self.scan(case, sizes)
        views = dict(
            {s.name: b.view(s) for s in blocks},
            nu=b.view(nu, i - 1, 1), e=b.view(e_tmp), a=b.view(a_tmp), fb=b.view(fb_tmp), cnt=b.view(cnt),
        )
        on = (enable, 1)
        fired = (b.cells(fb_tmp)[0], 1)
        b.call(scan, **views)
        b.xor_register(e, b.cells(e_tmp), [on])
        if case == CASE_DUMMY:
            b.xor_const(e, ctx.dummy_element(i), [on, fired])
        b.mc_gate(a, NOT, [(b.cells(a_tmp)[0], 1), on])
        b.mc_gate(fb, NOT, [fired, on])
        b.call(scan, inverse=True, **views)

        rule = CASE_RULES[case]

        def apply(v: Values) -> None:
            if not v["enable"][0]:
                return
            X = _members(ctx, sizes, v)
            hit = rule(ctx, ctx.state(X), i, v["nu"][i - 1])
            if hit is None:
                return
            element, action = hit
            v["e"] = _xor_bits(v["e"], element)
            v["a"] = [v["a"][0] ^ action]
            v["fb"] = [v["fb"][0] ^ 1]

        prog = b.build(Semantics(apply, apply))
        self._select[key] = prog
        return prog

    def cascade(self, i: int, sizes: Optional[Tuple[int, ...]] = None) -> Program:
        """CCS_1 .. CCS_7: selects (e, a), leaves fb = 1 and fc = 8 - j for the fired case j"""
        sizes = self._sizes(i, sizes)
        key = (i, sizes)
        if key in self._cascade:
            return self._cascade[key]
        ctx = self.ctx
        b = ProgramBuilder(f"ccs[{i}]", self.materialize)
        nu = b.param("nu", self.nu_width)
        blocks = self._blocks(b, sizes)
        e = b.param("e", ctx.w)
        a = b.param("a", 1)
        fb = b.param("fb", 1)
        fc = b.cells(b.param("fc", 3))
        flag = b.ancilla("flag0", 1)
        flag_cell = b.cells(flag)[0]
        fb_cell = b.cells(fb)[0]
        views = {"nu": b.view(nu), "enable": b.view(flag), "e": b.view(e), "a": b.view(a), "fb": b.view(fb)}
        views.update({s.name: b.view(s) for s in blocks})
        for case in CASES:
            b.flip_if_equal(flag_cell, fc, 0)
            b.call(self.check_select(i, case, sizes), **views)
            b.flip_if_equal(flag_cell, fc, 0)
            b.increment(fc, [(fb_cell, 1)])
        prog = b.build()
        self._cascade[key] = prog
        return prog

    def calculate(self, i: int, sizes: Optional[Tuple[int, ...]] = None) -> Program:
        """Calculate_i: nu, blocks of Z_{i-1}, x -> nu, blocks of Z_{i-1}, x ^ x_i"""
        sizes = self._sizes(i, sizes)
        key = (i, sizes)
        if key in self._calc:
            return self._calc[key]
        ctx = self.ctx
        b = ProgramBuilder(f"calculate[{i}]", self.materialize, tag=CALCULATE_TAG)
        nu = b.param("nu", self.nu_width)
        blocks = self._blocks(b, sizes)
        x = b.cells(b.param("x", ctx.w))
        e = b.ancilla("e", ctx.w)
        a = b.ancilla("a", 1)
        fb = b.ancilla("fb", 1)
        fc = b.ancilla("fc", 3)
        tmp = b.cells(b.ancilla("tmp", ctx.w))
        views = {"nu": b.view(nu), "e": b.view(e), "a": b.view(a), "fb": b.view(fb), "fc": b.view(fc)}
        views.update({s.name: b.view(s) for s in blocks})
        cascade = self.cascade(i, sizes)
        e_cells = b.cells(e)
        a_ctl = [(b.cells(a)[0], 1)]

        b.call(cascade, **views)
        b.xor_register(tmp, e_cells)
        b.add_const(tmp, ctx.m, a_ctl)
        b.xor_register(x, tmp)
        b.sub_const(tmp, ctx.m, a_ctl)
        b.xor_register(tmp, e_cells)
        b.call(cascade, inverse=True, **views)

        def apply(v: Values) -> None:
            X = _members(ctx, sizes, v)
            xi, _ = classical_calculate(ctx, X, i, v["nu"][i - 1])
            v["x"] = _xor_bits(v["x"], xi)

        prog = b.build(Semantics(apply, apply))
        self._calc[key] = prog
        return prog

    def program(self, i: int, sizes: Tuple[int, ...]) -> Program:
        return self.calculate(i, tuple(sizes))

    def reduce(self) -> Program:
        if self._reduce is None:
            self._reduce = SetGenerator(self.ctx.r, self).generate()
        return self._reduce

    def collection(self, sizes: Tuple[int, ...]) -> Program:
        """
        out ^= [G\\F\\D is disjoint 4-cycles and isolated vertices], tested
        as: every free edge lies on exactly one 4-cycle of free edges
        """
        if sizes in self._collection:
            return self._collection[sizes]
        ctx = self.ctx
        g = ctx.g
        through = cycles_through(g)
        b = ProgramBuilder(f"collection[{sum(sizes)}]", self.materialize)
        blocks = self._blocks(b, sizes)
        out = b.cells(b.param("out", 1))[0]
        loader = self._loader(b, sizes, blocks, 4)
        cc = b.cells(b.ancilla("cc", bitlen(max((len(t) for t in through), default=0) + 1)))
        ne = b.cells(b.ancilla("ne", 1))[0]
        viol = b.cells(b.ancilla("viol", bitlen(g.m + 1)))

        def count_cycles(x: int) -> None:
            for cycle in through[x]:
                loader.load(cycle.edges)
                forced, deleted = loader.cells(cycle.edges)
                b.increment(cc, [negate(lit) for lit in forced + deleted])
                loader.load(cycle.edges)

        def edge_pass() -> None:
            for x in range(g.m):
                count_cycles(x)
                loader.load((x,))
                (f_cell, _), (d_cell, _) = (lits[0] for lits in loader.cells((x,)))
                b.flip_if_equal(ne, cc, 1)
                b.gate(ne, NOT)
                b.increment(viol, [(f_cell, 0), (d_cell, 0), (ne, 1)])
                b.gate(ne, NOT)
                b.flip_if_equal(ne, cc, 1)
                loader.load((x,))
                with b.inverted():
                    count_cycles(x)

        edge_pass()
        b.flip_if_equal(out, viol, 0)
        with b.inverted():
            edge_pass()

        def apply(v: Values) -> None:
            ok = free_graph_is_collection(ctx.state(_members(ctx, sizes, v)))
            v["out"] = [v["out"][0] ^ int(ok)]

        prog = b.build(Semantics(apply, apply))
        self._collection[sizes] = prog
        return prog

    def _vertex_clause(self, name: str, bad: Callable[[List[Control], List[Control]], List[List[Control]]]) -> Program:
        """out ^= [no vertex matches any of its bad status patterns]"""
        ctx = self.ctx
        g = ctx.g
        sizes = block_sizes(ctx.r)
        b = ProgramBuilder(f"check_{name}", self.materialize)
        blocks = self._blocks(b, sizes)
        out = b.cells(b.param("out", 1))[0]
        loader = self._loader(b, sizes, blocks, max(g.degree(v) for v in range(1, g.n + 1)))
        cnt = b.cells(b.ancilla("cnt", bitlen(g.n + 1)))

        def vertex_pass() -> None:
            for v in range(1, g.n + 1):
                inc = g.incidence[v]
                terms = bad(*loader.cells(inc))
                if not terms:
                    continue
                loader.load(inc)
                for term in terms:
                    b.increment(cnt, term)
                loader.load(inc)

        vertex_pass()
        b.flip_if_equal(out, cnt, 0)
        with b.inverted():
            vertex_pass()

        def apply(v: Values) -> None:
            state = ctx.state(_members(ctx, sizes, v))
            if name == "degree":
                ok = all(state.degree(u) >= 2 for u in range(1, g.n + 1))
            else:
                ok = not three_forced_meet(state)
            v["out"] = [v["out"][0] ^ int(ok)]

        return b.build(Semantics(apply, apply))

    def _connected_clause(self) -> Program:
        """Connectivity of G\\D, counted from its walk and adjacency queries"""
        ctx = self.ctx
        g = ctx.g
        sizes = block_sizes(ctx.r)
        query = eff_contains_prog(ctx.N, ctx.r, materialize=False).cost
        nb = bitlen(g.n)
        # adjacency oracle: at most three EffContains calls per pair query
        queries = 3 * g.n ** 3
        ancillas = (Slot("walk", 4 * nb), Slot("qx", ctx.w), Slot("qout", 1))
        declared = Cost(
            gates=queries * (2 * query.gates + 2 * ctx.w) + 4 * nb,
            peak_cells=sum(s.width for s in ancillas) + query.peak_cells,
            peak_bits=sum(s.bits for s in ancillas) + query.peak_bits,
            calls=Counter({k: 2 * queries * n for k, n in query.calls.items()}),
        )

        def apply(v: Values) -> None:
            state = ctx.state(_members(ctx, sizes, v))
            v["out"] = [v["out"][0] ^ int(is_connected(g, state.deleted))]

        params = (*[Slot(p, capacity(ctx.N, size), 3) for p, size in zip(block_params(ctx.r), sizes)],
                  Slot("out", 1))
        return Program(
            name="check_connected",
            params=params,
            ancillas=ancillas,
            semantics=Semantics(apply, apply),
            declared=declared,
        )

    def clause(self, name: str) -> Program:
        """One Check clause bit over the final encoding"""
        if name in self._clauses:
            return self._clauses[name]
        if name == "degree":
            prog = self._vertex_clause(name, lambda forced, deleted: low_degree_terms(deleted))
        elif name == "forced":
            prog = self._vertex_clause(name, lambda forced, deleted: all_forced_terms(forced))
        elif name == "collection":
            prog = self.collection(block_sizes(self.ctx.r))
        elif name == "connected":
            prog = self._connected_clause()
        else:
            raise ValueError(f"unknown Check clause {name!r}")
        self._clauses[name] = prog
        return prog

    def check(self) -> Program:
        """eff, h -> eff, h ^ Check(X)"""
        if self._check is not None:
            return self._check
        ctx = self.ctx
        layout = eff_layout(ctx.N, ctx.r)
        offsets = [sum(layout[:j]) for j in range(len(layout))]
        b = ProgramBuilder("check")
        eff = b.param("eff", sum(layout), 3)
        h = b.cells(b.param("h", 1))[0]
        bits = b.ancilla("clauses", 4)
        block_views = {p: b.view(eff, offsets[j], layout[j]) for j, p in enumerate(block_params(ctx.r))}
        clauses = [
            (self.clause(name), dict(block_views, out=b.view(bits, j, 1)))
            for j, name in enumerate(("degree", "forced", "collection", "connected"))
        ]
        for prog, views in clauses:
            b.call(prog, **views)
        b.mc_gate(h, (1, 0), [(c, 1) for c in b.cells(bits)])
        for prog, views in reversed(clauses):
            b.call(prog, inverse=True, **views)
        self._check = b.build()
        return self._check


def calculate_prog(inst: FchcInstance, i: int) -> Program:
    programs = QsimPrograms(QsimContext(inst))
    return programs.calculate(i)


def reduce_prog(inst: FchcInstance) -> Program:
    return QsimPrograms(QsimContext(inst)).reduce()


def check_prog(inst: FchcInstance) -> Program:
    return QsimPrograms(QsimContext(inst)).check()


class ReversiblePipeline:
    """Runs Reduce then Check on a fast machine and undoes both"""

    def __init__(self, programs: QsimPrograms):
        self.programs = programs
        self.ctx = programs.ctx
        self.layout = eff_layout(self.ctx.N, self.ctx.r)
        self.peak_cells = 0
        self.peak_bits = 0

    def evaluate(self, nu: Sequence[int]) -> Tuple[int, Set[int]]:
        ctx = self.ctx
        machine = Machine(fast=True)
        nu_reg = machine.alloc_ancilla(ctx.r, name="nu")
        eff = machine.alloc_ancilla(sum(self.layout), 3, name="eff")
        h = machine.alloc_ancilla(1, name="h")
        machine.write(nu_reg, list(nu))
        reduce = self.programs.reduce()
        check = self.programs.check()
        machine.run(reduce, {"nu": nu_reg, "eff": eff})
        blocks = decode_eff(ctx.N, ctx.r, machine.read(eff))
        X = set().union(*blocks)
        machine.run(check, {"eff": eff, "h": h})
        result = machine.read(h)[0]
        machine.run(check.inverse(), {"eff": eff, "h": h})
        machine.run(reduce.inverse(), {"nu": nu_reg, "eff": eff})
        if any(machine.read(eff)) or any(machine.read(h)):
            raise AncillaNotClean("pipeline", "eff")
        machine.write(nu_reg, [0] * ctx.r)
        for reg in (h, eff, nu_reg):
            machine.free_ancilla(reg, "pipeline")
        self.peak_cells = max(self.peak_cells, machine.peak_cells)
        self.peak_bits = max(self.peak_bits, machine.peak_bits)
        return result, X


# Search


@dataclass
class Leaf:
    nu: Tuple[int, ...]
    X: FrozenSet[int]
    ignored: int
    audited_branches: int


@dataclass
class SearchReport:
    mode: str
    backend: str
    s: int
    r: int
    found: bool
    witness: Optional[List[int]] = None
    t_measured: Optional[int] = None
    branch_bits: Optional[int] = None
    audited_branch_bits: Optional[int] = None
    leaves: int = 0
    evaluations: int = 0
    accepting_count: Optional[int] = None
    hit_rate: Optional[float] = None
    trials: Optional[int] = None
    hits: Optional[int] = None
    grover_estimate: int = 0
    grover_worst_case: bool = False
    peak_cells: Optional[int] = None
    peak_bits: Optional[int] = None


def iter_leaves(ctx: QsimContext) -> Iterator[Leaf]:
    """Distinct outcomes of Reduce in lexicographic nu order; ignored bits set to 0"""

    def walk(i: int, X: FrozenSet[int], prefix: Tuple[int, ...], ignored: int, audited: int):
        if i > ctx.r:
            yield Leaf(prefix, X, ignored, audited)
            return
        choices = _choices(ctx, set(X), i)
        if len(choices) == 1:
            yield from walk(i + 1, X | {choices[0].element}, prefix + (0,), ignored + 1, audited)
            return
        forced_now = bool(ctx.state(set(X)).forced)
        for bit, sel in enumerate(choices):
            yield from walk(i + 1, X | {sel.element}, prefix + (bit,), ignored, audited + forced_now)

    yield from walk(1, frozenset(), (), 0, 0)


def _fill(report: SearchReport, leaf: Leaf) -> None:
    report.found = True
    report.witness = list(leaf.nu)
    report.t_measured = leaf.ignored
    report.branch_bits = report.r - leaf.ignored
    report.audited_branch_bits = leaf.audited_branches


def enumerate_search(
    inst: FchcInstance,
    mode: str = "pruned",
    backend: str = "classical",
    trials: Optional[int] = None,
    seed: int = 0,
) -> SearchReport:
    if mode not in MODES:
        raise ValueError(f"unknown search mode {mode!r}")
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    ctx = QsimContext(inst)
    report = SearchReport(mode=mode, backend=backend, s=ctx.s, r=ctx.r, found=False)
    pipeline = ReversiblePipeline(QsimPrograms(ctx)) if backend == "reversible" else None

    def accepts(leaf: Leaf) -> bool:
        report.evaluations += 1
        if pipeline is None:
            return classical_check(ctx, set(leaf.X))
        return pipeline.evaluate(leaf.nu)[0] == 1

    if mode == "exhaustive":
        if ctx.r > settings.EXHAUSTIVE_SEARCH_LIMIT:
            raise SearchSpaceTooLarge(
                f"r={ctx.r} exceeds the exhaustive limit {settings.EXHAUSTIVE_SEARCH_LIMIT}"
            )
        if pipeline is not None:
            count = 0
            for nu in itertools.product((0, 1), repeat=ctx.r):
                report.evaluations += 1
                h, _ = pipeline.evaluate(nu)
                if h:
                    count += 1
                    if not report.found:
                        report.found = True
                        report.witness = list(nu)
            report.accepting_count = count
            report.hit_rate = count / 2 ** ctx.r
            if report.found:
                _fill_from_nu(ctx, report)
        else:
            count = 0
            for leaf in iter_leaves(ctx):
                report.leaves += 1
                if accepts(leaf):
                    count += 1 << leaf.ignored
                    if not report.found:
                        _fill(report, leaf)
            report.accepting_count = count
            report.hit_rate = count / 2 ** ctx.r
    elif mode == "pruned":
        for leaf in iter_leaves(ctx):
            report.leaves += 1
            if accepts(leaf):
                _fill(report, leaf)
                break
    else:
        rate = 0.0
        first: Optional[Leaf] = None
        for leaf in iter_leaves(ctx):
            report.leaves += 1
            if accepts(leaf):
                rate += 2.0 ** -(ctx.r - leaf.ignored)
                first = first or leaf
        if first is not None:
            _fill(report, first)
        report.hit_rate = rate
        report.trials = trials or settings.DEFAULT_SAMPLE_TRIALS
        rng = np.random.default_rng(seed)
        samples = rng.integers(0, 2, size=(report.trials, ctx.r))
        hits = 0
        for row in samples:
            Z, _ = classical_reduce(ctx, [int(b) for b in row])
            hits += classical_check(ctx, set(Z))
        report.hits = hits

    if pipeline is not None:
        report.peak_cells = pipeline.peak_cells
        report.peak_bits = pipeline.peak_bits
    estimate = grover_cost_model(report)
    report.grover_estimate = estimate.iterations
    report.grover_worst_case = estimate.worst_case
    logger.info(
        f"search mode={mode} backend={backend} s={ctx.s} r={ctx.r} found={report.found} "
        f"leaves={report.leaves} evaluations={report.evaluations}"
    )
    return report


def _fill_from_nu(ctx: QsimContext, report: SearchReport) -> None:
    _, cases = classical_reduce(ctx, report.witness)
    ignored = sum(1 for c in cases if c in IGNORED_CASES)
    report.t_measured = ignored
    report.branch_bits = ctx.r - ignored
    audited = 0
    X: Set[int] = set()
    for i, case in enumerate(cases, start=1):
        if case not in IGNORED_CASES and ctx.state(X).forced:
            audited += 1
        X.add(classical_calculate(ctx, X, i, report.witness[i - 1])[0])
    report.audited_branch_bits = audited


# Cost and space models


@dataclass(frozen=True)
class GroverEstimate:
    iterations: int
    worst_case: bool
    within_bound: bool
    branch_bits: int = 0
    bound_bits: int = 0

    @property
    def raw_within_bound(self) -> bool:
        return self.branch_bits <= self.bound_bits


def grover_iterations(bits: int) -> int:
    """ceil(pi/4 * 2^(bits/2))"""
    return math.ceil(math.pi / 4 * 2 ** (bits / 2))


def grover_cost_model(report: SearchReport, strict: bool = False) -> GroverEstimate:
    bound_bits = math.ceil(report.s / 2)
    if not report.found:
        if strict:
            raise NoWitness("no accepting nu, the iteration count is undefined")
        return GroverEstimate(grover_iterations(report.r), True, False, report.r, bound_bits)
    branch_bits = report.r - report.t_measured
    return GroverEstimate(
        grover_iterations(branch_bits),
        False,
        report.audited_branch_bits <= bound_bits,
        branch_bits,
        bound_bits,
    )


@dataclass(frozen=True)
class SpaceReport:
    n: int
    m: int
    s: int
    r: int
    N: int
    nu_bits: int
    eff_trits: int
    output_bits: int
    reduce_peak_cells: int
    reduce_peak_bits: int
    check_peak_cells: int
    check_peak_bits: int
    calculate_calls: int
    naive_list_bits: int

    @property
    def eff_bits(self) -> int:
        return 2 * self.eff_trits

    @property
    def ancilla_bits(self) -> int:
        return max(self.reduce_peak_bits, self.check_peak_bits)

    @property
    def total_bits(self) -> int:
        return self.nu_bits + self.eff_bits + self.output_bits + self.ancilla_bits

    @property
    def total_cells(self) -> int:
        return (
            self.nu_bits + self.eff_trits + self.output_bits
            + max(self.reduce_peak_cells, self.check_peak_cells)
        )


def naive_list_bits(ctx: QsimContext) -> int:
    """The ordered-list baseline: r element slots over the 3m elements"""
    return ctx.r * math.ceil(math.log2(3 * max(ctx.m, 1)))


_SPACE_CACHE: Dict[Tuple[MultiGraph, FrozenSet[int], FrozenSet[int]], SpaceReport] = {}


def qubit_accounting(inst: FchcInstance) -> SpaceReport:
    """Persistent registers plus peak ancillas of Reduce and Check, in cells and bits"""
    ctx = QsimContext(inst)
    key = (ctx.g, inst.forced, inst.deleted)
    cached = _SPACE_CACHE.get(key)
    if cached is not None:
        return cached
    programs = QsimPrograms(ctx)
    reduce = programs.reduce()
    check = programs.check()
    report = SpaceReport(
        n=ctx.g.n,
        m=ctx.m,
        s=ctx.s,
        r=ctx.r,
        N=ctx.N,
        nu_bits=ctx.r,
        eff_trits=sum(eff_layout(ctx.N, ctx.r)),
        output_bits=1,
        reduce_peak_cells=reduce.cost.peak_cells,
        reduce_peak_bits=reduce.cost.peak_bits,
        check_peak_cells=check.cost.peak_cells,
        check_peak_bits=check.cost.peak_bits,
        calculate_calls=reduce.cost.calls_tagged(CALCULATE_TAG),
        naive_list_bits=naive_list_bits(ctx),
    )
    _SPACE_CACHE[key] = report
    logger.debug(f"space n={report.n} s={report.s} r={report.r}: {report.total_bits} bits")
    return report
