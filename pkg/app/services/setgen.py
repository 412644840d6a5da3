"""
Reversible generation of the efficient encoding of x_1, ..., x_r

Each x_i is produced by a Calculate_i oracle that reads nu and the
efficient encoding of the elements before it. Block R(i, l) writes the
basic encoding of x_{i+1}, ..., x_{i+2^l}; it is built from two blocks of
level l-1, a Union, and the inverses of both blocks, so a level-l block
makes exactly 2 * 4^l oracle calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

from app.config import settings
from app.exceptions import InvalidK, PlanViolation
from app.services.circuits import PLUS1, PLUS2, ProgramBuilder, equals
from app.services.encoding import (
    block_params,
    block_sizes,
    capacity,
    convert_prog,
    eff_bound,
    eff_layout,
    element_width,
    union_prog,
)
from app.services.revcore import CALCULATE_TAG, Program, Semantics, Values
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

SETGEN_TAG = "setgen"
NAIVE_TAG = "naive"


class CalculateOracle(Protocol):
    """
    Family of Calculate_i programs sharing one universe [1, N].

    program(i, sizes) must take parameters "nu" (nu_width bits), one trit
    block "b<j>" of width capacity(N, sizes[j]) per entry of sizes, and
    "x" (element_width(N) bits), and must xor x_i into x leaving every
    other register and all of its ancillas unchanged.
    """

    N: int
    nu_width: int

    def program(self, i: int, sizes: Tuple[int, ...]) -> Program:
        ...


def two_adic(i: int) -> int:
    """g(i): exponent of the largest power of two dividing i (infinite for 0)"""
    if i == 0:
        return 1 << 30
    return (i & -i).bit_length() - 1


@dataclass(frozen=True)
class GenPlan:
    r: int
    blocks: Tuple[Tuple[int, int], ...]  # (start index, level) per block

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(1 << a for _, a in self.blocks)

    @property
    def expected_calls(self) -> int:
        return sum(level_calls(a) for _, a in self.blocks)


def level_calls(l: int) -> int:
    return 2 * 4 ** l


def call_bound(r: int) -> int:
    """2 (4^(floor(log2 r) + 1) - 1) / 3"""
    top = r.bit_length() - 1
    return 2 * (4 ** (top + 1) - 1) // 3


def plan(r: int) -> GenPlan:
    if r < 1:
        raise InvalidK(f"r must be positive, got {r}")
    blocks = []
    start = 0
    for size in block_sizes(r):
        a = size.bit_length() - 1
        if start and a > two_adic(start) - 1:
            raise PlanViolation(f"block level {a} too high after {start} elements")
        blocks.append((start, a))
        start += size
    return GenPlan(r, tuple(blocks))


def _check_block(i: int, l: int, r: int) -> None:
    if i < 0 or l < 0 or i + (1 << l) > r:
        raise PlanViolation(f"R({i}, {l}) leaves [0, {r}]")
    if i >= 1 and l > two_adic(i):
        raise PlanViolation(f"R({i}, {l}) needs l <= g({i}) = {two_adic(i)}")


class SetGenerator:
    """Builds and memoizes the set-generation programs for one oracle family"""

    def __init__(self, r: int, oracle: CalculateOracle):
        if r < 1:
            raise InvalidK(f"r must be positive, got {r}")
        if r > oracle.N:
            raise InvalidK(f"r={r} exceeds the universe size {oracle.N}")
        self.r = r
        self.oracle = oracle
        self.N = oracle.N
        self.w = element_width(oracle.N)
        self._blocks: Dict[Tuple[int, int], Program] = {}
        self._calcs: Dict[int, Program] = {}
        self._naive: Dict[int, Program] = {}

    def calculate(self, i: int) -> Program:
        prog = self._calcs.get(i)
        if prog is None:
            prog = self.oracle.program(i, block_sizes(i - 1) if i > 1 else ())
            if prog.tag != CALCULATE_TAG:
                raise PlanViolation(f"oracle program {prog.name} is not tagged '{CALCULATE_TAG}'")
            self._calcs[i] = prog
        return prog

    def r_block(self, i: int, l: int) -> Program:
        """R(i, l): nu, EffEnc(Z_i), 0 -> nu, EffEnc(Z_i), enc{x_{i+1}..x_{i+2^l}}"""
        key = (i, l)
        if key in self._blocks:
            return self._blocks[key]
        _check_block(i, l, self.r)
        prefix = block_sizes(i) if i else ()
        b = ProgramBuilder(f"R[{i},{l}]", tag=SETGEN_TAG, level=l)
        nu = b.param("nu", self.oracle.nu_width)
        pre = [b.param(f"b{j}", capacity(self.N, size), 3) for j, size in enumerate(prefix)]
        out = b.param("out", capacity(self.N, 1 << l), 3)
        base = {"nu": b.view(nu), **{f"b{j}": b.view(s) for j, s in enumerate(pre)}}

        if l == 0:
            x = b.ancilla("x", self.w)
            calc = self.calculate(i + 1)
            calc_views = dict(base, x=b.view(x))
            b.call(calc, **calc_views)
            b.call(convert_prog(self.N), x=b.view(x), out=b.view(out))
            b.call(calc, inverse=True, **calc_views)
        else:
            h = 1 << (l - 1)
            s1 = b.ancilla("s1", capacity(self.N, h), 3)
            s2 = b.ancilla("s2", capacity(self.N, h), 3)
            first = self.r_block(i, l - 1)
            second = self.r_block(i + h, l - 1)
            first_views = dict(base, out=b.view(s1))
            second_views = dict(base, **{f"b{len(pre)}": b.view(s1)}, out=b.view(s2))
            b.call(first, **first_views)
            b.call(second, **second_views)
            b.call(union_prog(self.N, h, h), e1=b.view(s1), e2=b.view(s2), out=b.view(out))
            b.call(second, inverse=True, **second_views)
            b.call(first, inverse=True, **first_views)

        prog = b.build()
        calls = prog.cost.calls_tagged(CALCULATE_TAG)
        if calls != level_calls(l):
            raise PlanViolation(f"R({i}, {l}) makes {calls} oracle calls, expected {level_calls(l)}")
        self._blocks[key] = prog
        logger.debug(f"built R({i}, {l}) with {prog.gate_cost} gates")
        return prog

    @property
    def layout(self) -> Tuple[int, ...]:
        return eff_layout(self.N, self.r)

    def generate(self) -> Program:
        """nu, 0 -> nu, EffEnc(Z_r) in one persistent region 'eff'"""
        gen_plan = plan(self.r)
        layout = self.layout
        total = sum(layout)
        if total > eff_bound(self.N, self.r):
            raise PlanViolation(f"layout of {total} trits exceeds the efficient-encoding bound")
        b = ProgramBuilder(f"generate[{self.r}]")
        nu = b.param("nu", self.oracle.nu_width)
        eff = b.param("eff", total, 3)
        offsets = [sum(layout[:j]) for j in range(len(layout))]
        for j, (start, a) in enumerate(gen_plan.blocks):
            views = {"nu": b.view(nu), "out": b.view(eff, offsets[j], layout[j])}
            for p in range(j):
                views[f"b{p}"] = b.view(eff, offsets[p], layout[p])
            logger.debug(f"schedule block {j}: R({start}, {a})")
            b.call(self.r_block(start, a), **views)
        prog = b.build()
        if settings.DEBUG and prog.cost.calls_tagged(CALCULATE_TAG) != gen_plan.expected_calls:
            raise PlanViolation("oracle call count differs from the plan")
        return prog

    def eff_to_basic(self) -> Program:
        """nu, 0 -> nu, enc(X(nu)) by merging the generated blocks with Union"""
        sizes = block_sizes(self.r)
        layout = self.layout
        gen = self.generate()
        b = ProgramBuilder(f"eff_to_basic[{self.r}]")
        nu = b.param("nu", self.oracle.nu_width)
        out = b.param("out", capacity(self.N, self.r), 3)
        eff = b.ancilla("eff", sum(layout), 3)
        gen_views = dict(nu=b.view(nu), eff=b.view(eff))
        offsets = [sum(layout[:j]) for j in range(len(layout))]
        b.call(gen, **gen_views)

        if len(sizes) == 1:
            src = b.cells(eff)
            dst = b.cells(out)
            for s, d in zip(src, dst):
                b.gate(d, PLUS1, [(s, 1)])
                b.gate(d, PLUS2, [(s, 2)])
            b.call(gen, inverse=True, **gen_views)
            return b.build()

        # merge smallest blocks first: acc = b[t-1] u b[t-2], then acc u b[t-3], ...
        merges = []
        acc_view = b.view(eff, offsets[-1], layout[-1])
        acc_size = sizes[-1]
        for step, j in enumerate(range(len(sizes) - 2, -1, -1)):
            merged = acc_size + sizes[j]
            if j == 0:
                target = b.view(out)
            else:
                target = b.view(b.ancilla(f"merge{step}", capacity(self.N, merged), 3))
            prog = union_prog(self.N, sizes[j], acc_size)
            views = dict(e1=b.view(eff, offsets[j], layout[j]), e2=acc_view, out=target)
            b.call(prog, **views)
            merges.append((prog, views))
            acc_view, acc_size = target, merged
        for prog, views in reversed(merges[:-1]):
            b.call(prog, inverse=True, **views)
        b.call(gen, inverse=True, **gen_views)
        return b.build()

    # Baseline that uncomputes by recomputation at every level

    def naive(self, i: Optional[int] = None) -> Program:
        """
        Naive SetGen_i: nu, 0 -> nu, enc{x_1..x_i}. Level i runs level i-1
        forward and backward, so oracle calls double with every element.
        """
        i = self.r if i is None else i
        if i in self._naive:
            return self._naive[i]
        prog = self._naive[i] = self._build_naive(i)
        return prog

    def _build_naive(self, i: int) -> Program:
        b = ProgramBuilder(f"naive[{i}]", tag=NAIVE_TAG, level=i)
        nu = b.param("nu", self.oracle.nu_width)
        out = b.param("out", capacity(self.N, i), 3)
        x = b.ancilla("x", self.w)
        if i == 1:
            calc = self.oracle.program(1, ())
            calc_views = dict(nu=b.view(nu), x=b.view(x))
            b.call(calc, **calc_views)
            b.call(convert_prog(self.N), x=b.view(x), out=b.view(out))
            b.call(calc, inverse=True, **calc_views)
            return b.build()
        prev = b.ancilla("prev", capacity(self.N, i - 1), 3)
        single = b.ancilla("single", capacity(self.N, 1), 3)
        inner = self.naive(i - 1)
        calc = self.oracle.program(i, (i - 1,))
        inner_views = dict(nu=b.view(nu), out=b.view(prev))
        calc_views = dict(nu=b.view(nu), b0=b.view(prev), x=b.view(x))
        convert_views = dict(x=b.view(x), out=b.view(single))
        b.call(inner, **inner_views)
        b.call(calc, **calc_views)
        b.call(convert_prog(self.N), **convert_views)
        b.call(union_prog(self.N, i - 1, 1), e1=b.view(prev), e2=b.view(single), out=b.view(out))
        b.call(convert_prog(self.N), inverse=True, **convert_views)
        b.call(calc, inverse=True, **calc_views)
        b.call(inner, inverse=True, **inner_views)
        return b.build()


def naive_call_count(i: int) -> int:
    """Oracle calls of the naive level-i program: 2^(i+1) - 2"""
    return (1 << (i + 1)) - 2


def setgen_ancilla_bound(N: int, r: int, oracle_ancillas: int) -> float:
    term = r * math.log2(N / r) + r + math.log2(N)
    return settings.SETGEN_ANCILLA_ALPHA * term + oracle_ancillas + settings.SETGEN_ANCILLA_BETA


def trace_schedule(r: int) -> List[Dict[str, int]]:
    """Top-level blocks followed by the full recursive (i, l) expansion order"""
    entries: List[Dict[str, int]] = []

    def expand(i: int, l: int, depth: int) -> None:
        entries.append({"i": i, "l": l, "depth": depth, "calls": level_calls(l)})
        if l:
            h = 1 << (l - 1)
            expand(i, l - 1, depth + 1)
            expand(i + h, l - 1, depth + 1)

    for start, a in plan(r).blocks:
        expand(start, a, 0)
    return entries


class ScriptedOracle:
    """
    Calculate family for a fixed table nu -> (x_1, ..., x_r). Each program
    xors the looked-up value into x under an equality test on nu, so it is
    only practical for narrow nu.
    """

    def __init__(self, N: int, nu_width: int, table: Callable[[int], Sequence[int]]):
        self.N = N
        self.nu_width = nu_width
        self.table = table
        self._programs: Dict[Tuple[int, Tuple[int, ...]], Program] = {}

    def program(self, i: int, sizes: Tuple[int, ...]) -> Program:
        key = (i, sizes)
        if key in self._programs:
            return self._programs[key]
        w = element_width(self.N)
        b = ProgramBuilder(f"scripted_calc[{i}]", materialize=self.nu_width <= 6, tag=CALCULATE_TAG)
        nu = b.cells(b.param("nu", self.nu_width))
        for j, size in enumerate(sizes):
            b.param(f"b{j}", capacity(self.N, size), 3)
        x = b.cells(b.param("x", w))
        for value in range(1 << self.nu_width):
            b.xor_const(x, self.table(value)[i - 1], equals(nu, value))

        def apply(v: Values) -> None:
            nu_value = sum(bit << p for p, bit in enumerate(v["nu"]))
            xi = self.table(nu_value)[i - 1]
            v["x"] = [bit ^ ((xi >> p) & 1) for p, bit in enumerate(v["x"])]

        prog = b.build(Semantics(apply, apply))
        self._programs[key] = prog
        return prog


__all__ = [
    "CalculateOracle",
    "GenPlan",
    "ScriptedOracle",
    "SetGenerator",
    "block_params",
    "call_bound",
    "level_calls",
    "naive_call_count",
    "plan",
    "setgen_ancilla_bound",
    "trace_schedule",
    "two_adic",
]
