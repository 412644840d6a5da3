import numpy as np
import pytest

from app.services.ccs import CASES, IGNORED_CASES, local_program, scan_objects, status_width
from app.services.encoding import block_sizes, encode_basic, encode_eff
from app.services.qsim import CASE_RULES, QsimContext, QsimPrograms, classical_calculate
from app.services.revcore import Machine
from app.services.verify import run_and_undo


def run_gates(prog, values, fast=False):
    """Runs a program on fresh registers and reads every parameter back"""
    machine = Machine(fast=fast)
    regs = {}
    for slot in prog.params:
        regs[slot.name] = machine.alloc_ancilla(slot.width, slot.radix, name=slot.name)
        if slot.name in values:
            machine.write(regs[slot.name], list(values[slot.name]))
    machine.run(prog, regs)
    return {name: machine.read(reg) for name, reg in regs.items()}


def as_int(bits):
    return sum(bit << p for p, bit in enumerate(bits))


def random_prefix(ctx, rng):
    """A nonempty consistent set of forced and deleted edge elements"""
    while True:
        status = rng.integers(0, 4, size=ctx.m)
        X = {e + 1 for e in range(ctx.m) if status[e] == 1}
        X |= {e + 1 + ctx.m for e in range(ctx.m) if status[e] == 2}
        if X:
            return sorted(X)


def prefix_values(ctx, X, i, nu_i):
    nu = [0] * ctx.r
    nu[i - 1] = nu_i
    return {"nu": nu, "b0": encode_basic(ctx.N, X).cells}


@pytest.fixture
def k33_programs(k33):
    return QsimPrograms(QsimContext(k33), materialize=True)


@pytest.mark.parametrize("case", list(CASES))
def test_local_programs_restore_their_scratch(k33, case):
    ctx = QsimContext(k33)
    rng = np.random.default_rng(case)
    for obj in scan_objects(ctx.g, case)[:4]:
        prog = local_program(ctx.g, ctx.w, case, obj, True)
        for on in (0, 1):
            st = [int(b) for b in rng.integers(0, 2, size=status_width(obj.edges))]
            out = run_gates(prog, {"st": st, "on": [on], "nu": [1]})
            assert out["st"] == st
            if not on:
                assert not any(out["e"] + out["a"] + out["fb"])


@pytest.mark.parametrize("case", list(CASES))
def test_check_select_on_the_empty_prefix(k33_programs, case):
    ctx = k33_programs.ctx
    prog = k33_programs.check_select(1, case)
    for nu_1 in (0, 1):
        nu = [nu_1] + [0] * (ctx.r - 1)
        out = run_gates(prog, {"nu": nu, "enable": [1]})
        hit = CASE_RULES[case](ctx, ctx.state(set()), 1, nu_1)
        expected = (0, 0, 0) if hit is None else (hit[0], hit[1], 1)
        assert (as_int(out["e"]), out["a"][0], out["fb"][0]) == expected
        assert out["nu"] == nu


@pytest.mark.parametrize("name", ["k33", "q3"])
def test_check_select_agrees_with_the_classical_rules(name, request):
    ctx = QsimContext(request.getfixturevalue(name))
    programs = QsimPrograms(ctx, materialize=True)
    rng = np.random.default_rng(11)
    for _ in range(3):
        X = random_prefix(ctx, rng)
        state = ctx.state(set(X))
        for case in CASES:
            prog = programs.check_select(2, case, (len(X),))
            for nu_2 in (0, 1):
                values = dict(prefix_values(ctx, X, 2, nu_2), enable=[1])
                out = run_gates(prog, values)
                hit = CASE_RULES[case](ctx, state, 2, nu_2)
                got = as_int(out["e"]), out["a"][0], out["fb"][0]
                assert got == ((0, 0, 0) if hit is None else (hit[0], hit[1], 1)), (X, case, nu_2)


def test_disabled_check_select_is_the_identity(k33_programs):
    ctx = k33_programs.ctx
    X = [1, ctx.m + 5]
    prog = k33_programs.check_select(2, 6, (len(X),))
    values = prefix_values(ctx, X, 2, 1)
    out = run_gates(prog, values)
    assert not any(out["e"] + out["a"] + out["fb"])
    assert out["b0"] == list(values["b0"])


def first_case(ctx, X, i):
    state = ctx.state(set(X))
    return next(case for case in CASES if CASE_RULES[case](ctx, state, i, 0) is not None)


@pytest.mark.parametrize("name", ["k33", "q3"])
def test_cascade_fires_exactly_one_case(name, request):
    ctx = QsimContext(request.getfixturevalue(name))
    programs = QsimPrograms(ctx, materialize=True)
    rng = np.random.default_rng(5)
    for _ in range(3):
        X = random_prefix(ctx, rng)
        j = first_case(ctx, X, 2)
        for nu_2 in (0, 1):
            out = run_gates(programs.cascade(2, (len(X),)), prefix_values(ctx, X, 2, nu_2))
            fc = as_int(out["fc"])
            assert fc == 8 - j
            assert out["fb"] == [1]
            element, action = CASE_RULES[j](ctx, ctx.state(set(X)), 2, nu_2)
            assert as_int(out["e"]) == element
            assert out["a"] == [action]


@pytest.mark.parametrize("name, runs", [("k33", 40), ("q3", 12)])
def test_calculate_gates_match_the_classical_step(name, runs, request):
    ctx = QsimContext(request.getfixturevalue(name))
    programs = QsimPrograms(ctx, materialize=True)
    rng = np.random.default_rng(7)
    for _ in range(runs):
        X = random_prefix(ctx, rng)
        x0 = int(rng.integers(0, 1 << ctx.w))
        for nu_2 in (0, 1):
            values = dict(prefix_values(ctx, X, 2, nu_2), x=[(x0 >> p) & 1 for p in range(ctx.w)])
            out = run_and_undo(programs.calculate(2, (len(X),)), values)
            x, case = classical_calculate(ctx, set(X), 2, nu_2)
            assert as_int(out["x"]) == x0 ^ x
            if case in IGNORED_CASES:
                values["nu"][1] = 1 - nu_2
                assert run_and_undo(programs.calculate(2, (len(X),)), values)["x"] == out["x"]


def test_first_step_uses_no_queries(k33_programs):
    prog = k33_programs.calculate(1)
    assert {s.name for s in prog.params} == {"nu", "x"}
    assert not any(s.name == "qx" for s in k33_programs.scan(7, ()).ancillas)


@pytest.mark.parametrize("name", ["degree", "forced", "collection"])
def test_check_clauses_agree_with_the_classical_tests(q3, name):
    ctx = QsimContext(q3)
    programs = QsimPrograms(ctx, materialize=True)
    rng = np.random.default_rng(3)
    prog = programs.clause(name)
    for _ in range(4):
        prefix = random_prefix(ctx, rng)
        dummies = [ctx.dummy_element(i) for i in range(1, ctx.r + 1)]
        Z = (prefix + dummies)[:ctx.r]
        enc = encode_eff(ctx.N, Z)
        values = {f"b{j}": block.cells for j, block in enumerate(enc.blocks)}
        assert len(enc.blocks) == len(block_sizes(ctx.r))
        expected = run_gates(prog, values, fast=True)
        out = run_and_undo(prog, values)
        assert out["out"] == expected["out"]


def test_counted_programs_measure_the_gates(k33):
    ctx = QsimContext(k33)
    built = QsimPrograms(ctx, materialize=True).cascade(2, (3,))
    counted = QsimPrograms(ctx).cascade(2, (3,))
    assert counted.opaque
    assert counted.cost.gates == built.cost.gates
    assert counted.cost.peak_bits == built.cost.peak_bits
