import pytest

from app.exceptions import InvalidK, PlanViolation
from app.services.encoding import decode_eff, encode_basic
from app.services.revcore import CALCULATE_TAG
from app.services.setgen import (
    ScriptedOracle,
    SetGenerator,
    call_bound,
    level_calls,
    naive_call_count,
    plan,
    setgen_ancilla_bound,
    trace_schedule,
    two_adic,
)
from app.services.verify import run_and_undo

TABLE = {
    0: (3, 1, 6, 2),
    1: (5, 4, 2, 8),
    2: (1, 2, 3, 4),
    3: (8, 7, 6, 5),
}


def _oracle(N: int = 8, nu_width: int = 2) -> ScriptedOracle:
    return ScriptedOracle(N, nu_width, lambda value: TABLE[value])


def test_two_adic():
    assert two_adic(1) == 0
    assert two_adic(12) == 2
    assert two_adic(8) == 3


def test_plan_blocks():
    p = plan(11)
    assert p.blocks == ((0, 3), (8, 1), (10, 0))
    assert p.sizes == (8, 2, 1)
    assert p.expected_calls == 2 * 64 + 2 * 4 + 2
    with pytest.raises(InvalidK):
        plan(0)


def test_call_totals_stay_within_bound():
    assert call_bound(11) == 170
    for r in range(1, 200):
        assert plan(r).expected_calls <= call_bound(r)


def test_level_blocks_make_two_times_four_to_the_l_calls():
    gen = SetGenerator(4, _oracle())
    for l in range(3):
        assert gen.r_block(0, l).cost.calls_tagged(CALCULATE_TAG) == level_calls(l)


def test_misaligned_block_is_rejected():
    gen = SetGenerator(4, _oracle())
    with pytest.raises(PlanViolation):
        gen.r_block(1, 1)
    with pytest.raises(PlanViolation):
        gen.r_block(2, 2)


def test_generator_rejects_r_above_universe():
    with pytest.raises(InvalidK):
        SetGenerator(9, _oracle())


def test_generate_writes_every_block():
    oracle = _oracle()
    gen = SetGenerator(3, oracle)
    prog = gen.generate()
    assert prog.cost.calls_tagged(CALCULATE_TAG) == plan(3).expected_calls
    for value in range(4):
        out = run_and_undo(prog, {"nu": [value & 1, value >> 1]}, fast=True)
        row = TABLE[value]
        assert decode_eff(8, 3, out["eff"]) == [{row[0], row[1]}, {row[2]}]


def test_naive_generation_doubles_calls():
    assert naive_call_count(3) == 14
    gen = SetGenerator(4, _oracle())
    assert gen.naive().cost.calls_tagged(CALCULATE_TAG) == naive_call_count(4)
    assert naive_call_count(16) > plan(16).expected_calls


def test_naive_programs_are_memoized_per_generator():
    gen = SetGenerator(4, _oracle())
    assert gen.naive(3) is gen.naive(3)
    assert gen.naive() is gen.naive(4)
    other = SetGenerator(4, _oracle())
    assert other.naive(3) is not gen.naive(3)


def test_trace_schedule_expands_recursively():
    assert trace_schedule(2) == [
        {"i": 0, "l": 1, "depth": 0, "calls": 8},
        {"i": 0, "l": 0, "depth": 1, "calls": 2},
        {"i": 1, "l": 0, "depth": 1, "calls": 2},
    ]
    top = [e for e in trace_schedule(11) if e["depth"] == 0]
    assert [(e["i"], e["l"]) for e in top] == list(plan(11).blocks)


@pytest.mark.parametrize("r", [1, 3, 4])
def test_generate_stays_within_ancilla_bound(r):
    gen = SetGenerator(r, _oracle())
    oracle_cells = max(gen.calculate(i).peak_ancilla for i in range(1, r + 1))
    assert gen.generate().peak_ancilla <= setgen_ancilla_bound(8, r, oracle_cells)


@pytest.mark.parametrize("r", [1, 3])
def test_eff_to_basic_merges_blocks(r):
    prog = SetGenerator(r, _oracle()).eff_to_basic()
    for value in range(4):
        out = run_and_undo(prog, {"nu": [value & 1, value >> 1]}, fast=True)
        assert out["out"] == list(encode_basic(8, TABLE[value][:r]).cells)
