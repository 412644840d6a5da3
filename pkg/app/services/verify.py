"""
Property suites run by the `verify` command. Each suite sweeps one layer at
desk scale and reports named checks; the command fails if any check fails.
"""
from __future__ import annotations

import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy import stats as scistats

from app.exceptions import FchcError
from app.services.corpus import desk_corpus, fixtures
from app.services.encoding import (
    contains_prog,
    convert_prog,
    decode_basic,
    decode_eff,
    eff_bound,
    eff_contains_ancilla_bound,
    eff_contains_prog,
    eff_layout,
    element_width,
    encode_basic,
    encode_eff,
    union_ancilla_bound,
    union_prog,
)
from app.services.eppstein import audit_branch_decrease, solve
from app.services.graph import FchcInstance, brute_force_fchc, contract_triangles
from app.services.hybrid import (
    Branch,
    FrameworkSpec,
    HybridConfig,
    SpaceModel,
    default_model,
    f_inverse,
    hybrid_solve,
    lambert_w_m1,
    negative_model_exponent,
    recurrence_exponent,
)
from app.services.qsim import enumerate_search, grover_cost_model
from app.services.revcore import CALCULATE_TAG, Machine, Program
from app.services.setgen import (
    ScriptedOracle,
    SetGenerator,
    call_bound,
    level_calls,
    naive_call_count,
    plan,
    setgen_ancilla_bound,
)
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class SuiteReport(BaseModel):
    suite: str
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


class _Suite:
    def __init__(self, name: str):
        self.name = name
        self.checks: List[CheckResult] = []

    def check(self, name: str, fn: Callable[[], Optional[str]]) -> None:
        """fn returns None on success or a failure description; raising also fails"""
        try:
            problem = fn()
        except (FchcError, AssertionError, ValueError) as exc:
            problem = f"{type(exc).__name__}: {exc}"
        passed = problem is None
        if not passed:
            logger.error(f"[{self.name}] {name} failed: {problem}")
        self.checks.append(CheckResult(name=name, passed=passed, detail=problem or ""))

    def report(self) -> SuiteReport:
        return SuiteReport(suite=self.name, checks=self.checks)


def run_and_undo(program: Program, inputs: Dict[str, List[int]], fast: bool = False) -> Dict[str, List[int]]:
    """Run program on fresh registers, record outputs, undo, and require a clean restore"""
    machine = Machine(fast=fast)
    regs = {}
    for slot in program.params:
        reg = machine.alloc_ancilla(slot.width, slot.radix, name=slot.name)
        machine.write(reg, inputs.get(slot.name, [0] * slot.width))
        regs[slot.name] = reg
    before = {name: machine.read(reg) for name, reg in regs.items()}
    machine.run(program, regs)
    after = {name: machine.read(reg) for name, reg in regs.items()}
    machine.run(program.inverse(), regs)
    for name, reg in regs.items():
        if machine.read(reg) != before[name]:
            raise AssertionError(f"'{program.name}' inverse did not restore '{name}'")
        machine.write(reg, [0] * reg.width)
        machine.free_ancilla(reg, "verify")
    return after


def _bits(value: int, width: int) -> List[int]:
    return [(value >> i) & 1 for i in range(width)]


# Encodings


def encodings_suite(max_n: int = 12, trials: int = 200, seed: int = 0) -> SuiteReport:
    suite = _Suite("encodings")
    rng = np.random.default_rng(seed)

    def worked_example():
        got = str(encode_basic(20, [6, 7, 10, 15, 17]))
        return None if got == "110212112101210200000" else f"got {got}"

    def round_trip():
        for N in range(1, max_n + 1):
            for mask in range(1, 1 << N):
                S = {v + 1 for v in range(N) if mask >> v & 1}
                if decode_basic(N, len(S), encode_basic(N, S)) != S:
                    return f"N={N}, S={sorted(S)}"
        return None

    def eff_size():
        for N in range(1, 65):
            for k in range(1, N + 1):
                if sum(eff_layout(N, k)) > eff_bound(N, k):
                    return f"N={N}, k={k}"
        return None

    def eff_blocks():
        for _ in range(trials):
            N = int(rng.integers(4, 40))
            k = int(rng.integers(1, N + 1))
            Z = [int(v) for v in rng.permutation(N)[:k] + 1]
            enc = encode_eff(N, Z)
            blocks = decode_eff(N, k, enc.cells)
            start = 0
            for block, size in zip(blocks, enc.sizes):
                if block != set(Z[start:start + size]):
                    return f"N={N}, Z={Z}"
                start += size
        return None

    def contains_gates():
        N = 10
        for _ in range(trials):
            k = int(rng.integers(1, 4))
            S = [int(v) for v in rng.permutation(N)[:k] + 1]
            x = int(rng.integers(0, 1 << element_width(N)))
            prog = contains_prog(N, k, materialize=True)
            out = run_and_undo(prog, {"enc": list(encode_basic(N, S).cells), "x": _bits(x, element_width(N))})
            if out["out"][0] != int(x in S):
                return f"S={S}, x={x}"
        return None

    def convert_gates():
        N = 12
        prog = convert_prog(N, materialize=True)
        for x in range(1, N + 1):
            out = run_and_undo(prog, {"x": _bits(x, element_width(N))})
            if out["out"] != list(encode_basic(N, [x]).cells):
                return f"x={x}"
        return None

    def union_gates():
        N = 8
        for _ in range(max(1, trials // 10)):
            k1, k2 = (int(v) for v in rng.integers(1, 3, size=2))
            perm = [int(v) for v in rng.permutation(N) + 1]
            S1, S2 = perm[:k1], perm[k1:k1 + k2]
            prog = union_prog(N, k1, k2, materialize=True)
            out = run_and_undo(prog, {
                "e1": list(encode_basic(N, S1).cells),
                "e2": list(encode_basic(N, S2).cells),
            })
            if out["out"] != list(encode_basic(N, S1 + S2).cells):
                return f"S1={S1}, S2={S2}"
        return None

    def ancilla_bounds():
        for N in range(2, max_n + 1):
            for k in range(1, N + 1):
                peak = eff_contains_prog(N, k, materialize=False).peak_ancilla
                if peak > eff_contains_ancilla_bound(N):
                    return f"eff_contains N={N}, k={k}: {peak} cells"
            for k1 in range(1, N):
                for k2 in range(1, N - k1 + 1):
                    peak = union_prog(N, k1, k2, materialize=False).peak_ancilla
                    if peak > union_ancilla_bound(N, k1 + k2):
                        return f"union N={N}, k1={k1}, k2={k2}: {peak} cells"
        return None

    suite.check("worked_example", worked_example)
    suite.check("basic_round_trip", round_trip)
    suite.check("eff_size_bound", eff_size)
    suite.check("eff_blocks", eff_blocks)
    suite.check("contains_gate_level", contains_gates)
    suite.check("convert_gate_level", convert_gates)
    suite.check("union_gate_level", union_gates)
    suite.check("ancilla_bounds", ancilla_bounds)
    return suite.report()


# Set generation


def _table_oracle(N: int, r: int, nu_width: int, seed: int) -> ScriptedOracle:
    rng = np.random.default_rng(seed)
    rows = [tuple(int(v) for v in rng.permutation(N)[:r] + 1) for _ in range(1 << nu_width)]
    return ScriptedOracle(N, nu_width, lambda value: rows[value])


def setgen_suite(max_level: int = 4, max_r: int = 64, seed: int = 0) -> SuiteReport:
    suite = _Suite("setgen")

    def level_counts():
        r = 1 << max_level
        gen = SetGenerator(r, _table_oracle(2 * r, r, 2, seed))
        for l in range(max_level + 1):
            got = gen.r_block(0, l).cost.calls_tagged(CALCULATE_TAG)
            if got != level_calls(l):
                return f"level {l}: {got} calls, expected {level_calls(l)}"
        return None

    def totals():
        for r in range(1, max_r + 1):
            if plan(r).expected_calls > call_bound(r):
                return f"r={r}"
        return None

    def generated_calls():
        for r in range(1, 17):
            gen = SetGenerator(r, _table_oracle(2 * r, r, 2, seed + r))
            got = gen.generate().cost.calls_tagged(CALCULATE_TAG)
            if got != plan(r).expected_calls:
                return f"r={r}: {got} calls, plan says {plan(r).expected_calls}"
        return None

    def generated_sets():
        r, nu_width = 11, 3
        oracle = _table_oracle(2 * r, r, nu_width, seed)
        prog = SetGenerator(r, oracle).generate()
        for value in range(1 << nu_width):
            out = run_and_undo(prog, {"nu": _bits(value, nu_width)}, fast=True)
            blocks = decode_eff(oracle.N, r, out["eff"])
            row = oracle.table(value)
            start = 0
            for block, size in zip(blocks, plan(r).sizes):
                if block != set(row[start:start + size]):
                    return f"nu={value}"
                start += size
        return None

    def naive_contrast():
        for r in range(8, 17):
            if naive_call_count(r) < 2 ** (r / 2):
                return f"r={r}"
        gen = SetGenerator(8, _table_oracle(16, 8, 2, seed))
        got = gen.naive().cost.calls_tagged(CALCULATE_TAG)
        return None if got == naive_call_count(8) else f"naive r=8 made {got} calls"

    def ancilla_bound():
        for r in range(1, min(max_r, 24) + 1):
            gen = SetGenerator(r, _table_oracle(2 * r, r, 2, seed + r))
            oracle_cells = max(gen.calculate(i).peak_ancilla for i in range(1, r + 1))
            peak = gen.generate().peak_ancilla
            if peak > setgen_ancilla_bound(gen.N, r, oracle_cells):
                return f"r={r}: {peak} cells"
        return None

    suite.check("level_call_counts", level_counts)
    suite.check("total_call_bound", totals)
    suite.check("generate_call_counts", generated_calls)
    suite.check("generate_output", generated_sets)
    suite.check("naive_exponential", naive_contrast)
    suite.check("generate_ancilla_bound", ancilla_bound)
    return suite.report()


# Classical solver


def _corpus(ns: Sequence[int], per_n: int, seed: int) -> List[FchcInstance]:
    named = [inst for name, inst in fixtures().items() if name not in ("k4", "prism")]
    return named + desk_corpus(ns, per_n, seed)


def node_growth(instances: Sequence[FchcInstance]) -> Dict[str, float]:
    """Least-squares slope of log2(nodes) against s_root for exhaustive runs"""
    s_values, logs = [], []
    for inst in instances:
        verdict = solve(inst, exhaustive=True)
        s_values.append(verdict.stats.s_root)
        logs.append(math.log2(verdict.stats.nodes_expanded))
    fit = scistats.linregress(s_values, logs)
    return {
        "slope": float(fit.slope),
        "upper95": float(fit.slope + 1.96 * fit.stderr),
        "points": len(s_values),
    }


def eppstein_suite(ns: Sequence[int] = (6, 8, 10, 12), per_n: int = 16, seed: int = 0) -> SuiteReport:
    suite = _Suite("eppstein")
    corpus = _corpus(ns, per_n, seed)
    audited = {"nodes": 0}

    def oracle_agreement():
        for inst in corpus:
            expected = brute_force_fchc(inst)
            if solve(inst).result != expected:
                return f"n={inst.n} edges={inst.g.edges}"
            if solve(inst, check_2c=False).result != expected:
                return f"without 2c: n={inst.n} edges={inst.g.edges}"
        return None

    def audits():
        for inst in corpus:
            report = audit_branch_decrease(solve(inst, exhaustive=True).stats)
            audited["nodes"] += report.audited_nodes
        return None

    def growth():
        fit = node_growth(corpus)
        if fit["upper95"] > 0.34:
            return f"slope {fit['slope']:.3f}, upper 95% bound {fit['upper95']:.3f}"
        return None

    suite.check("oracle_agreement", oracle_agreement)
    suite.check("branch_audit", audits)
    suite.check("node_growth", growth)
    logger.info(f"eppstein suite audited {audited['nodes']} in-hypothesis nodes")
    return suite.report()


# Reversible search


def qsim_suite(ns: Sequence[int] = (6, 8), per_n: int = 8, seed: int = 0) -> SuiteReport:
    suite = _Suite("qsim")
    corpus = _corpus(ns, per_n, seed)

    def pruned_agreement():
        for inst in corpus:
            report = enumerate_search(inst, mode="pruned")
            if report.found != brute_force_fchc(inst):
                return f"n={inst.n} edges={inst.g.edges}"
        return None

    def branch_bits():
        for inst in corpus:
            report = enumerate_search(inst, mode="pruned")
            if report.found and not grover_cost_model(report).within_bound:
                return f"n={inst.n}: {report.audited_branch_bits} audited bits for s={report.s}"
        return None

    def reversible_backend():
        inst = FchcInstance(contract_triangles(fixtures()["k4"].g))
        classical = enumerate_search(inst, mode="pruned")
        reversible = enumerate_search(inst, mode="pruned", backend="reversible")
        if classical.found != reversible.found or classical.witness != reversible.witness:
            return f"classical {classical.witness} vs reversible {reversible.witness}"
        return None

    suite.check("pruned_agreement", pruned_agreement)
    suite.check("branch_bits", branch_bits)
    suite.check("reversible_backend", reversible_backend)
    return suite.report()


# Hybrid layer


def hybrid_suite(
    model: Optional[SpaceModel] = None,
    cs: Sequence[float] = (0.1, 0.25, 0.5),
    ns: Sequence[int] = (6, 8, 10),
    per_n: int = 8,
    seed: int = 0,
) -> SuiteReport:
    suite = _Suite("hybrid")
    model = model or default_model()

    def lambert_residual():
        for x in -np.geomspace(1e-12, 1 / math.e, 400):
            w = lambert_w_m1(float(x))
            if w > -1.0 or abs(w * math.exp(w) - x) >= 1e-12 * abs(x):
                return f"x={x}, w={w}"
        return None

    def inverse():
        unit = SpaceModel(A=1.0, B=1.0)
        for c in (0.01, 0.05, 0.1, 0.5, 0.9):
            lam = f_inverse(c, unit)
            if abs(unit.F(lam) - c) > 1e-10:
                return f"c={c}: F(F^-1(c))={unit.F(lam)}"
        return None

    def recurrences():
        gamma = recurrence_exponent(FrameworkSpec.from_matrix([[3, 2, 5], [3, 5, 2]]))
        if abs(gamma - 1 / 3) > 1e-9:
            return f"gamma={gamma}"
        for delta in (4, 8, 16):
            t = 3 * delta
            framework = FrameworkSpec(cases=[
                [Branch(decrease=1, count=2)],
                [Branch(decrease=delta, count=t * t * 2 ** delta)],
            ])
            expected = 1 + 2 * math.log2(3 * delta) / delta
            if abs(recurrence_exponent(framework) - expected) > 1e-6:
                return f"delta={delta}"
        return None

    def negative_model():
        for n in (16, 256, 4096, 1 << 20):
            gap = negative_model_exponent(0.5, n) - 1 / 3
            if abs(gap + 0.5 / math.log2(n)) > 1e-12:
                return f"n={n}"
        return None

    def budget_safety():
        corpus = _corpus(ns, per_n, seed)
        for c in cs:
            cfg = HybridConfig(c=c)
            for inst in corpus:
                verdict = hybrid_solve(inst, cfg, model)
                if verdict.result != solve(inst).result:
                    return f"c={c}, n={inst.n}: verdict differs"
                for h in verdict.stats.handoffs:
                    if h.s > verdict.s_tilde or h.space_bits > verdict.budget:
                        return f"c={c}, n={inst.n}: handoff s={h.s} bits={h.space_bits}"
        return None

    suite.check("lambert_residual", lambert_residual)
    suite.check("f_inverse", inverse)
    suite.check("recurrence_exponents", recurrences)
    suite.check("negative_model", negative_model)
    suite.check("budget_safety", budget_safety)
    return suite.report()


SUITES: Dict[str, Callable[..., SuiteReport]] = {
    "encodings": encodings_suite,
    "setgen": setgen_suite,
    "eppstein": eppstein_suite,
    "qsim": qsim_suite,
    "hybrid": hybrid_suite,
}


def run_suite(name: str, **kwargs) -> SuiteReport:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    report = SUITES[name](**kwargs)
    logger.info(
        f"suite {name}: {sum(c.passed for c in report.checks)}/{len(report.checks)} checks passed"
    )
    return report
