import math

import pytest

from app.services.eppstein import (
    CASE_ANY,
    CASE_CYCLE,
    CASE_PATH,
    AcceptingPath,
    Solver,
    audit_branch_decrease,
    decrease_ok,
    edge_select,
    select_branch_edge,
    solve,
    terminal_check,
    triv_red,
)
from app.services.graph import brute_force_fchc


def test_fixture_verdicts(k4, k33, prism, q3, petersen):
    assert solve(k4).result
    assert solve(k33).result
    assert solve(prism).result
    assert solve(q3).result
    assert not solve(petersen).result


def test_trivial_reductions_close_k4_minus_an_edge(k4):
    reduced, tau = triv_red(k4.delete(0))
    assert tau == 5
    assert reduced.forced == frozenset({1, 2, 3, 4})
    assert reduced.deleted == frozenset({0, 5})
    assert terminal_check(reduced) is True


def test_reduced_root_is_a_fixed_point(q3):
    reduced, tau = triv_red(q3)
    assert tau == 0
    assert triv_red(reduced) == (reduced, 0)


def test_dead_end_is_terminal(k4):
    assert terminal_check(k4.delete(0).delete(1)) is False


def test_short_forced_cycle_needs_2c(k33):
    square = k33.force(0).force(3).force(4).force(1)
    assert terminal_check(square) is False
    assert terminal_check(square, check_2c=False) is None
    assert not solve(square).result
    assert not solve(square, check_2c=False).result


def test_branch_edge_selection_is_free(k33, q3):
    label, e = select_branch_edge(k33)
    assert label in (CASE_CYCLE, CASE_PATH, CASE_ANY)
    assert k33.free(e)
    assert edge_select(k33) == e
    assert edge_select(q3.force(0)) == select_branch_edge(q3.force(0))[1]


def test_agrees_with_brute_force_after_forcing(q3, petersen):
    for inst in (q3, petersen):
        for e in range(inst.g.m):
            assert solve(inst.force(e)).result == brute_force_fchc(inst.force(e))
            assert solve(inst.delete(e)).result == brute_force_fchc(inst.delete(e))


def test_threads_do_not_change_the_verdict(q3, petersen):
    assert solve(q3, threads=4).result
    assert not solve(petersen, threads=2).result


def test_exhaustive_run_passes_the_audits(k33, q3, petersen):
    for inst in (k33, q3, petersen):
        stats = solve(inst, exhaustive=True).stats
        report = audit_branch_decrease(stats)
        assert report.depth_bound == math.ceil(stats.s_root / 2)
        assert report.max_audited_depth <= report.depth_bound
        assert all(t <= report.tau_bound for t in report.tau_sums)
        assert report.max_branchings == max((p.branchings for p in stats.accepting), default=0)


def test_stats_of_a_run(k33):
    stats = solve(k33, exhaustive=True).stats
    assert stats.s_root == 6
    assert stats.root_forced_empty
    assert stats.nodes_expanded == len(stats.taus)
    assert stats.nodes_expanded == 2 * len(stats.records) + 1
    assert stats.accepting
    assert sum(stats.cases.values()) == len(stats.records)


@pytest.mark.parametrize("dec, ok", [((3, 3), True), ((2, 5), True), ((5, 2), True), ((2, 4), False), ((1, 9), False)])
def test_decrease_rule(dec, ok):
    assert decrease_ok(dec) is ok


class _RootOracle(Solver):
    def delegate(self, state, depth, stats):
        return brute_force_fchc(state)


def test_delegate_hook_short_circuits_branching(q3):
    verdict = _RootOracle().run(q3)
    assert verdict.result
    assert verdict.stats.nodes_expanded == 1
    assert verdict.stats.accepting == [AcceptingPath(0, 0, 0)]


def test_deleting_a_cycle_spoke_forces_three_more_edges(q3):
    # edges 1-5 and 2-6 forced: face 1-2-4-3 has exactly two corners on F
    state = q3.force(2).force(4)
    assert select_branch_edge(state) == (CASE_CYCLE, 6)
    reduced, tau = triv_red(state.delete(6))
    assert len(reduced.forced) >= len(state.forced) + 3
    assert tau >= 3


def test_spokes_between_two_faces_close_the_cube(q3):
    state = q3
    for e in (2, 4, 6, 7):
        state = state.force(e)
    assert terminal_check(state) is True
    assert brute_force_fchc(state)
