import networkx as nx
import pytest

from app.config import settings
from app.exceptions import DegreeExceeded, GenerationFailed, OracleLimitExceeded, ParseError, SelfLoop
from app.services.graph import (
    FchcInstance,
    MultiGraph,
    brute_force_fchc,
    contract_triangles,
    forced_cycle_lengths,
    free_graph_is_collection,
    is_connected,
    parse,
    parse_instance,
    random_cubic,
    serialize,
    size_metric,
    unforced_isolated_cycles,
)


def test_fixtures_are_cubic(k4, k33, prism, q3, petersen):
    for inst, n in ((k4, 4), (k33, 6), (prism, 6), (q3, 8), (petersen, 10)):
        assert inst.n == n
        assert inst.g.m == 3 * n // 2
        assert inst.g.is_cubic()
        assert not inst.forced


def test_parse_forced_edges_and_comments():
    inst = parse_instance("c two vertices, three parallel edges\np 2 3\ne 1 2\ne 1 2\ne 2 1\nf 2\n")
    assert inst.g.edges == ((1, 2), (1, 2), (2, 1))
    assert inst.forced == frozenset({1})


@pytest.mark.parametrize("text, error", [
    ("e 1 2\np 2 1\n", ParseError),
    ("p 2 2\ne 1 2\n", ParseError),
    ("p 2 1\ne 1 3\n", ParseError),
    ("p 2 1\ne 1 x\n", ParseError),
    ("p 2 1\ne 1 2\nf 2\n", ParseError),
    ("p 2 1\nq 1 2\n", ParseError),
    ("", ParseError),
    ("p 2 1\ne 2 2\n", SelfLoop),
    ("p 2 4\ne 1 2\ne 1 2\ne 1 2\ne 1 2\n", DegreeExceeded),
])
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_instance(text)


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as info:
        parse_instance("p 3 1\n\ne 1 9\n")
    assert info.value.line == 3


def test_serialize_parse(k33):
    g = parse(serialize(k33.g, forced=[0, 4]))
    assert g.edges == k33.g.edges
    assert parse_instance(serialize(k33.g, forced=[0, 4])).forced == frozenset({0, 4})


def test_four_cycles(k4, k33, prism, q3, petersen):
    assert len(k4.g.four_cycles) == 3
    assert len(k33.g.four_cycles) == 9
    assert len(prism.g.four_cycles) == 3
    assert len(q3.g.four_cycles) == 6
    assert petersen.g.four_cycles == ()


def test_triangles(k4, k33, prism):
    assert k4.g.triangle() == (1, 2, 3)
    assert prism.g.triangle() == (1, 2, 3)
    assert k33.g.triangle() is None


def test_contract_triangles(k4, prism, k33):
    for inst in (k4, prism):
        g = contract_triangles(inst.g)
        assert g.n == 2
        assert g.m == 3
        assert g.is_cubic()
    assert contract_triangles(k33.g) == k33.g


def test_forced_and_deleted_must_be_disjoint(k4):
    with pytest.raises(ValueError):
        FchcInstance(k4.g, frozenset({0}), frozenset({0}))


def test_size_metric(k4):
    assert size_metric(k4) == 4
    # 13, 32, 24, 41 stays a free 4-cycle whose corners all touch F
    assert size_metric(k4.force(0).force(5)) == 1


def test_random_cubic_is_seeded_simple_and_connected():
    g = random_cubic(12, 7)
    assert g == random_cubic(12, 7)
    assert g.is_cubic()
    simple = nx.Graph(g.to_networkx())
    assert simple.number_of_edges() == g.m
    assert nx.is_connected(simple)


@pytest.mark.parametrize("n", [2, 5])
def test_random_cubic_rejects_bad_n(n):
    with pytest.raises(GenerationFailed):
        random_cubic(n, 0)


def test_brute_force(k4, k33, prism, q3, petersen):
    assert brute_force_fchc(k4)
    assert brute_force_fchc(k33)
    assert brute_force_fchc(prism)
    assert brute_force_fchc(q3)
    assert not brute_force_fchc(petersen)


def test_brute_force_respects_forced_and_deleted(k4):
    assert brute_force_fchc(k4.force(0).force(5))
    assert not brute_force_fchc(k4.force(0).delete(1).delete(2))
    three = MultiGraph(2, ((1, 2), (1, 2), (1, 2)))
    assert brute_force_fchc(FchcInstance(three))
    assert not brute_force_fchc(FchcInstance(three, forced=frozenset({0, 1, 2})))


def test_brute_force_limit(k4, monkeypatch):
    monkeypatch.setattr(settings, "HYBRID_FCHC_ORACLE_LIMIT", 3)
    with pytest.raises(OracleLimitExceeded):
        brute_force_fchc(k4)


def test_unforced_isolated_cycles(q3):
    assert unforced_isolated_cycles(q3) == []
    # force the four edges joining the faces {1,2,3,4} and {5,6,7,8}
    spokes = q3.force(2).force(4).force(6).force(7)
    cycles = unforced_isolated_cycles(spokes)
    assert {frozenset(c.vertices) for c in cycles} == {frozenset({1, 2, 3, 4}), frozenset({5, 6, 7, 8})}
    assert size_metric(spokes) == 2


def test_connectivity_ignores_deleted_edges(q3):
    assert is_connected(q3.g)
    assert is_connected(q3.g, deleted=[0])
    assert not is_connected(q3.g, deleted=[0, 1, 2])
    assert is_connected(MultiGraph(1, ()))


def test_free_graph_collection_and_forced_cycles(q3):
    faces = q3.force(2).force(4).force(6).force(7)
    assert free_graph_is_collection(faces)
    assert not free_graph_is_collection(q3)
    assert forced_cycle_lengths(faces) == []
    square = FchcInstance(q3.g, frozenset({0, 1, 3, 5}))
    assert forced_cycle_lengths(square) == [4]
    digon = FchcInstance(MultiGraph(2, ((1, 2), (1, 2))), frozenset({0, 1}))
    assert forced_cycle_lengths(digon) == [2]


def test_contracting_triangles_keeps_hamiltonicity(k4, prism):
    graphs = [k4.g, prism.g]
    graphs += [random_cubic(n, seed) for n in range(6, 16, 2) for seed in range(12)]
    contracted = 0
    for g in graphs:
        small = contract_triangles(g)
        contracted += small.n < g.n
        assert brute_force_fchc(FchcInstance(small)) == brute_force_fchc(FchcInstance(g)), g
    assert contracted >= 2
