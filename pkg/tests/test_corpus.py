import networkx as nx

from app.services.corpus import (
    FIXTURES,
    IsomorphismIndex,
    dedupe,
    desk_corpus,
    fixtures,
    is_triangle_free,
    random_corpus,
    write_corpus,
)
from app.services.graph import MultiGraph, parse


def _relabel(g: MultiGraph, perm) -> MultiGraph:
    return MultiGraph(g.n, tuple((perm[u - 1], perm[v - 1]) for u, v in g.edges))


def test_fixtures_load():
    loaded = fixtures()
    assert tuple(loaded) == FIXTURES
    assert is_triangle_free(loaded["k33"].g)
    assert is_triangle_free(loaded["petersen"].g)
    assert not is_triangle_free(loaded["prism"].g)


def test_isomorphism_index(k33, prism):
    index = IsomorphismIndex()
    assert index.add(k33.g)
    assert not index.add(_relabel(k33.g, [6, 5, 4, 3, 2, 1]))
    assert index.add(prism.g)


def test_dedupe_keeps_first_of_each_class(k33, prism):
    twin = _relabel(prism.g, [2, 3, 1, 5, 6, 4])
    assert dedupe([prism.g, k33.g, twin]) == [prism.g, k33.g]


def test_random_corpus_on_six_vertices(k33):
    graphs = random_corpus(6, 5, seed=0)
    assert len(graphs) == 1
    assert nx.is_isomorphic(nx.Graph(graphs[0].to_networkx()), nx.Graph(k33.g.to_networkx()))


def test_random_corpus_is_seeded():
    first = random_corpus(10, 3, seed=4, triangle_free=False, unique=False)
    assert first == random_corpus(10, 3, seed=4, triangle_free=False, unique=False)
    assert len(first) == 3
    assert all(g.is_cubic() for g in first)


def test_no_triangle_free_cubic_graph_on_four_vertices():
    assert random_corpus(4, 1) == []


def test_desk_corpus_is_triangle_free():
    corpus = desk_corpus(ns=(6, 8), per_n=2, seed=1)
    assert corpus
    assert all(is_triangle_free(inst.g) and inst.g.is_cubic() for inst in corpus)
    assert {inst.n for inst in corpus} <= {6, 8}


def test_write_corpus(tmp_path, k33, q3):
    paths = write_corpus([k33.g, q3.g], tmp_path / "out", "cubic")
    assert [p.name for p in paths] == ["cubic_0000.g", "cubic_0001.g"]
    assert parse(paths[1].read_text()) == q3.g
