"""
Instance corpora: shipped fixture graphs and seeded random cubic graphs,
filtered to triangle-free ones and deduplicated up to isomorphism.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence

import networkx as nx

from app.exceptions import GenerationFailed
from app.services.graph import FchcInstance, MultiGraph, parse_instance, random_cubic, serialize
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
FIXTURES = ("k4", "k33", "prism", "q3", "petersen")

# Seeds are spread so corpora for different n never share a generator stream.
SEED_STRIDE = 1_000_003


def load_fixture(name: str) -> FchcInstance:
    path = DATA_DIR / f"{name}.g"
    if not path.exists():
        raise FileNotFoundError(f"no fixture named {name!r} in {DATA_DIR}")
    return parse_instance(path.read_text())


def fixtures() -> Dict[str, FchcInstance]:
    return {name: load_fixture(name) for name in FIXTURES}


def is_triangle_free(g: MultiGraph) -> bool:
    return g.triangle() is None


def _simple(g: MultiGraph) -> nx.Graph:
    return nx.Graph(g.to_networkx())


class IsomorphismIndex:
    """Isomorphism classes seen so far, bucketed by Weisfeiler-Lehman hash"""

    def __init__(self):
        self._buckets: Dict[str, List[nx.Graph]] = {}

    def add(self, g: MultiGraph) -> bool:
        """Record g; False when an isomorphic graph was already recorded"""
        h = _simple(g)
        bucket = self._buckets.setdefault(f"{g.n}:{nx.weisfeiler_lehman_graph_hash(h)}", [])
        if any(nx.is_isomorphic(h, other) for other in bucket):
            return False
        bucket.append(h)
        return True


def dedupe(graphs: Iterable[MultiGraph]) -> List[MultiGraph]:
    """Keep the first graph of every isomorphism class, in input order"""
    index = IsomorphismIndex()
    return [g for g in graphs if index.add(g)]


def random_graphs(n: int, count: int, seed: int) -> Iterator[MultiGraph]:
    """count seeded draws; seed i of the run is seed * SEED_STRIDE + n * 1000 + i"""
    for i in range(count):
        yield random_cubic(n, seed * SEED_STRIDE + n * 1000 + i)


def random_corpus(
    n: int,
    count: int,
    seed: int = 0,
    triangle_free: bool = True,
    unique: bool = True,
    attempts: int = 20,
) -> List[MultiGraph]:
    """
    Up to count connected cubic graphs on n vertices

    Draws at most attempts * count graphs; a class of graphs that does not
    exist (e.g. triangle-free on 4 vertices) yields a short or empty list.
    """
    out: List[MultiGraph] = []
    index = IsomorphismIndex()
    for g in random_graphs(n, count * attempts, seed):
        if triangle_free and not is_triangle_free(g):
            continue
        if unique and not index.add(g):
            continue
        out.append(g)
        if len(out) >= count:
            break
    logger.info(f"corpus n={n}: {len(out)} graphs (asked {count}, seed {seed})")
    return out


def desk_corpus(
    ns: Sequence[int] = (6, 8, 10, 12),
    per_n: int = 32,
    seed: int = 0,
) -> List[FchcInstance]:
    """Triangle-free cubic graphs, distinct up to isomorphism, for each n in ns"""
    instances = []
    for n in ns:
        try:
            graphs = random_corpus(n, per_n, seed=seed)
        except GenerationFailed as exc:
            logger.warning(f"skipping n={n}: {exc}")
            continue
        instances.extend(FchcInstance(g) for g in graphs)
    return instances


def write_corpus(graphs: Iterable[MultiGraph], out_dir: Path, prefix: str) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, g in enumerate(graphs):
        path = out_dir / f"{prefix}_{i:04d}.g"
        path.write_text(serialize(g))
        paths.append(path)
    return paths
