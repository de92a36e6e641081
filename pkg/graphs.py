# graphs.py
"""Small motif graphs: automorphisms, labeled isomorphic copies and overlap pair families."""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import networkx as nx
from networkx.algorithms import isomorphism

from config import Config
from errors import GraphError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _normalize_edges(edges: Iterable[Sequence[int]]) -> FrozenSet[Edge]:
    normalized = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        normalized.add((min(u, v), max(u, v)))
    return frozenset(normalized)


@dataclass(frozen=True)
class SmallGraph:
    """Labeled simple graph; two graphs are equal iff labels and edge sets agree."""
    labels: Tuple[int, ...]
    edges: FrozenSet[Edge]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.labels:
            raise GraphError("a graph needs at least one vertex")
        label_set = set(self.labels)
        if len(label_set) != len(self.labels):
            raise GraphError(f"duplicate labels in {self.labels}")
        for u, v in self.edges:
            if u not in label_set or v not in label_set:
                raise GraphError(f"edge ({u}, {v}) leaves the label set {self.labels}")

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[int]], q: int = None, name: str = "") -> "SmallGraph":
        edges = _normalize_edges(edges)
        if q is None:
            q = max(max(e) for e in edges) if edges else 1
        return cls(labels=tuple(range(1, q + 1)), edges=edges, name=name)

    @property
    def q(self) -> int:
        return len(self.labels)

    def neighbors(self, u: int) -> List[int]:
        return sorted([b for a, b in self.edges if a == u] + [a for a, b in self.edges if b == u])

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.labels)
        graph.add_edges_from(self.edges)
        return graph

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def relabel(self, mapping: Dict[int, int]) -> "SmallGraph":
        labels = tuple(sorted(mapping[u] for u in self.labels))
        return SmallGraph(labels, _normalize_edges((mapping[u], mapping[v]) for u, v in self.edges), self.name)

    def canonical_form(self) -> Tuple[int, Tuple[Edge, ...]]:
        """Isomorphism-class key: lexicographically least edge list over all relabelings onto 1..q.

        Graphs beyond the motif cap are keyed by their labeled edge set instead.
        """
        return _canonical_form(self.labels, self.edges)

    def __str__(self) -> str:
        edges = ", ".join(f"{u}-{v}" for u, v in sorted(self.edges))
        return f"{self.name or 'graph'}[{edges}]"


@lru_cache(maxsize=4096)
def _canonical_form(labels: Tuple[int, ...], edges: FrozenSet[Edge]) -> Tuple[int, Tuple[Edge, ...]]:
    q = len(labels)
    if q > Config.MAX_MOTIF_VERTICES:
        index = {u: i + 1 for i, u in enumerate(labels)}
        return q, tuple(sorted((index[u], index[v]) for u, v in edges))
    best = None
    for perm in permutations(range(1, q + 1)):
        mapping = dict(zip(labels, perm))
        candidate = tuple(sorted(
            (min(mapping[u], mapping[v]), max(mapping[u], mapping[v])) for u, v in edges
        ))
        if best is None or candidate < best:
            best = candidate
    return q, best


@dataclass(frozen=True)
class GraphPair:
    """Two motif copies on overlapping label sets (shared labels 1..m)."""
    h1: SmallGraph
    h2: SmallGraph
    shared: Tuple[int, ...]
    union_edges: FrozenSet[Edge]

    def union_graph(self) -> SmallGraph:
        labels = tuple(sorted(set(self.h1.labels) | set(self.h2.labels)))
        return SmallGraph(labels, self.union_edges)


def check_motif(g: SmallGraph) -> None:
    if g.q > Config.MAX_MOTIF_VERTICES:
        raise GraphError(f"motif has {g.q} vertices; the cap is {Config.MAX_MOTIF_VERTICES}")
    if not g.is_connected():
        raise GraphError(f"motif {g} is disconnected")


@lru_cache(maxsize=256)
def automorphisms(g: SmallGraph) -> Tuple[Tuple[int, ...], ...]:
    """All label permutations (as images of g.labels in order) preserving the edge set."""
    check_motif(g)
    found = []
    for perm in permutations(g.labels):
        mapping = dict(zip(g.labels, perm))
        if _normalize_edges((mapping[u], mapping[v]) for u, v in g.edges) == g.edges:
            found.append(perm)
    return tuple(found)


def automorphism_count(g: SmallGraph) -> int:
    """|Aut(g)| by exhaustive permutation search."""
    return len(automorphisms(g))


def vertex_orbits(g: SmallGraph) -> List[Tuple[int, ...]]:
    """Orbits of the automorphism group on the vertices of g."""
    orbits, seen = [], set()
    for u in g.labels:
        if u in seen:
            continue
        position = g.labels.index(u)
        orbit = tuple(sorted({perm[position] for perm in automorphisms(g)}))
        seen.update(orbit)
        orbits.append(orbit)
    return orbits


def isomorphic_copies_on_labels(g: SmallGraph, labels: Sequence[int]) -> List[SmallGraph]:
    """All distinct graphs on `labels` isomorphic to g; there are q!/|Aut(g)| of them."""
    labels = tuple(sorted(labels))
    if len(labels) != g.q:
        raise GraphError(f"{g} has {g.q} vertices but {len(labels)} labels were given")
    if g.q > Config.MAX_MOTIF_VERTICES:
        raise GraphError(f"motif has {g.q} vertices; the cap is {Config.MAX_MOTIF_VERTICES}")
    copies = set()
    for perm in permutations(labels):
        mapping = dict(zip(g.labels, perm))
        copies.add(_normalize_edges((mapping[u], mapping[v]) for u, v in g.edges))
    return [SmallGraph(labels, edges, g.name) for edges in sorted(copies, key=sorted)]


def overlap_pairs(gi: SmallGraph, gj: SmallGraph, m: int) -> List[GraphPair]:
    """Pairs (H1, H2): H1 ~ gi on 1..q_i, H2 ~ gj on 1..m, q_i+1..q_i+q_j-m.

    m = 1 gives the single-shared-vertex family, m = q_i = q_j the fully
    overlapping one.
    """
    qi, qj = gi.q, gj.q
    if not 1 <= m <= min(qi, qj):
        raise GraphError(f"overlap m={m} outside [1, {min(qi, qj)}]")
    h1_labels = list(range(1, qi + 1))
    h2_labels = list(range(1, m + 1)) + list(range(qi + 1, qi + qj - m + 1))
    shared = tuple(range(1, m + 1))
    pairs = []
    for h1 in isomorphic_copies_on_labels(gi, h1_labels):
        for h2 in isomorphic_copies_on_labels(gj, h2_labels):
            pairs.append(GraphPair(h1, h2, shared, h1.edges | h2.edges))
    return pairs


def contains_after_relabeling(big: SmallGraph, small: SmallGraph) -> bool:
    """True if some relabeling of `small` has its edge set inside that of `big` (same vertex count)."""
    if big.q != small.q:
        return False
    matcher = isomorphism.GraphMatcher(big.to_networkx(), small.to_networkx())
    return matcher.subgraph_is_monomorphic()


def graph_diameter(g: SmallGraph) -> int:
    return nx.diameter(g.to_networkx()) if g.q > 1 else 0


# Motif presets; vertex 1 is the center where there is one
PRESETS: Dict[str, List[Edge]] = {
    "edge": [(1, 2)],
    "wedge": [(1, 2), (1, 3)],
    "triangle": [(1, 2), (1, 3), (2, 3)],
    "k4": [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)],
    "star3": [(1, 2), (1, 3), (1, 4)],
}


def preset(name: str) -> SmallGraph:
    if name not in PRESETS:
        raise GraphError(f"unknown preset '{name}'; known: {', '.join(PRESETS)}")
    return SmallGraph.from_edges(PRESETS[name], name=name)


def parse_edge_list(text: str, name: str = "") -> SmallGraph:
    """Parse 'u v' lines (1-based labels, '#' comments) into a connected motif."""
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: labels must be integers, got {line!r}")
        if u < 1 or v < 1:
            raise GraphError(f"line {lineno}: labels are 1-based")
        edges.append((u, v))
    if not edges:
        raise GraphError("edge list is empty")
    q = max(max(e) for e in edges)
    used = {x for e in edges for x in e}
    if used != set(range(1, q + 1)):
        raise GraphError(f"labels must cover 1..{q} without gaps")
    g = SmallGraph.from_edges(edges, q=q, name=name)
    check_motif(g)
    return g


def motif_from_spec(spec, index: int = 0) -> SmallGraph:
    """Build a motif from a preset name, {'edges': [...]} or {'file': path}."""
    if isinstance(spec, str):
        return preset(spec)
    if isinstance(spec, dict):
        name = spec.get("name", f"motif{index + 1}")
        if "edges" in spec:
            g = SmallGraph.from_edges(spec["edges"], name=name)
            check_motif(g)
            return g
        if "file" in spec:
            path = Path(spec["file"])
            if not path.exists():
                raise GraphError(f"edge-list file not found: {path}")
            return parse_edge_list(path.read_text(encoding="utf-8"), name=spec.get("name", path.stem))
    raise GraphError(f"cannot build a motif from {spec!r}")
