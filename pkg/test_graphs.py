# test_graphs.py
from itertools import combinations
from math import factorial

import networkx as nx
import pytest

from errors import GraphError
from graphs import (SmallGraph, automorphism_count, check_motif, contains_after_relabeling, graph_diameter,
                    isomorphic_copies_on_labels, motif_from_spec, overlap_pairs, parse_edge_list, preset,
                    vertex_orbits)


@pytest.mark.parametrize("name, expected", [("edge", 2), ("wedge", 2), ("triangle", 6), ("k4", 24), ("star3", 6)])
def test_automorphism_counts(name, expected):
    assert automorphism_count(preset(name)) == expected


def test_isomorphic_copies_count_is_q_factorial_over_aut():
    assert len(isomorphic_copies_on_labels(preset("wedge"), [1, 2, 3])) == 3
    assert len(isomorphic_copies_on_labels(preset("triangle"), [4, 5, 6])) == 1
    assert len(isomorphic_copies_on_labels(preset("star3"), [1, 2, 3, 4])) == 4


def test_copies_need_matching_label_count():
    with pytest.raises(GraphError):
        isomorphic_copies_on_labels(preset("triangle"), [1, 2])


@pytest.mark.parametrize("first, second, m, expected", [
    ("wedge", "wedge", 1, 9),
    ("wedge", "wedge", 3, 9),
    ("wedge", "triangle", 1, 3),
    ("wedge", "triangle", 3, 3),
    ("triangle", "triangle", 1, 1),
    ("triangle", "triangle", 3, 1),
    ("edge", "edge", 1, 1),
])
def test_overlap_family_sizes(first, second, m, expected):
    assert len(overlap_pairs(preset(first), preset(second), m)) == expected


def test_overlap_pairs_share_exactly_m_labels():
    for pair in overlap_pairs(preset("wedge"), preset("triangle"), 2):
        assert set(pair.h1.labels) & set(pair.h2.labels) == {1, 2}
        assert pair.union_graph().q == 4


def test_overlap_out_of_range():
    with pytest.raises(GraphError):
        overlap_pairs(preset("edge"), preset("triangle"), 3)
    with pytest.raises(GraphError):
        overlap_pairs(preset("edge"), preset("edge"), 0)


def test_disconnected_motif_rejected():
    g = SmallGraph.from_edges([(1, 2), (3, 4)])
    with pytest.raises(GraphError):
        check_motif(g)


def test_oversized_motif_rejected():
    path = SmallGraph.from_edges([(k, k + 1) for k in range(1, 9)])
    assert path.q == 9
    with pytest.raises(GraphError):
        check_motif(path)


def test_self_loop_rejected():
    with pytest.raises(GraphError):
        SmallGraph.from_edges([(1, 1)])


def test_parse_edge_list_with_comments():
    g = parse_edge_list("# a path\n1 2\n2 3  # middle\n\n", name="path")
    assert g.q == 3
    assert g.edges == frozenset({(1, 2), (2, 3)})
    assert automorphism_count(g) == 2


@pytest.mark.parametrize("text", ["1 3\n", "1\n", "a b\n", "0 1\n", ""])
def test_parse_edge_list_errors(text):
    with pytest.raises(GraphError):
        parse_edge_list(text)


def test_motif_from_spec_variants(tmp_path):
    assert motif_from_spec("triangle").name == "triangle"
    path_graph = motif_from_spec({"edges": [[1, 2], [2, 3]], "name": "path"})
    assert path_graph.name == "path" and path_graph.q == 3
    file = tmp_path / "square.txt"
    file.write_text("1 2\n2 3\n3 4\n4 1\n", encoding="utf-8")
    square = motif_from_spec({"file": str(file)})
    assert square.name == "square" and automorphism_count(square) == 8
    with pytest.raises(GraphError):
        motif_from_spec("pentagon")
    with pytest.raises(GraphError):
        motif_from_spec({"file": str(tmp_path / "missing.txt")})


def test_containment_up_to_relabeling():
    assert contains_after_relabeling(preset("triangle"), preset("wedge"))
    assert not contains_after_relabeling(preset("wedge"), preset("triangle"))
    assert not contains_after_relabeling(preset("triangle"), preset("edge"))


def test_canonical_form_ignores_labels():
    centered_at_two = SmallGraph.from_edges([(1, 2), (2, 3)])
    assert centered_at_two.canonical_form() == preset("wedge").canonical_form()
    assert centered_at_two != preset("wedge")


def test_vertex_orbits_and_diameter():
    assert vertex_orbits(preset("wedge")) == [(1,), (2, 3)]
    assert vertex_orbits(preset("triangle")) == [(1, 2, 3)]
    assert graph_diameter(preset("wedge")) == 2
    assert graph_diameter(preset("k4")) == 1


def _atlas_motifs(max_vertices):
    motifs = []
    for graph in nx.graph_atlas_g():
        q = graph.number_of_nodes()
        if 2 <= q <= max_vertices and nx.is_connected(graph):
            motifs.append(SmallGraph.from_edges([(u + 1, v + 1) for u, v in graph.edges()], q=q))
    return motifs


def _copies_by_brute_force(g, labels):
    """Every edge subset on `labels` that is isomorphic to g."""
    target = g.to_networkx()
    possible = list(combinations(sorted(labels), 2))
    found = set()
    for size in range(len(possible) + 1):
        if size != len(g.edges):
            continue
        for edges in combinations(possible, size):
            candidate = nx.Graph()
            candidate.add_nodes_from(labels)
            candidate.add_edges_from(edges)
            if nx.is_isomorphic(candidate, target):
                found.add(frozenset(edges))
    return found


def test_copies_times_automorphisms_is_q_factorial_over_the_atlas():
    motifs = _atlas_motifs(5)
    assert len(motifs) == 1 + 2 + 6 + 21
    for g in motifs:
        copies = isomorphic_copies_on_labels(g, list(g.labels))
        assert len(copies) * automorphism_count(g) == factorial(g.q), str(g)
        assert len({c.edges for c in copies}) == len(copies)


SMALL = [preset("edge"), preset("wedge"), preset("triangle"), preset("star3"), preset("k4"),
         SmallGraph.from_edges([(1, 2), (2, 3), (3, 4)], name="path4"),
         SmallGraph.from_edges([(1, 2), (2, 3), (3, 4), (1, 4)], name="cycle4")]


@pytest.mark.parametrize("gi", SMALL, ids=lambda g: g.name)
@pytest.mark.parametrize("gj", SMALL, ids=lambda g: g.name)
def test_overlap_pairs_match_brute_force(gi, gj):
    for m in range(1, min(gi.q, gj.q) + 1):
        h2_labels = list(range(1, m + 1)) + list(range(gi.q + 1, gi.q + gj.q - m + 1))
        first = _copies_by_brute_force(gi, list(range(1, gi.q + 1)))
        second = _copies_by_brute_force(gj, h2_labels)
        pairs = overlap_pairs(gi, gj, m)
        assert len(pairs) == len(first) * len(second)
        assert {(p.h1.edges, p.h2.edges) for p in pairs} == {(a, b) for a in first for b in second}


@pytest.mark.parametrize("gi", SMALL, ids=lambda g: g.name)
@pytest.mark.parametrize("gj", SMALL, ids=lambda g: g.name)
def test_every_union_graph_is_connected(gi, gj):
    for m in range(1, min(gi.q, gj.q) + 1):
        for pair in overlap_pairs(gi, gj, m):
            union = pair.union_graph()
            assert union.q == gi.q + gj.q - m
            assert union.is_connected(), str(union)
