import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellattn.complex import build_incidence, canonical_cycle
from cellattn.lifting import (
    LiftConfig,
    MalformedGraphError,
    chordless_cycles,
    dataset_stats,
    format_stats_table,
    lift_graph,
    permute_graph,
    published_mismatches,
)
from cellattn.synthetic import complete, cycle_edges, random_graph, random_tree, sample_from_edges

from oracles import brute_force_chordless


@st.composite
def graphs(draw, max_n=9):
    n = draw(st.integers(3, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=min(len(pairs), 18)))
    return n, edges


def test_square_with_diagonal_gives_two_triangles():
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
    assert chordless_cycles(4, edges, 6) == [(0, 1, 2), (0, 2, 3)]


def test_k4_has_only_triangles():
    n, edges = complete(4)
    assert len(chordless_cycles(n, edges, 6)) == 4


def test_c6_respects_bound():
    assert chordless_cycles(6, cycle_edges(6), 6) == [(0, 1, 2, 3, 4, 5)]
    assert chordless_cycles(6, cycle_edges(6), 5) == []


def test_tree_has_no_cycles():
    edges = random_tree(np.random.default_rng(0), 15)
    assert chordless_cycles(15, edges, 6) == []


def test_petersen_five_cycles():
    g = nx.petersen_graph()
    cyc = chordless_cycles(10, list(g.edges), 5)
    assert len(cyc) == 12 and all(len(c) == 5 for c in cyc)


def test_self_loop_raises():
    with pytest.raises(MalformedGraphError):
        chordless_cycles(3, [(0, 0), (0, 1)], 6)


def test_bad_ring_size():
    with pytest.raises(ValueError):
        LiftConfig(2)


@settings(max_examples=150, deadline=None)
@given(graphs(), st.integers(3, 6))
def test_matches_brute_force(g, R):
    n, edges = g
    ours = {frozenset(c) for c in chordless_cycles(n, edges, R)}
    assert ours == brute_force_chordless(n, edges, R)


@settings(max_examples=100, deadline=None)
@given(graphs(), st.integers(3, 6))
def test_matches_networkx(g, R):
    n, edges = g
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    theirs = {canonical_cycle(c) for c in nx.chordless_cycles(G, length_bound=R) if len(c) >= 3}
    assert set(chordless_cycles(n, edges, R)) == theirs


@settings(max_examples=100, deadline=None)
@given(graphs(), st.integers(3, 6))
def test_output_canonical_and_sorted(g, R):
    n, edges = g
    cyc = chordless_cycles(n, edges, R)
    assert cyc == sorted(set(cyc))
    assert all(canonical_cycle(c) == c for c in cyc)


@settings(max_examples=100, deadline=None)
@given(graphs(), st.integers(3, 6), st.randoms(use_true_random=False))
def test_cycle_multiset_permutation_invariant(g, R, rnd):
    n, edges = g
    perm = list(range(n))
    rnd.shuffle(perm)
    a = sorted(len(c) for c in chordless_cycles(n, edges, R))
    b = sorted(len(c) for c in chordless_cycles(n, permute_graph(n, edges, perm), R))
    assert a == b


@settings(max_examples=100, deadline=None)
@given(graphs(max_n=12))
def test_lifted_boundary_of_boundary_is_zero(g):
    n, edges = g
    inc = build_incidence(lift_graph(n, edges))
    assert not np.any(inc.b1 @ inc.b2)


def test_lift_keeps_graph_as_one_skeleton():
    rng = np.random.default_rng(4)
    edges = random_graph(rng, 9, 16)
    cx = lift_graph(9, edges)
    assert cx.edge_list() == sorted((min(u, v), max(u, v)) for u, v in edges)
    assert cx.num_rings == len(chordless_cycles(9, edges, 6))


def test_dataset_stats_counts():
    samples = [sample_from_edges(6, cycle_edges(6)), sample_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])]
    st_ = dataset_stats(samples, LiftConfig(6), "toy")
    assert st_.num_graphs == 2
    assert st_.avg_nodes == 5.0 and st_.avg_edges == 5.5
    assert st_.avg_cells == {3: 1.0, 4: 0.0, 5: 0.0, 6: 0.5}
    text = format_stats_table([st_])
    assert "Avg. 6 Cells" in text and "0.50" in text


def test_mutag_statistics(mutag):
    st_ = dataset_stats(mutag.graphs, LiftConfig(6), "MUTAG")
    assert st_.num_graphs == 188
    assert f"{st_.avg_nodes:.2f}" == "17.93"
    assert f"{st_.avg_edges:.2f}" == "19.79"
    assert abs(st_.avg_cells[5] - 0.36) <= 0.01
    assert abs(st_.avg_cells[6] - 2.50) <= 0.05
    assert published_mismatches(st_) == []


def test_mutag_rings_match_networkx(mutag):
    for g in mutag.graphs[:40]:
        G = nx.Graph()
        G.add_nodes_from(range(g.num_nodes))
        G.add_edges_from(g.edges)
        theirs = {canonical_cycle(c) for c in nx.chordless_cycles(G, length_bound=6) if len(c) >= 3}
        assert set(chordless_cycles(g.num_nodes, g.edges, 6)) == theirs
