from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from searchlab.bigraph import (BipartiteGraph, ExpanderParams, boundary, check_expansion, enumeration_size,
                               incidence_graphs, neighborhood, random_graph, unique_neighbor_partition)
from searchlab.cnf import CapacityError, Cnf, InvalidConfig, SamplerConfig, sample_cnf
from searchlab.partition import random_partition
from searchlab.util import make_rng, popcount, to_mask


def brute_expander(g, r, alpha, delta):
    for s in range(1, min(r, g.m) + 1):
        for S in combinations(range(g.m), s):
            nb = 0
            for i in S:
                nb |= g.adj[i]
            if popcount(nb) < alpha * delta * s:
                return False, S
    return True, None


def graph_from_rows(rows, n, delta):
    return BipartiteGraph(len(rows), n, tuple(to_mask(r) for r in rows), delta)


def test_complete_rows_expand_for_any_alpha():
    g = graph_from_rows([range(6)] * 4, 6, 6)
    assert check_expansion(g, ExpanderParams(1, 6, 1)).is_expander


def test_duplicate_rows_fail_at_size_two():
    g = graph_from_rows([[0, 1, 2], [0, 1, 2], [3, 4, 5]], 6, 3)
    rep = check_expansion(g, ExpanderParams(2, 3, "2/3"))
    assert not rep.is_expander
    assert rep.witness == ((0, 1), 3)


def test_unique_neighbor_example_and_too_small_boundary():
    g = graph_from_rows([[0, 1, 2, 3], [3, 4, 5, 6]], 7, 4)
    assert boundary(g, [0, 1]) == to_mask([0, 1, 2, 4, 5, 6])
    peel = unique_neighbor_partition(g, [0, 1], "1/4")
    # the boundary is recomputed on the residual set, so vertex 3 returns to N_1
    assert peel == [(0, to_mask([0, 1, 2])), (1, to_mask([3, 4, 5, 6]))]
    disjoint = graph_from_rows([[0, 1], [2, 3]], 4, 2)
    assert unique_neighbor_partition(disjoint, [0, 1], 0) == [(0, 0b0011), (1, 0b1100)]
    g2 = graph_from_rows([[0, 1, 2, 3], [0, 1, 2, 4]], 5, 4)
    assert unique_neighbor_partition(g2, [0, 1], "1/4") is None


@given(st.integers(0, 2**32 - 1), st.integers(4, 10), st.integers(2, 4), st.integers(1, 9), st.integers(1, 3),
       st.sampled_from(["1/4", "1/2", "2/3", "3/4", "1"]))
def test_expansion_matches_itertools(seed, n, delta, m, r, alpha):
    delta = min(delta, n)
    g = random_graph(n, delta, m, make_rng(seed))
    p = ExpanderParams(r, delta, alpha)
    rep = check_expansion(g, p)
    ok, wit = brute_expander(g, r, p.alpha, delta)
    assert rep.is_expander == ok
    if not ok:
        assert rep.witness[0] == wit
        assert rep.witness[1] == popcount(neighborhood(g, wit))


@given(st.integers(0, 2**32 - 1), st.integers(6, 12), st.integers(1, 8))
def test_boundary_property_for_expanders(seed, n, m):
    """In an (r, Delta, (1-eta)Delta)-expander every |U| <= r has |dU| >= (1-2eta)Delta|U|."""
    delta, r = 4, 3
    g = random_graph(n, delta, m, make_rng(seed))
    if not check_expansion(g, ExpanderParams(r, delta, "3/4")).is_expander:
        return
    for s in range(1, min(r, m) + 1):
        for U in combinations(range(m), s):
            assert popcount(boundary(g, U)) >= delta * s / 2
            assert popcount(boundary(g, U)) >= 2 * popcount(neighborhood(g, U)) - delta * s
            peel = unique_neighbor_partition(g, U, "1/4")
            assert peel is not None
            seen = 0
            for i, Ni in peel:
                assert Ni & ~g.adj[i] == 0 and Ni & seen == 0
                assert popcount(Ni) >= delta / 2
                seen |= Ni


def test_incidence_graphs_split_variables():
    cnf = sample_cnf(SamplerConfig(10, 4, 20, seed=1))
    part = random_partition(10, 3)
    ga, gb = incidence_graphs(cnf, part)
    for i in range(cnf.m):
        assert ga.adj[i] | gb.adj[i] == cnf.var_mask(i)
        assert ga.adj[i] & gb.adj[i] == 0


def test_reduced_relabels_left_vertices():
    g = graph_from_rows([[0], [1], [2]], 3, 1).reduced(drop_left=0b010, drop_right=0b100)
    assert g.m == 2 and g.labels == (0, 2)
    assert g.adj == (0b001, 0)


def test_capacity_and_validation():
    g = random_graph(40, 3, 60, make_rng(0))
    with pytest.raises(CapacityError):
        check_expansion(g, ExpanderParams(8, 3, "1/2"), cap=10**5)
    rep = check_expansion(g, ExpanderParams(8, 3, "1/2"), sampled=50, seed=1)
    assert not rep.certified
    with pytest.raises(InvalidConfig):
        ExpanderParams(1, 3, 0)
    with pytest.raises(InvalidConfig):
        graph_from_rows([[0, 1]], 2, 1)
    assert enumeration_size(5, 2) == 15


def test_json_roundtrip():
    g = random_graph(9, 3, 7, make_rng(3))
    assert BipartiteGraph.from_json(g.to_json()) == g
    assert Cnf(2, 1, ((1,),)).m == 1
