from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from searchlab.bigraph import BipartiteGraph, ExpanderParams, check_expansion, random_graph
from searchlab.closure import (HypothesisError, LabelTree, build_closure, chain_split, closure_hypothesis,
                               greedy_expander, largest_bad_set, mutate_family, random_label_tree, verify_closure)
from searchlab.cnf import InvalidConfig
from searchlab.util import make_rng, popcount, to_mask

GADGET = BipartiteGraph(4, 8, (0b11, 0b1100, 0b110000, 0b11000000), 2)


def brute_bad_set(g, excluded, removed, r, beta):
    allowed = [i for i in range(g.m) if not (excluded >> i) & 1]
    for s in range(min(r, len(allowed)), 0, -1):
        hits = []
        for B in combinations(allowed, s):
            nb = 0
            for i in B:
                nb |= g.adj[i] & ~removed
            if popcount(nb) <= beta * g.delta * s:
                hits.append(B)
        if hits:
            return to_mask(min(hits))
    return 0


def test_chain_split_example():
    t = LabelTree([None, 0], [0, (1 << 3) | (1 << 7)])
    split, where = chain_split(t)
    assert split.S == [0, 1 << 3, (1 << 3) | (1 << 7)]
    assert where == [0, 2]
    single = LabelTree([None, 0, 1], [0, 1, 3])
    assert chain_split(single)[0].S == single.S


@given(st.integers(0, 2**32 - 1), st.integers(1, 15), st.integers(0, 5))
def test_chain_split_node_count(seed, nodes, d):
    t = random_label_tree(10, nodes, d, make_rng(seed), grow=0.7)
    split, where = chain_split(t)
    extra = sum(max(popcount(t.S[v] & ~t.S[t.parent[v]]) - 1, 0) for v in range(1, len(t)))
    assert len(split) == len(t) + extra
    assert [split.S[where[v]] for v in range(len(t))] == t.S
    for v in range(1, len(split)):
        assert popcount(split.S[v] & ~split.S[split.parent[v]]) <= 1


def test_label_tree_rejects_non_monotone():
    with pytest.raises(InvalidConfig):
        LabelTree([None, 0], [0b1, 0b1])
    with pytest.raises(InvalidConfig):
        LabelTree([None, 0, 1], [0, 0b11, 0b01])


def test_bad_set_examples():
    g = BipartiteGraph(3, 6, (0b000111, 0b000111, 0b111000), 3)
    assert largest_bad_set(g, 0, 0, 2, Fraction(1, 2)) == 0b011
    assert largest_bad_set(GADGET, 0, 0, 8, Fraction(1, 2)) == 0


@given(st.integers(0, 2**32 - 1), st.integers(4, 10), st.integers(1, 8), st.integers(1, 3),
       st.sampled_from([Fraction(1, 4), Fraction(3, 8), Fraction(1, 2), Fraction(2, 3)]), st.integers(0, 1023),
       st.integers(0, 255))
def test_bad_set_matches_exhaustive_search(seed, n, m, r, beta, removed, excluded):
    g = random_graph(n, 3 if n >= 3 else n, m, make_rng(seed))
    removed &= (1 << n) - 1
    excluded &= (1 << m) - 1
    assert largest_bad_set(g, excluded, removed, r, beta) == brute_bad_set(g, excluded, removed, r, beta)


def test_gadget_clause_enters_closure():
    t = LabelTree([None, 0, 1], [0, 1 << 2, 1 << 2])
    fam = build_closure(GADGET, t, 1, Fraction(1, 2), 8)
    assert fam.T == [0, 0b10, 0b10]
    assert verify_closure(GADGET, t, fam).passed


def test_empty_labels_give_empty_closures():
    rng = make_rng(0)
    g = greedy_expander(8, 30, 12, 1, Fraction(3, 4), rng)
    t = LabelTree([None, 0, 0, 1], [0, 0, 0, 0])
    fam = build_closure(g, t, Fraction(3, 4), Fraction(3, 8), 1)
    assert fam.T == [0, 0, 0, 0]
    assert verify_closure(g, t, fam).passed
    assert verify_closure(g, LabelTree([None], [0]), build_closure(g, LabelTree([None], [0]), "3/4", "3/8", 1)).passed


def test_hypothesis_refusal_and_non_strict_mode():
    t = LabelTree([None, 0], [0, 0b11])
    assert not closure_hypothesis(2, 1, Fraction(1, 2), 8, 2)
    with pytest.raises(HypothesisError):
        build_closure(GADGET, t, 1, Fraction(1, 2), 8)
    fam = build_closure(GADGET, t, 1, Fraction(1, 2), 8, strict=False)
    assert not fam.hypothesis_ok and fam.notes
    with pytest.raises(InvalidConfig):
        build_closure(GADGET, t, Fraction(1, 2), Fraction(1, 2), 8)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 12, 6), (2, 8, 4), (1, 16, 5)]))
def test_random_certified_closures_verify(seed, shape):
    r, delta, m = shape
    alpha, beta = Fraction(3, 4), Fraction(3, 8)
    g = greedy_expander(m, 24, delta, r, alpha, make_rng(seed), attempts=600)
    if g is None:
        return
    assert check_expansion(g, ExpanderParams(r, delta, alpha)).is_expander
    d = int((alpha - beta) ** 2 * r * delta / 4)
    t = random_label_tree(24, 8, d, make_rng(seed, 1))
    fam = build_closure(g, t, alpha, beta, r)
    assert verify_closure(g, t, fam).passed
    fast = build_closure(g, t, alpha, beta, r, fast=True)
    assert fast.T == fam.T


def test_mutations_are_detected():
    t = LabelTree([None, 0, 1], [0, 1 << 2, 1 << 2])
    fam = build_closure(GADGET, t, 1, Fraction(1, 2), 8)
    rng = np.random.default_rng(0)
    dropped = mutate_family(fam, t, "drop", rng, 4)
    rep = verify_closure(GADGET, t, dropped)
    assert not rep.passed and rep.witnesses
    inflated = mutate_family(fam, t, "inflate-root", rng, 4)
    assert not verify_closure(GADGET, t, inflated).item_b
