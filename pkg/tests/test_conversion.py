import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from searchlab.cnf import CapacityError
from searchlab.conversion import (check_codim_bound, check_deficiency_fact, check_fidelity, check_mass_conservation,
                                  check_tail_bound, codim_tail, convert, h_tail, shave, walk)
from searchlab.protocol import (FAMILIES, Node, ProtocolTree, RandomProtocolConfig, execute, leaf_protocol,
                                random_protocol, rectangles)
from searchlab.structure import structured_check, subcube_like_audit


def alice_sends_first(n):
    xs = np.arange(1 << n)
    return ProtocolTree(n, [Node("A", (xs & 1).astype(bool), (1, 2)), Node(label=0), Node(label=1)])


def test_depth_zero_conversion():
    tree = convert(leaf_protocol(3, 0), Fraction(1, 2))
    assert len(tree.nodes) == 1 and tree.nodes[0].trace is None
    assert codim_tail(tree, Fraction(1, 2), 1) == 0


def test_depth_one_hand_trace():
    tree = convert(alice_sends_first(3), Fraction(1, 2))
    kids = [tree.nodes[c] for c in tree.nodes[0].children.values()]
    assert len(kids) == 2
    for k in kids:
        t = k.trace
        assert k.I == (0,) and t.n_k == 1
        assert t.q == Fraction(1, 2) and t.p_ge == 1 and t.h == 1
        assert k.deficiency == 0
        assert t.d_before - (1 - 0.5) * t.n_k + t.h >= t.d_after
    assert check_codim_bound(tree).passed
    assert shave(tree, Fraction(1, 2), 1).cut == frozenset()
    assert codim_tail(tree, Fraction(1, 2), 1) == 0
    zero = shave(tree, Fraction(1, 2), 0)
    assert zero.cut == frozenset(tree.nodes[0].children.values())


def test_shave_threshold_zero_keeps_unfixing_root():
    xs = np.arange(8)
    pi = ProtocolTree(3, [Node("A", (xs & 3) == 3, (1, 2)),
                          Node(label=0), Node(label=0)])
    tree = convert(pi, Fraction(1, 2))
    sh = shave(tree, Fraction(1, 2), 0)
    any_fixed = any(tree.nodes[c].codim > 0 for c in tree.nodes[0].children.values())
    assert bool(sh.cut) == any_fixed


def protocol_strategy():
    return st.tuples(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(0, 4), st.sampled_from(FAMILIES),
                     st.sampled_from(["alternate", "random"]))


@given(protocol_strategy(), st.sampled_from([Fraction(1, 4), Fraction(1, 2)]))
def test_conversion_invariants(case, gamma):
    seed, n, depth, family, speakers = case
    pi = random_protocol(RandomProtocolConfig(n, depth, family, speakers, seed=seed), 5)
    tree = convert(pi, gamma)
    assert check_fidelity(tree).agree
    assert check_mass_conservation(tree)
    assert check_deficiency_fact(tree).passed
    assert check_codim_bound(tree).passed
    assert check_tail_bound(tree).passed
    for x in range(0, 1 << n, 3):
        for y in range(0, 1 << n, 5):
            assert tree.label(walk(tree, x, y)) == execute(pi, x, y)[1]
    for c in tree.nodes:
        assert structured_check(c.X, c.I, gamma, n).verified
        assert structured_check(c.Y, c.J, gamma, n).verified
    for d in (0, 1):
        tail = codim_tail(tree, gamma, d)
        sh = shave(tree, gamma, d)
        assert sh.codim() <= sh.threshold
        assert tail == sum((tree.nodes[u].mass for u in sh.cut), Fraction(0))
    assert h_tail(tree, 1) <= 1


def test_shaved_tree_passes_audit():
    pi = random_protocol(RandomProtocolConfig(5, 4, "xor", seed=3), 4)
    tree = convert(pi, Fraction(1, 2))
    sh = shave(tree, Fraction(1, 2), 0, threshold=2)
    from searchlab.protocol import Rectangle

    rects = {u: Rectangle(tree.nodes[u].X, tree.nodes[u].Y) for u in sh.nodes()}
    audit = subcube_like_audit(rects, Fraction(1, 2), 5)
    assert all(a.ok for a in audit.values())
    assert all(tree.nodes[u].codim <= 2 for u in sh.nodes() if u not in sh.cut)
    assert rectangles(pi)


def test_tail_at_depth_five_n_eight():
    pi = random_protocol(RandomProtocolConfig(8, 5, "xor", seed=11), 4)
    tree = convert(pi, Fraction(1, 2))
    assert codim_tail(tree, Fraction(1, 2), 5) <= math.exp(-5)


def test_caps():
    with pytest.raises(CapacityError):
        convert(leaf_protocol(11, 0), Fraction(1, 2))
    with pytest.raises(ValueError):
        shave(convert(leaf_protocol(2, 0), 1), 1, 1)
