import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from searchlab.cnf import CapacityError
from searchlab.protocol import Node, ProtocolTree, rectangles
from searchlab.structure import (DrpAssertion, audit_codim, deficiency, density_restoring_partition, min_entropy,
                                 projection_table, spread_witness, structured_check, subcube_like_audit)
from searchlab.util import make_rng


def to_set(points, n):
    X = np.zeros(1 << n, bool)
    X[list(points)] = True
    return X


def pt(s):
    """String like '01' with character j giving coordinate j."""
    return sum(int(c) << j for j, c in enumerate(s))


def naive_violations(X, gamma, n, coords=None):
    """All (I, a) with Pr[x_I = a] > 2^(-gamma |I|), by explicit double loop."""
    pts = [int(v) for v in np.flatnonzero(X)]
    coords = list(range(n)) if coords is None else sorted(coords)
    out = []
    for s in range(1, len(coords) + 1):
        for I in combinations(coords, s):
            for a in range(1 << s):
                cnt = sum(all(((x >> c) & 1) == ((a >> t) & 1) for t, c in enumerate(I)) for x in pts)
                # cnt/|X| > 2^(-p s / q)  <=>  cnt^q * 2^(p s) > |X|^q, all integers
                if cnt ** gamma.denominator << (gamma.numerator * s) > len(pts) ** gamma.denominator:
                    out.append((I, a))
    return out


def random_set(seed, n, p=0.5):
    rng = make_rng(seed)
    X = rng.random(1 << n) < p
    if not X.any():
        X[int(rng.integers(0, 1 << n))] = True
    return X


def test_projection_table_examples():
    n = 4
    tab = projection_table(np.ones(1 << n, bool), n)
    sizes = [bin(i).count("1") for i in range(1 << n)]
    assert all(tab.maxcount[i] == 2 ** (n - sizes[i]) for i in range(1 << n))
    tab = projection_table(to_set([5], n), n)
    assert (tab.maxcount == 1).all()
    tab = projection_table(to_set([pt("00"), pt("01"), pt("10")], 2), 2)
    assert tab.maxcount.tolist() == [3, 2, 2, 1]
    assert tab.argmax[0b01] == 0
    with pytest.raises(CapacityError):
        projection_table(np.ones(1 << 19, bool), 19)


def test_spread_examples():
    X3 = to_set([pt("00"), pt("01"), pt("10")], 2)
    assert spread_witness(X3, Fraction(1, 2), 2) is None
    assert math.isclose(min_entropy(np.ones(16, bool)), 4)
    half = to_set([x for x in range(8) if not x & 1], 3)
    w = spread_witness(half, Fraction(1, 2), 3)
    assert w.I == (0,) and w.a == 0 and w.count == 4


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]),
       st.floats(0.05, 0.95))
def test_spread_witness_matches_naive_loop(seed, n, gamma, p):
    X = random_set(seed, n, p)
    viol = naive_violations(X, gamma, n)
    w = spread_witness(X, gamma, n)
    if not viol:
        assert w is None
        return
    top = max(len(I) for I, _ in viol)
    best_I = min(I for I, _ in viol if len(I) == top)
    best_a = min(a for I, a in viol if I == best_I)
    assert (w.I, w.a) == (best_I, best_a)


def test_structured_check_examples():
    half = to_set([x for x in range(8) if not x & 1], 3)
    cert = structured_check(half, (0,), Fraction(1, 2), 3)
    assert cert.verified and cert.a_I == 0
    assert structured_check(np.ones(8, bool), (), 1, 3).verified
    X = to_set([pt("000"), pt("001"), pt("011")], 3)
    assert structured_check(X, (0,), Fraction(1, 2), 3).verified
    bad = structured_check(X, (1,), Fraction(1, 2), 3)
    assert not bad.verified and isinstance(bad.witness, tuple)


def test_deficiency_examples():
    assert deficiency(np.ones(16, bool), (), 4) == 0
    half = to_set([x for x in range(8) if not x & 1], 3)
    assert deficiency(half, (0,), 3) == 0
    X3 = to_set([pt("00"), pt("01"), pt("10")], 2)
    assert math.isclose(deficiency(X3, (), 2), 0.41503749927884376, rel_tol=1e-12)
    with pytest.raises(ValueError):
        deficiency(X3, (0,), 2)


def test_drp_examples():
    res = density_restoring_partition(np.ones(16, bool), Fraction(1, 2), 4)
    assert len(res.parts) == 1 and res.parts[0].I == ()
    half = to_set([x for x in range(8) if not x & 1], 3)
    res = density_restoring_partition(half, Fraction(1, 2), 3)
    assert len(res.parts) == 1 and res.parts[0].I == (0,)


@given(st.integers(0, 2**32 - 1), st.integers(2, 7), st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]),
       st.floats(0.02, 0.98))
def test_drp_invariants(seed, n, gamma, p):
    X = random_set(seed, n, p)
    res = density_restoring_partition(X, gamma, n)
    union = np.zeros_like(X)
    total = int(X.sum())
    for part in res.parts:
        assert not (union & part.X).any()
        union |= part.X
        assert structured_check(part.X, part.I, gamma, n).verified
        assert naive_violations(part.X, gamma, n, [c for c in range(n) if c not in part.I]) == []
    assert (union == X).all()
    again = density_restoring_partition(X, gamma, n)
    assert [(q.I, q.a, q.p_ge) for q in again.parts] == [(q.I, q.a, q.p_ge) for q in res.parts]
    assert res.parts[0].p_ge == 1 and all(q.p_ge <= 1 for q in res.parts)
    assert res.slack >= -1e-9 and total > 0


def test_drp_assertion_type_is_assertion_error():
    assert issubclass(DrpAssertion, AssertionError)


def test_audit_examples():
    xs = np.arange(4)
    pi = ProtocolTree(2, [Node("A", (xs & 1).astype(bool), (1, 2)), Node(label=0), Node(label=0)])
    audit = subcube_like_audit(rectangles(pi), Fraction(1, 2), 2)
    assert audit[0].codim == 0
    assert audit[1].fix_x == (0,) and audit[1].codim == 1
    assert audit_codim(audit) == 1 and all(a.ok for a in audit.values())
