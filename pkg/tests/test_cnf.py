import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from searchlab.cnf import (Cnf, DimacsError, InvalidConfig, SamplerConfig, chvatal_szemeredi_m, count_satisfying,
                           eval_clause, is_unsatisfiable, join_assignment, read_dimacs, sample_cnf, search_oracle,
                           split_assignment, write_dimacs)
from searchlab.partition import VarPartition, random_partition


def dpll(clauses, assignment=None):
    """Plain recursive DPLL with unit propagation; clauses are lists of signed ints."""
    assignment = dict(assignment or {})
    changed = True
    while changed:
        changed = False
        simplified = []
        for c in clauses:
            if any(assignment.get(abs(l)) == (l > 0) for l in c):
                continue
            rest = [l for l in c if abs(l) not in assignment]
            if not rest:
                return False
            if len(rest) == 1:
                assignment[abs(rest[0])] = rest[0] > 0
                changed = True
            simplified.append(rest)
        clauses = simplified
    if not clauses:
        return True
    v = abs(clauses[0][0])
    return dpll(clauses, {**assignment, v: True}) or dpll(clauses, {**assignment, v: False})


def test_forced_variable_set():
    cnf = sample_cnf(SamplerConfig(4, 4, 1, seed=3))
    assert sorted(abs(l) for l in cnf.clauses[0]) == [1, 2, 3, 4]


def test_sampler_determinism_and_width():
    a = sample_cnf(SamplerConfig(20, 5, 300, seed=11))
    b = sample_cnf(SamplerConfig(20, 5, 300, seed=11))
    assert a == b
    assert all(len({abs(l) for l in c}) == 5 for c in a.clauses)
    assert a != sample_cnf(SamplerConfig(20, 5, 300, seed=12))


def test_variable_frequency_law():
    cnf = sample_cnf(SamplerConfig(10, 3, 100_000, seed=1))
    counts = np.zeros(10)
    for c in cnf.clauses:
        for l in c:
            counts[abs(l) - 1] += 1
    freq = counts / cnf.m
    sigma = math.sqrt(0.3 * 0.7 / cnf.m)
    assert np.all(np.abs(freq - 0.3) <= 4 * sigma)


def test_sign_frequency_is_fair():
    cnf = sample_cnf(SamplerConfig(10, 3, 20_000, seed=2))
    pos = sum(l > 0 for c in cnf.clauses for l in c) / (3 * cnf.m)
    assert abs(pos - 0.5) < 4 * math.sqrt(0.25 / (3 * cnf.m))


def test_invalid_configs():
    with pytest.raises(InvalidConfig):
        sample_cnf(SamplerConfig(3, 4, 2))
    with pytest.raises(InvalidConfig):
        SamplerConfig(8, 3, 10, chvatal_szemeredi=True).resolved_m()
    assert SamplerConfig(8, 3, density_alpha="1/2").resolved_m() == 32
    assert chvatal_szemeredi_m(8, 3) == 45


def test_eval_clause_examples():
    cnf = Cnf(2, 2, ((1, 2), (1, -2)))
    assert eval_clause(cnf, 0, 0b00) == 0
    # a = 01 means x1=0, x2=1
    assert eval_clause(cnf, 1, 0b10) == 0
    assert eval_clause(cnf, 1, 0b00) == 1
    with pytest.raises(IndexError):
        eval_clause(cnf, 2, 0)


def test_all_positive_clause_on_ones():
    cnf = sample_cnf(SamplerConfig(12, 4, 50, seed=5))
    for i, c in enumerate(cnf.clauses):
        if all(l > 0 for l in c):
            assert eval_clause(cnf, i, (1 << 12) - 1) == 1


def test_search_oracle_single_clause():
    cnf = Cnf(2, 2, ((1, 2),))
    part = VarPartition((0,), (1,))
    assert search_oracle(cnf, part, 0, 0) == frozenset({0})
    assert search_oracle(cnf, part, 1, 0) == frozenset()


def test_search_oracle_matches_evaluation_exhaustively():
    cnf = sample_cnf(SamplerConfig(6, 3, 40, seed=9))
    part = random_partition(6, 4)
    for a in range(64):
        x, y = split_assignment(part, a)
        assert join_assignment(part, x, y) == a
        want = frozenset(i for i in range(cnf.m) if eval_clause(cnf, i, a) == 0)
        assert search_oracle(cnf, part, x, y) == want


def test_search_oracle_rejects_bad_partition():
    cnf = Cnf(3, 1, ((1,),))
    with pytest.raises(InvalidConfig):
        search_oracle(cnf, VarPartition((0,), (1,)), 0, 0)


def test_unsat_examples():
    assert is_unsatisfiable(Cnf(1, 1, ((1,), (-1,))))
    assert not is_unsatisfiable(Cnf(2, 2, ((1, 2),)))


def test_unsat_frequency_against_dpll():
    agree = unsat = 0
    for s in range(100):
        cnf = sample_cnf(SamplerConfig(8, 3, 45, seed=s))
        u = is_unsatisfiable(cnf)
        agree += u == (not dpll([list(c) for c in cnf.clauses]))
        unsat += u
    assert agree == 100
    assert unsat > 50


@given(st.integers(0, 2**32 - 1), st.integers(3, 9), st.integers(1, 3), st.integers(1, 30))
def test_count_satisfying_matches_naive(seed, n, delta, m):
    cnf = sample_cnf(SamplerConfig(n, delta, m, seed=seed))
    naive = sum(all(eval_clause(cnf, i, a) for i in range(cnf.m)) for a in range(1 << n))
    assert count_satisfying(cnf) == naive
    assert is_unsatisfiable(cnf) == (naive == 0) == (not dpll([list(c) for c in cnf.clauses]))


def test_dimacs_examples():
    cnf = read_dimacs(b"p cnf 2 1\n1 -2 0\n")
    assert cnf.n == 2 and cnf.clauses == ((1, -2),)
    with pytest.raises(DimacsError):
        read_dimacs(b"p cnf 2 1\n3 0\n")
    with pytest.raises(DimacsError):
        read_dimacs(b"p cnf 3 2\n1 2 0\n3 0\n", strict=True)
    with pytest.raises(DimacsError):
        read_dimacs(b"p cnf 3 2\n1 2 0\n")
    with pytest.raises(DimacsError):
        read_dimacs(b"1 2 0\n")
    assert read_dimacs(b"c hello\np cnf 3 2\n1 2\n 0 3 0\n").clauses == ((1, 2), (3,))


@given(st.integers(0, 2**32 - 1), st.integers(4, 20), st.integers(1, 4), st.integers(0, 40))
def test_dimacs_and_json_roundtrip_are_byte_stable(seed, n, delta, m):
    cnf = Cnf(n, delta, ()) if m == 0 else sample_cnf(SamplerConfig(n, delta, m, seed=seed))
    data = write_dimacs(cnf)
    back = read_dimacs(data)
    assert write_dimacs(back) == data
    assert back.clauses == cnf.clauses
    text = cnf.to_json()
    assert Cnf.from_json(text).to_json() == text


def test_cnf_validation():
    with pytest.raises(InvalidConfig):
        Cnf(2, 2, ((1, -1),))
    with pytest.raises(InvalidConfig):
        Cnf(2, 1, ((1, 2),))
    with pytest.raises(InvalidConfig):
        Cnf(2, 2, ((3,),))
