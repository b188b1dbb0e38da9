"""Acceptance criteria 1-11 at their stated sizes and tolerances.

Each criterion prints one PASS/FAIL line in the terminal summary.  Suites
are run once per session and shared between criteria that read the same
corpus.
"""

import math
from fractions import Fraction

import pytest

from searchlab import experiments as ex

RESULTS: dict[int, tuple[bool, str]] = {}


def record(k: int, ok: bool, detail: str) -> None:
    RESULTS[k] = (bool(ok), detail)


@pytest.fixture(scope="module")
def conversion():
    return ex.conversion_suite(count=100, n=8, max_depth=5, gamma=Fraction(1, 2), seed=2)


@pytest.fixture(scope="module")
def identity():
    return ex.identity_suite(count=100, seed=8)


def test_criterion_01_drp():
    res = ex.drp_suite(trials=200, n=10, seed=1)
    s = res.summary
    ok = res.passed and s["worst_entropy_slack"] >= -1e-9 and res.seconds < 120
    record(1, ok, f"{s['sets']} sets x 3 gammas, {s['parts']} parts, failures={s['failures']}, "
                  f"worst slack={s['worst_entropy_slack']:.3g}, {res.seconds:.1f}s")
    assert ok, s


def test_criterion_02_fidelity(conversion):
    s = conversion.summary
    ok = s["fidelity"] and conversion.seconds < 300
    record(2, ok, f"{s['count']} protocols n={s['n']}, all inputs agree={s['fidelity']}, {conversion.seconds:.1f}s")
    assert ok, s


def test_criterion_03_codim_tail(conversion):
    rows = conversion.records
    worst = max(float(Fraction(r["codim_tail"])) - math.exp(-r["depth"]) for r in rows)
    ok = conversion.summary["codim_tail"] and all(float(Fraction(r["codim_tail"])) <= math.exp(-r["depth"])
                                                  for r in rows)
    record(3, ok, f"max(tail - exp(-d)) = {worst:.4g} over {len(rows)} protocols, max codim "
                  f"{conversion.summary['max_codim']}")
    assert ok


def test_criterion_04_per_step(conversion):
    s = conversion.summary
    w = s["worst_slack"]
    ok = s["steps"] and w["deficiency"] >= -1e-9 and w["codim"] >= -1e-9 and w["tail"] >= 0
    record(4, ok, f"worst slacks: deficiency {w['deficiency']:.3g}, tail {w['tail']:.3g}, codim {w['codim']:.3g}")
    assert ok, s["failing"]


def test_criterion_05_closure():
    res = ex.closure_suite(count=50, n=30, alpha=Fraction(3, 4), beta=Fraction(3, 8), seed=3)
    s = res.summary
    ok = res.passed and res.seconds < 300
    record(5, ok, f"verified {s['verified']}/{s['count']}, mutations detected {s['detected']}/{s['mutations']}, "
                  f"{res.seconds:.1f}s")
    assert ok, s


def test_criterion_06_expansion_rate():
    res = ex.expansion_suite(trials=500, n=24, delta=4, m=48, r=3, target=0.9, seed=4)
    s = res.summary
    record(6, res.passed, f"certified frequency {s['frequency']:.3f} (Wilson {s['interval'][0]:.3f}.."
                          f"{s['interval'][1]:.3f}) vs target {s['target']}")
    assert res.passed, s


def test_criterion_07_partition():
    res = ex.partition_suite(pairs=200, n=24, delta_w=4, m=48, delta=Fraction(1, 10), target=0.8, seed=5)
    s = res.summary
    record(7, res.passed, f"pass rate {s['pass_rate']:.3f} vs {s['target']} at r={s['r']}; "
                          f"error mean bound {s['error_bound']:.3g}")
    assert res.passed, {k: v for k, v in s.items() if k != "witnesses"}


def test_criterion_08_concentration():
    res = ex.concentration_suite(trials=1_000_000, seed=6)
    s = res.summary
    ok = res.passed and res.seconds < 180
    record(8, ok, f"{s['configs']} configs x 1e6 trials, failures={s['failures']}, {res.seconds:.1f}s")
    assert ok, s


def test_criterion_09_leaf_bounds():
    res = ex.leaf_bound_suite(count=40, delta=8, seed=7)
    s = res.summary
    record(9, res.passed, f"accepted {s['accepted']}/{s['count']}, violations={s['violations']}")
    assert res.passed, s


def test_criterion_10_identity(identity, conversion):
    s = identity.summary
    ok = identity.passed and conversion.summary["mass"]
    record(10, ok, f"identity exact on {s['checked']}/{s['count']} instances, violations={s['violations']}; "
                   f"mass conserved on conversion corpus={conversion.summary['mass']}")
    assert ok, s


def test_criterion_11_tooling():
    res = ex.tooling_suite(count=20, seed=9)
    s = res.summary
    record(11, res.passed, f"{s['count']} round trips, {s['runs']} repeated CLI runs, failures={len(s['failures'])}")
    assert res.passed, s
