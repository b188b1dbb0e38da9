import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from searchlab.cnf import InvalidConfig
from searchlab.concentration import (ADVERSARIES, ConcentrationConfig, _draw, concentration_experiment, gamma_tail)
from searchlab.util import make_rng


def test_gamma_tail_frozen_value():
    assert math.isclose(gamma_tail(1, 1.0), 0.01831563888873418, rel_tol=1e-12)
    # Q(n, 4n) does not depend on zeta
    assert gamma_tail(3, 0.5) == gamma_tail(3, 2.0)
    assert all(gamma_tail(n, 1.0) <= math.exp(-n) for n in range(1, 12))


@pytest.mark.parametrize("adversary", ADVERSARIES)
def test_each_adversary_respects_the_conditional_tail(adversary):
    """Single-step tail of every adversary, including the adaptive one after a step."""
    z = 1.5
    cfg = ConcentrationConfig(2, z, adversary, trials=10)
    rng = make_rng(0)
    s1 = _draw(ConcentrationConfig(1, z, adversary, trials=10), rng, 200_000)
    s2 = _draw(cfg, make_rng(1), 200_000)
    for x in (0.5, 1.0, 2.0):
        se = math.sqrt(math.exp(-z * x) / 200_000)
        assert (s1 >= x).mean() <= math.exp(-z * x) + 4 * se
    assert (s2 >= 0).all()


def test_zero_adversary_never_crosses():
    res = concentration_experiment(ConcentrationConfig(3, 1.0, "zero", trials=1000))
    assert res.hits == 0 and res.passed


def test_iid_matches_gamma_tail():
    res = concentration_experiment(ConcentrationConfig(2, 1.0, "iid-exponential", trials=400_000, seed=5))
    assert res.matches_exact and res.passed
    assert res.as_dict()["check"] == "concentration"


@given(st.integers(1, 4), st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from(ADVERSARIES), st.integers(0, 1000))
def test_reproducible_per_seed(n, zeta, adversary, seed):
    cfg = ConcentrationConfig(n, zeta, adversary, trials=2000, seed=seed)
    a = concentration_experiment(cfg)
    b = concentration_experiment(cfg)
    assert a.hits == b.hits and a.interval == b.interval
    lo, hi = a.interval
    assert lo <= a.estimate <= hi


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ConcentrationConfig(0, 1.0)
    with pytest.raises(InvalidConfig):
        ConcentrationConfig(2, -1.0)
    with pytest.raises(InvalidConfig):
        ConcentrationConfig(2, 1.0, "nope")
    assert ConcentrationConfig(3, 2.0).threshold == 6.0
    assert np.isfinite(gamma_tail(40, 1.0))
