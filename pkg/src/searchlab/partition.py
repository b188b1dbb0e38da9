"""Variable partitions, error clauses, delta-good certification, bipartite instances."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction

import numpy as np

from .bigraph import BipartiteGraph, ExpanderParams, ExpansionReport, check_expansion, incidence_graphs
from .cnf import Cnf, InvalidConfig, join_assignment
from .util import bits, fmt_frac, make_rng, popcount, to_fraction, to_mask, wilson_interval

EXACT_COND_CAP = 22


@dataclass(frozen=True)
class VarPartition:
    A: tuple[int, ...]
    B: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(sorted(self.A)))
        object.__setattr__(self, "B", tuple(sorted(self.B)))
        if set(self.A) & set(self.B):
            raise InvalidConfig("A and B overlap")

    @property
    def n(self) -> int:
        return len(self.A) + len(self.B)

    def covers(self, n: int) -> bool:
        return sorted(self.A + self.B) == list(range(n))


def random_partition(n: int, seed: int) -> VarPartition:
    if n < 1:
        raise InvalidConfig("n must be positive")
    side = make_rng(seed, 0xAB).integers(0, 2, size=n)
    return VarPartition(tuple(int(j) for j in np.flatnonzero(side == 0)),
                        tuple(int(j) for j in np.flatnonzero(side == 1)))


def balanced_partition(n: int, seed: int) -> VarPartition:
    """Uniformly random split into halves of sizes floor(n/2) and ceil(n/2)."""
    if n < 1:
        raise InvalidConfig("n must be positive")
    perm = make_rng(seed, 0xBA).permutation(n)
    return VarPartition(tuple(int(j) for j in perm[: n // 2]), tuple(int(j) for j in perm[n // 2:]))


def binary_entropy(p) -> float:
    p = to_fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if p in (0, 1):
        return 0.0
    q = float(p)
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def _check_delta(delta) -> Fraction:
    delta = to_fraction(delta)
    if not 0 <= delta <= 1:
        raise InvalidConfig("delta must lie in [0, 1]")
    if delta > Fraction(1, 10):
        warnings.warn("delta above 1/10 is outside the regime where good partitions are expected",
                      stacklevel=3)
    return delta


def error_sets(cnf: Cnf, part: VarPartition, delta) -> tuple[frozenset[int], frozenset[int]]:
    """Clauses with more than (1-delta)*Delta variables on side A (resp. B)."""
    delta = _check_delta(delta)
    ma, mb = to_mask(part.A), to_mask(part.B)
    lim = (1 - delta) * cnf.delta
    ea = frozenset(i for i in range(cnf.m) if popcount(cnf.var_mask(i) & ma) > lim)
    eb = frozenset(i for i in range(cnf.m) if popcount(cnf.var_mask(i) & mb) > lim)
    return ea, eb


@dataclass
class SideProbability:
    value: Fraction | float
    exact: bool
    interval: tuple[float, float] | None = None

    def as_dict(self) -> dict:
        if self.exact:
            return {"value": fmt_frac(self.value), "exact": True}
        return {"value": float(self.value), "exact": False, "interval": list(self.interval)}


def side_satisfied_probability(cnf: Cnf, clauses, side: tuple[int, ...], *, cap: int = EXACT_COND_CAP,
                               mc_trials: int = 20000, seed: int = 0) -> SideProbability:
    """Pr over a uniform assignment of ``side`` that each clause has a true literal on that side.

    Only the side variables occurring in the clauses matter, so the exact
    count enumerates that sub-cube.
    """
    smask = to_mask(side)
    lits = [(cnf.masks(i)[0] & smask, cnf.masks(i)[1] & smask) for i in sorted(clauses)]
    if not lits:
        return SideProbability(Fraction(1), True)
    used = 0
    for p, q in lits:
        used |= p | q
    vs = bits(used)
    k = len(vs)
    # re-index onto the k used variables
    loc = {v: j for j, v in enumerate(vs)}
    comp = [(to_mask(loc[v] for v in bits(p)), to_mask(loc[v] for v in bits(q))) for p, q in lits]
    if k <= cap:
        a = np.arange(1 << k, dtype=np.int64)
        ok = np.ones(a.shape, dtype=bool)
        for p, q in comp:
            ok &= ((a & p) != 0) | ((a & q) != q)
        return SideProbability(Fraction(int(ok.sum()), 1 << k), True)
    rng = make_rng(seed, 0xC1)
    hits = 0
    for _ in range(mc_trials):
        a = int.from_bytes(rng.bytes((k + 7) // 8), "little") & ((1 << k) - 1)
        hits += all((a & p) or (a & q) != q for p, q in comp)
    return SideProbability(hits / mc_trials, False, wilson_interval(hits, mc_trials))


@dataclass
class GoodPartitionReport:
    delta: Fraction
    error_A: frozenset[int]
    error_B: frozenset[int]
    cond1_prob: SideProbability
    cond2_prob: SideProbability
    cond3: tuple[ExpansionReport, ExpansionReport]
    r_used: int
    min_prob: Fraction
    advisory_target: float

    @property
    def cond1(self) -> bool:
        return self.cond1_prob.value >= self.min_prob

    @property
    def cond2(self) -> bool:
        return self.cond2_prob.value >= self.min_prob

    @property
    def cond3_ok(self) -> bool:
        return self.cond3[0].is_expander and self.cond3[1].is_expander

    @property
    def passed(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3_ok

    def as_dict(self) -> dict:
        return {
            "delta": fmt_frac(self.delta),
            "error_A": sorted(self.error_A),
            "error_B": sorted(self.error_B),
            "cond1_prob": self.cond1_prob.as_dict(),
            "cond2_prob": self.cond2_prob.as_dict(),
            "cond3": [c.as_dict() for c in self.cond3],
            "r_used": self.r_used,
            "min_prob": fmt_frac(self.min_prob),
            "advisory_target": self.advisory_target,
            "pass": self.passed,
        }


def check_good_partition(cnf: Cnf, part: VarPartition, delta, r: int, mc_trials: int = 20000,
                         seed: int = 0, *, min_prob=Fraction(1, 2),
                         exact_cap: int = EXACT_COND_CAP) -> GoodPartitionReport:
    """Measure the three good-partition conditions.

    Conditions 1-2 pass when the satisfied probability is at least
    ``min_prob``; the explicit ``1 - m*2^(-(1-delta)*Delta)`` target is
    reported for comparison only.  Condition 3 certifies both reduced graphs
    as (r, Delta, delta*Delta/2)-expanders.
    """
    delta = _check_delta(delta)
    ea, eb = error_sets(cnf, part, delta)
    p1 = side_satisfied_probability(cnf, ea, part.A, cap=exact_cap, mc_trials=mc_trials, seed=seed)
    p2 = side_satisfied_probability(cnf, eb, part.B, cap=exact_cap, mc_trials=mc_trials, seed=seed + 1)
    ga, gb = incidence_graphs(cnf, part)
    drop = to_mask(ea | eb)
    rs = []
    for g in (ga, gb):
        red = g.reduced(drop_left=drop)
        if red.m == 0 or delta == 0:
            rs.append(ExpansionReport(True, None, 0))
        else:
            rs.append(check_expansion(red, ExpanderParams(r, cnf.delta, delta / 2)))
    target = 1 - cnf.m * 2.0 ** (-float((1 - delta) * cnf.delta))
    return GoodPartitionReport(delta, ea, eb, p1, p2, (rs[0], rs[1]), r, to_fraction(min_prob), target)


@dataclass(frozen=True)
class BipartiteInstance:
    """Two-sided clause system over Alice's and Bob's local coordinates.

    Right vertex j of ``g1`` is the j-th variable of A (sorted) and likewise
    for ``g2`` and B; both sides are padded with unused dummy coordinates to
    a common size ``n``.  Clause k is falsified by (x, y) iff every X-literal
    and every Y-literal is false.
    """

    g1: BipartiteGraph
    g2: BipartiteGraph
    x_pos: tuple[int, ...]
    x_neg: tuple[int, ...]
    y_pos: tuple[int, ...]
    y_neg: tuple[int, ...]
    clause_map: tuple[int, ...]
    delta: int

    @property
    def n(self) -> int:
        return self.g1.n

    @property
    def m(self) -> int:
        return len(self.clause_map)

    def x_falsified(self, k: int, x: int) -> bool:
        return (x & self.x_pos[k]) == 0 and (x & self.x_neg[k]) == self.x_neg[k]

    def y_falsified(self, k: int, y: int) -> bool:
        return (y & self.y_pos[k]) == 0 and (y & self.y_neg[k]) == self.y_neg[k]

    def falsified(self, k: int, x: int, y: int) -> bool:
        return self.x_falsified(k, x) and self.y_falsified(k, y)

    def falsified_table(self, k: int, side: str) -> np.ndarray:
        """Boolean vector over all 2^n side inputs: is the clause's side part false there."""
        return (self.fx if side == "A" else self.fy)[k]

    def _side_matrix(self, pos_masks, neg_masks) -> np.ndarray:
        a = np.arange(1 << self.n, dtype=np.int64)
        out = np.empty((self.m, a.size), dtype=bool)
        for k, (p, q) in enumerate(zip(pos_masks, neg_masks)):
            out[k] = ((a & p) == 0) & ((a & q) == q)
        return out

    @cached_property
    def fx(self) -> np.ndarray:
        """fx[k, x]: x falsifies every X-literal of clause k."""
        return self._side_matrix(self.x_pos, self.x_neg)

    @cached_property
    def fy(self) -> np.ndarray:
        return self._side_matrix(self.y_pos, self.y_neg)

    def satisfying_pairs(self) -> int:
        """Number of (x, y) avoiding every clause."""
        if self.m == 0:
            return 1 << (2 * self.n)
        hit = (self.fx.T.astype(np.int32) @ self.fy.astype(np.int32)) > 0
        return int((~hit).sum())

    def is_unsatisfiable(self) -> bool:
        return self.satisfying_pairs() == 0

    @classmethod
    def from_graphs(cls, g1: BipartiteGraph, g2: BipartiteGraph, signs_seed: int | None = None,
                    delta: int | None = None) -> "BipartiteInstance":
        """Instance whose clause k uses x-variables N_{g1}(k) and y-variables N_{g2}(k).

        Signs are all negative (clause false iff all its variables are 1)
        unless ``signs_seed`` is given, in which case they are fair bits.
        """
        if g1.m != g2.m:
            raise InvalidConfig("graphs need the same left side")
        n = max(g1.n, g2.n)
        g1 = BipartiteGraph(g1.m, n, g1.adj, g1.delta)
        g2 = BipartiteGraph(g2.m, n, g2.adj, g2.delta)
        rng = None if signs_seed is None else make_rng(signs_seed, 0x51)
        xp, xn, yp, yn = [], [], [], []
        for k in range(g1.m):
            for adj, P, N in ((g1.adj[k], xp, xn), (g2.adj[k], yp, yn)):
                if rng is None:
                    pos = 0
                else:
                    pos = sum(1 << v for v in bits(adj) if rng.integers(0, 2))
                P.append(pos)
                N.append(adj & ~pos)
        d = delta if delta is not None else max(g1.delta, g2.delta)
        return cls(g1, g2, tuple(xp), tuple(xn), tuple(yp), tuple(yn), tuple(range(g1.m)), d)


def bipartite_instance(cnf: Cnf, part: VarPartition, delta) -> BipartiteInstance:
    """Drop error clauses and split each survivor into its A-part and B-part."""
    if not part.covers(cnf.n):
        raise InvalidConfig("partition does not cover the variables exactly")
    ea, eb = error_sets(cnf, part, delta)
    keep = [i for i in range(cnf.m) if i not in ea and i not in eb]
    if not keep:
        raise InvalidConfig("every clause is an error clause; the instance is empty")
    n = max(len(part.A), len(part.B))
    la = {v: j for j, v in enumerate(part.A)}
    lb = {v: j for j, v in enumerate(part.B)}

    def local(mask: int, loc: dict) -> int:
        return sum(1 << loc[v] for v in bits(mask) if v in loc)

    xp, xn, yp, yn, a1, a2 = [], [], [], [], [], []
    for i in keep:
        pos, neg = cnf.masks(i)
        xp.append(local(pos, la))
        xn.append(local(neg, la))
        yp.append(local(pos, lb))
        yn.append(local(neg, lb))
        a1.append(xp[-1] | xn[-1])
        a2.append(yp[-1] | yn[-1])
    m = len(keep)
    return BipartiteInstance(BipartiteGraph(m, n, tuple(a1), cnf.delta),
                             BipartiteGraph(m, n, tuple(a2), cnf.delta),
                             tuple(xp), tuple(xn), tuple(yp), tuple(yn), tuple(keep), cnf.delta)


def instance_assignment(part: VarPartition, x: int, y: int) -> int:
    """Global assignment for local inputs (dummy coordinates are ignored)."""
    return join_assignment(part, x, y)
