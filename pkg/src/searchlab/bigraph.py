"""Clause-variable bipartite graphs, exact expansion certification, boundaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cnf import CapacityError, Cnf, InvalidConfig, sample_clause_sets
from .util import bits, combo_chunks, make_rng, popcount, to_fraction, to_mask, wilson_interval

EXPANSION_BUDGET = 10**8


@dataclass(frozen=True)
class BipartiteGraph:
    """Left vertices 0..m-1 with neighbourhood bitmasks over right vertices 0..n-1.

    ``labels`` maps local left indices to indices in a parent graph when the
    graph was obtained by deleting vertices; ``None`` means the identity.
    """

    m: int
    n: int
    adj: tuple[int, ...]
    delta: int
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        if len(self.adj) != self.m:
            raise InvalidConfig("adjacency length differs from m")
        full = (1 << self.n) - 1
        for i, a in enumerate(self.adj):
            if a & ~full:
                raise InvalidConfig(f"left vertex {i} has a neighbour >= n")
            if popcount(a) > self.delta:
                raise InvalidConfig(f"left vertex {i} has degree above delta={self.delta}")

    def label(self, i: int) -> int:
        return i if self.labels is None else self.labels[i]

    def degree(self, i: int) -> int:
        return popcount(self.adj[i])

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "n": self.n, "adj": [bits(a) for a in self.adj]})

    @classmethod
    def from_json(cls, text: str, delta: int | None = None) -> "BipartiteGraph":
        obj = json.loads(text)
        adj = tuple(to_mask(row) for row in obj["adj"])
        d = delta if delta is not None else max((popcount(a) for a in adj), default=0)
        return cls(obj["m"], obj["n"], adj, d)

    def reduced(self, drop_left: int = 0, drop_right: int = 0) -> "BipartiteGraph":
        """Delete the left vertices in ``drop_left`` and right vertices in ``drop_right``.

        Right indices are kept (deleted ones simply lose all edges); left
        vertices are renumbered and remember their parent index in ``labels``.
        """
        keep = [i for i in range(self.m) if not (drop_left >> i) & 1]
        return BipartiteGraph(
            len(keep),
            self.n,
            tuple(self.adj[i] & ~drop_right for i in keep),
            self.delta,
            tuple(self.label(i) for i in keep),
        )


@dataclass(frozen=True)
class ExpanderParams:
    r: int
    delta: int
    alpha: Fraction
    eta: Fraction = Fraction(1, 4)

    def __post_init__(self):
        a = to_fraction(self.alpha)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "eta", to_fraction(self.eta))
        if not 0 < a <= 1:
            raise InvalidConfig("alpha must lie in (0, 1]")
        if self.r < 1:
            raise InvalidConfig("r must be positive")


@dataclass(frozen=True)
class ExpansionReport:
    is_expander: bool
    witness: tuple[tuple[int, ...], int] | None
    checked_sets: int
    certified: bool = True

    def as_dict(self) -> dict:
        w = None if self.witness is None else {"set": list(self.witness[0]), "neighbours": self.witness[1]}
        return {"is_expander": self.is_expander, "witness": w, "checked_sets": self.checked_sets,
                "certified": self.certified}


def incidence_graph(cnf: Cnf) -> BipartiteGraph:
    return BipartiteGraph(cnf.m, cnf.n, tuple(cnf.var_mask(i) for i in range(cnf.m)), cnf.delta)


def incidence_graphs(cnf: Cnf, part) -> tuple[BipartiteGraph, BipartiteGraph]:
    """(G_A, G_B): the incidence graph restricted to A-variables and to B-variables.

    Right vertices keep their global variable index.
    """
    if sorted(list(part.A) + list(part.B)) != list(range(cnf.n)):
        raise InvalidConfig("partition does not cover the variables exactly")
    ma, mb = to_mask(part.A), to_mask(part.B)
    g = incidence_graph(cnf)
    return (BipartiteGraph(g.m, g.n, tuple(a & ma for a in g.adj), g.delta),
            BipartiteGraph(g.m, g.n, tuple(a & mb for a in g.adj), g.delta))


def neighborhood(g: BipartiteGraph, S) -> int:
    idx = bits(S) if isinstance(S, int) else S
    out = 0
    for i in idx:
        out |= g.adj[i]
    return out


def enumeration_size(m: int, r: int) -> int:
    return sum(math.comb(m, s) for s in range(1, min(r, m) + 1))


def _violates(count, size: int, alpha: Fraction, delta: int):
    # |N(S)| < alpha * delta * |S|
    return count * alpha.denominator < alpha.numerator * delta * size


def check_expansion(
    g: BipartiteGraph,
    p: ExpanderParams,
    *,
    cap: int = EXPANSION_BUDGET,
    certify_only: bool = True,
    sampled: int | None = None,
    seed: int = 0,
) -> ExpansionReport:
    """Decide whether every left set S with 1 <= |S| <= r has |N(S)| >= alpha*Delta*|S|.

    Sets are visited by increasing size, lexicographically within a size; the
    first violating set is the witness.  ``sampled`` switches to a
    non-certifying mode testing that many random sets per size.
    """
    r = min(p.r, g.m)
    if sampled is not None:
        return _check_sampled(g, p, r, sampled, seed)
    total = enumeration_size(g.m, r)
    if total > cap:
        raise CapacityError(f"{total} subsets exceed the enumeration budget {cap}; use sampled mode")
    checked = 0
    witness = None
    if g.n <= 64:
        arr = np.array(g.adj, dtype=np.uint64)
        for s in range(1, r + 1):
            for combos in combo_chunks(g.m, s):
                nb = np.bitwise_or.reduce(arr[combos], axis=1)
                cnt = np.bitwise_count(nb).astype(np.int64)
                bad = np.flatnonzero(_violates(cnt, s, p.alpha, p.delta))
                if bad.size and witness is None:
                    k = int(bad[0])
                    witness = (tuple(int(v) for v in combos[k]), int(cnt[k]))
                    if certify_only:
                        return ExpansionReport(False, witness, checked + k + 1)
                checked += len(combos)
    else:
        from itertools import combinations

        for s in range(1, r + 1):
            for S in combinations(range(g.m), s):
                checked += 1
                c = popcount(neighborhood(g, S))
                if witness is None and _violates(c, s, p.alpha, p.delta):
                    witness = (S, c)
                    if certify_only:
                        return ExpansionReport(False, witness, checked)
    return ExpansionReport(witness is None, witness, checked)


def _check_sampled(g, p, r, samples, seed) -> ExpansionReport:
    rng = make_rng(seed, 0x5A)
    checked = 0
    for s in range(1, r + 1):
        for _ in range(samples):
            S = tuple(sorted(int(v) for v in rng.choice(g.m, size=s, replace=False)))
            checked += 1
            c = popcount(neighborhood(g, S))
            if _violates(c, s, p.alpha, p.delta):
                return ExpansionReport(False, (S, c), checked, certified=False)
    return ExpansionReport(True, None, checked, certified=False)


def boundary(g: BipartiteGraph, U) -> int:
    """Right vertices adjacent to exactly one member of U."""
    idx = bits(U) if isinstance(U, int) else U
    once = multi = 0
    for i in idx:
        a = g.adj[i]
        multi |= once & a
        once = (once | a) & ~multi
    return once


def unique_neighbor_partition(g: BipartiteGraph, U, eta) -> list[tuple[int, int]] | None:
    """Greedy peeling: repeatedly take the smallest i whose boundary share is >= (1-2*eta)*Delta.

    Returns ``[(i, N_i), ...]`` in peeling order, or ``None`` when the
    residual set has no such vertex.
    """
    eta = to_fraction(eta)
    need = (1 - 2 * eta) * g.delta
    rest = sorted(bits(U) if isinstance(U, int) else set(U))
    out = []
    while rest:
        bd = boundary(g, rest)
        for i in rest:
            share = bd & g.adj[i]
            if popcount(share) >= need:
                out.append((i, share))
                rest.remove(i)
                break
        else:
            return None
    return out


def random_graph(n: int, delta: int, m: int, rng: np.random.Generator) -> BipartiteGraph:
    """Each left vertex picks delta distinct right neighbours uniformly."""
    vars_, _ = sample_clause_sets(n, delta, m, rng)
    return BipartiteGraph(m, n, tuple(to_mask(row) for row in vars_), delta)


@dataclass(frozen=True)
class RateEstimate:
    successes: int
    trials: int
    frequency: float
    interval: tuple[float, float]

    def as_dict(self) -> dict:
        return {"successes": self.successes, "trials": self.trials, "frequency": self.frequency,
                "interval": list(self.interval)}


def expansion_rate_experiment(n: int, delta: int, m: int, p: ExpanderParams, trials: int,
                              seed: int) -> RateEstimate:
    """Fraction of random graphs certified as (r, Delta, (1-eta)*Delta)-expanders."""
    target = ExpanderParams(p.r, delta, 1 - p.eta, p.eta)
    ok = 0
    for t in range(trials):
        g = random_graph(n, delta, m, make_rng(seed, t))
        ok += check_expansion(g, target).is_expander
    return RateEstimate(ok, trials, ok / trials, wilson_interval(ok, trials))
