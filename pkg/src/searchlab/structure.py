"""Min-entropy structure of subsets of {0,1}^n: spreadness, fixed coordinates, restoring partitions.

A set X is a boolean vector of length 2^n (``X[x]`` says whether point x
belongs).  Probabilities are those of the uniform distribution on X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cnf import CapacityError
from .util import bits, log2q, max_int_below, to_fraction, to_mask

TABLE_CAP = 18
DRP_TOL = 1e-9


def points(X: np.ndarray) -> np.ndarray:
    return np.flatnonzero(X).astype(np.int64)


def compress(pts: np.ndarray, coords: tuple[int, ...]) -> np.ndarray:
    """Re-index points onto ``coords``: bit t of the result is coordinate coords[t]."""
    out = np.zeros(pts.shape, dtype=np.int64)
    for t, c in enumerate(coords):
        out |= ((pts >> c) & 1) << t
    return out


@dataclass
class ProjectionTable:
    """For every I within ``coords`` (a local mask), the largest fibre of the projection x -> x_I."""

    coords: tuple[int, ...]
    total: int
    maxcount: np.ndarray
    argmax: np.ndarray
    _local: np.ndarray = field(repr=False)

    def counts(self, I_local: int) -> np.ndarray:
        """Fibre sizes indexed by the pattern a (a local mask within I, other bits zero)."""
        return np.bincount(self._local & I_local, minlength=1 << len(self.coords))

    def global_set(self, I_local: int) -> tuple[int, ...]:
        return tuple(self.coords[t] for t in bits(I_local))


def projection_table(X: np.ndarray, n: int, coords=None, *, cap: int = TABLE_CAP) -> ProjectionTable:
    coords = tuple(range(n)) if coords is None else tuple(sorted(coords))
    k = len(coords)
    if k > cap:
        raise CapacityError(f"{k} coordinates exceed the projection-table cap {cap}")
    pts = points(X)
    if pts.size == 0:
        raise ValueError("empty set")
    local = compress(pts, coords)
    size = 1 << k
    maxcount = np.empty(size, dtype=np.int64)
    argmax = np.empty(size, dtype=np.int64)
    rows = max(1, (1 << 22) // max(pts.size, 1))
    for start in range(0, size, rows):
        Is = np.arange(start, min(start + rows, size), dtype=np.int64)
        keys = (np.arange(Is.size, dtype=np.int64)[:, None] << k) | (local[None, :] & Is[:, None])
        table = np.bincount(keys.ravel(), minlength=Is.size << k).reshape(Is.size, size)
        maxcount[Is] = table.max(axis=1)
        argmax[Is] = table.argmax(axis=1)
    return ProjectionTable(coords, int(pts.size), maxcount, argmax, local)


def min_entropy(X: np.ndarray) -> float:
    s = int(np.count_nonzero(X))
    if s == 0:
        raise ValueError("empty set")
    return math.log2(s)


def _lex_smallest(masks: np.ndarray) -> int:
    return int(min((int(v) for v in masks), key=lambda v: tuple(bits(v))))


@dataclass(frozen=True)
class SpreadWitness:
    I: tuple[int, ...]
    a: int
    count: int
    total: int


def spread_witness(X: np.ndarray, gamma, n: int, coords=None,
                   table: ProjectionTable | None = None) -> SpreadWitness | None:
    """A violation of gamma-spreadness on ``coords``, or None.

    I violates when some pattern a has Pr[x_I = a] > 2^(-gamma*|I|).  The
    witness has the largest violating |I|, then the lexicographically
    smallest I, then the smallest violating a.
    """
    gamma = to_fraction(gamma)
    tab = projection_table(X, n, coords) if table is None else table
    k = len(tab.coords)
    size = 1 << k
    sizes = np.bitwise_count(np.arange(size, dtype=np.int64)).astype(np.int64)
    thr = np.array([max_int_below(tab.total, gamma, s) for s in range(k + 1)], dtype=np.int64)
    bad = np.flatnonzero(tab.maxcount > thr[sizes])
    if bad.size == 0:
        return None
    top = sizes[bad].max()
    I_local = _lex_smallest(bad[sizes[bad] == top])
    cnt = tab.counts(I_local)
    a_local = int(np.flatnonzero(cnt > thr[top])[0])
    I = tab.global_set(I_local)
    a = sum(((a_local >> t) & 1) << pos for pos, t in enumerate(bits(I_local)))
    return SpreadWitness(I, a, int(cnt[a_local]), tab.total)


def is_spread(X: np.ndarray, gamma, n: int, coords=None) -> bool:
    return spread_witness(X, gamma, n, coords) is None


def pattern_mask(X_size_n: int, I: tuple[int, ...], a: int) -> np.ndarray:
    """Points x of {0,1}^n with x_I = a (bit t of a is coordinate I[t])."""
    xs = np.arange(1 << X_size_n, dtype=np.int64)
    ok = np.ones(xs.shape, bool)
    for t, c in enumerate(I):
        ok &= ((xs >> c) & 1) == ((a >> t) & 1)
    return ok


def constant_coords(X: np.ndarray, n: int) -> tuple[int, int]:
    """(mask of coordinates constant on X, their common values)."""
    pts = points(X)
    if pts.size == 0:
        raise ValueError("empty set")
    all_and = int(np.bitwise_and.reduce(pts))
    all_or = int(np.bitwise_or.reduce(pts))
    const = ~(all_and ^ all_or) & ((1 << n) - 1)
    return const, all_and & const


@dataclass
class StructureCert:
    I: tuple[int, ...]
    a_I: int
    gamma: Fraction
    verified: bool
    witness: object = None

    def as_dict(self) -> dict:
        w = self.witness
        if isinstance(w, SpreadWitness):
            w = {"I": list(w.I), "a": w.a, "count": w.count, "total": w.total}
        return {"I": list(self.I), "a_I": self.a_I, "gamma": f"{self.gamma.numerator}/{self.gamma.denominator}",
                "verified": self.verified, "witness": w}


def structured_check(X: np.ndarray, I, gamma, n: int) -> StructureCert:
    """Is X constant on I with a gamma-spread complement?

    A failure carries either a pair of points differing on I or a spread
    witness on the complement.
    """
    gamma = to_fraction(gamma)
    I = tuple(sorted(I))
    imask = to_mask(I)
    pts = points(X)
    if pts.size == 0:
        raise ValueError("empty set")
    first = int(pts[0])
    diff = np.flatnonzero(((pts ^ first) & imask) != 0)
    a = sum(((first >> c) & 1) << t for t, c in enumerate(I))
    if diff.size:
        return StructureCert(I, a, gamma, False, (first, int(pts[diff[0]])))
    rest = tuple(c for c in range(n) if not (imask >> c) & 1)
    w = spread_witness(X, gamma, n, rest) if rest else None
    return StructureCert(I, a, gamma, w is None, w)


def deficiency(X: np.ndarray, fix, n: int) -> float:
    """n - |fix| - H_inf(x restricted to the free coordinates)."""
    fix = tuple(sorted(fix))
    fmask = to_mask(fix)
    pts = points(X)
    if pts.size == 0:
        raise ValueError("empty set")
    if np.any(((pts ^ pts[0]) & fmask) != 0):
        raise ValueError("fix coordinates are not constant on X")
    free = [c for c in range(n) if not (fmask >> c) & 1]
    proj = compress(pts, tuple(free))
    biggest = int(np.bincount(proj).max())
    return n - len(fix) - (math.log2(pts.size) - math.log2(biggest))


@dataclass
class DrpPart:
    X: np.ndarray
    I: tuple[int, ...]
    a: int
    p_ge: Fraction

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.X))


@dataclass
class DrpResult:
    parts: list[DrpPart]
    gamma: Fraction
    fixed: tuple[int, ...]
    slack: float = math.inf


class DrpAssertion(AssertionError):
    pass


def density_restoring_partition(X: np.ndarray, gamma, n: int, fixed=(), *, check: bool = True) -> DrpResult:
    """Peel off {x : x_I = a} for the witness (I, a) until the remainder is gamma-spread.

    Spreadness is measured on the coordinates outside ``fixed`` (assumed
    constant on X).  With ``check`` every part is re-certified as
    (fixed + I, gamma)-structured and the entropy-loss inequality
    log|X^j| >= log|X| - gamma*|I^j| - log(1/p^{>=j}) is asserted.
    """
    gamma = to_fraction(gamma)
    fixed = tuple(sorted(fixed))
    free = tuple(c for c in range(n) if c not in set(fixed))
    total = int(np.count_nonzero(X))
    if total == 0:
        raise ValueError("empty set")
    rest = X.copy()
    parts: list[DrpPart] = []
    slack = math.inf
    while rest.any():
        r_size = int(np.count_nonzero(rest))
        p_ge = Fraction(r_size, total)
        w = spread_witness(rest, gamma, n, free) if free else None
        if w is None:
            part = DrpPart(rest, (), 0, p_ge)
            rest = np.zeros_like(rest)
        else:
            sel = rest & pattern_mask(n, w.I, w.a)
            part = DrpPart(sel, w.I, w.a, p_ge)
            rest = rest & ~sel
        parts.append(part)
        if check:
            cert = structured_check(part.X, fixed + part.I, gamma, n)
            if not cert.verified:
                raise DrpAssertion(f"part {len(parts) - 1} is not structured: {cert.witness}")
            lhs = _conditional_free_entropy(part.X, fixed + part.I, n)
            rhs = math.log2(total) - float(gamma) * len(part.I) - log2q(1 / p_ge)
            slack = min(slack, lhs - rhs)
            if lhs < rhs - DRP_TOL:
                raise DrpAssertion(f"entropy inequality fails on part {len(parts) - 1}: {lhs} < {rhs}")
    return DrpResult(parts, gamma, fixed, slack)


def _conditional_free_entropy(Xj: np.ndarray, fixed_all, n: int) -> float:
    fmask = to_mask(fixed_all)
    free = tuple(c for c in range(n) if not (fmask >> c) & 1)
    pts = points(Xj)
    if not free:
        return 0.0
    biggest = int(np.bincount(compress(pts, free)).max())
    return math.log2(pts.size) - math.log2(biggest)


@dataclass
class NodeAudit:
    fix_x: tuple[int, ...]
    fix_y: tuple[int, ...]
    codim: int
    ok: bool
    witness: object = None


def audit_side(S: np.ndarray, gamma, n: int) -> tuple[tuple[int, ...], StructureCert]:
    const, _ = constant_coords(S, n)
    fix = tuple(bits(const))
    return fix, structured_check(S, fix, gamma, n)


def subcube_like_audit(rects: dict, gamma, n: int) -> dict[int, NodeAudit]:
    """Per node: maximal fixed sets on both sides, codimension, and spreadness of the rest."""
    out = {}
    for v, r in rects.items():
        fx, cx = audit_side(r.X, gamma, n)
        fy, cy = audit_side(r.Y, gamma, n)
        ok = cx.verified and cy.verified
        wit = None if ok else {"X": cx.as_dict(), "Y": cy.as_dict()}
        out[v] = NodeAudit(fx, fy, len(fx) + len(fy), ok, wit)
    return out


def audit_codim(audit: dict[int, NodeAudit]) -> int:
    return max((a.codim for a in audit.values()), default=0)

