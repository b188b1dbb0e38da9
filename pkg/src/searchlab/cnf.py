"""CNF formulas: sampling from F(m, n, Delta), evaluation, the search oracle, DIMACS/JSON."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .util import make_rng, to_fraction


class InvalidConfig(ValueError):
    pass


class CapacityError(RuntimeError):
    pass


class DimacsError(ValueError):
    pass


BRUTE_FORCE_CAP = 24


@dataclass(frozen=True)
class Cnf:
    """Clause list over variables 1..n, DIMACS literal convention.

    Each clause is a tuple of non-zero ints sorted by variable; repeated
    clauses are kept as distinct indices.  ``delta`` is the clause width
    (the maximum width for formulas read leniently from DIMACS).
    """

    n: int
    delta: int
    clauses: tuple[tuple[int, ...], ...]
    seed: int | None = None
    _pos: np.ndarray = field(init=False, repr=False, compare=False)
    _neg: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("n must be positive")
        pos, neg = [], []
        for i, c in enumerate(self.clauses):
            vs = [abs(l) for l in c]
            if len(set(vs)) != len(vs):
                raise InvalidConfig(f"clause {i} repeats a variable")
            if any(l == 0 or abs(l) > self.n for l in c):
                raise InvalidConfig(f"clause {i} has a literal out of range")
            if len(c) > self.delta:
                raise InvalidConfig(f"clause {i} wider than delta={self.delta}")
            pos.append(sum(1 << (l - 1) for l in c if l > 0))
            neg.append(sum(1 << (-l - 1) for l in c if l < 0))
        dt = np.int64 if self.n <= 62 else object
        object.__setattr__(self, "_pos", np.array(pos, dtype=dt))
        object.__setattr__(self, "_neg", np.array(neg, dtype=dt))

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def is_uniform(self) -> bool:
        return all(len(c) == self.delta for c in self.clauses)

    def var_mask(self, i: int) -> int:
        return int(self._pos[i] | self._neg[i])

    def masks(self, i: int) -> tuple[int, int]:
        """(positive-literal mask, negative-literal mask), bit j = variable j+1."""
        return int(self._pos[i]), int(self._neg[i])

    def to_json(self) -> str:
        obj = {"n": self.n, "delta": self.delta, "clauses": [list(c) for c in self.clauses]}
        if self.seed is not None:
            obj["seed"] = str(self.seed)
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "Cnf":
        obj = json.loads(text)
        seed = obj.get("seed")
        clauses = tuple(_canonical(c) for c in obj["clauses"])
        return cls(obj["n"], obj["delta"], clauses, None if seed is None else int(seed))


def _canonical(lits) -> tuple[int, ...]:
    return tuple(sorted((int(l) for l in lits), key=abs))


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    delta: int
    m: int | None = None
    density_alpha: Fraction | None = None
    seed: int = 0
    chvatal_szemeredi: bool = False

    def resolved_m(self) -> int:
        if self.m is not None:
            m = self.m
        elif self.density_alpha is not None:
            m = math.ceil(to_fraction(self.density_alpha) * (2 ** self.delta) * self.n)
        else:
            raise InvalidConfig("either m or density_alpha is required")
        if m < 1:
            raise InvalidConfig("m must be at least 1")
        if self.chvatal_szemeredi and m < chvatal_szemeredi_m(self.n, self.delta):
            raise InvalidConfig("m below the ln2 * 2^delta * n unsatisfiability density")
        return m


def chvatal_szemeredi_m(n: int, delta: int) -> int:
    return math.ceil(math.log(2) * (2 ** delta) * n)


def sample_clause_sets(n: int, delta: int, m: int, rng: np.random.Generator):
    """Variable sets (0-based, sorted) and sign bits for m uniform width-delta clauses.

    Variables come from a Fisher-Yates prefix over [n]; signs are fair bits
    drawn per position before sorting.
    """
    if delta > n:
        raise InvalidConfig(f"delta={delta} exceeds n={n}")
    perm = np.tile(np.arange(n, dtype=np.int64), (m, 1))
    rows = np.arange(m)
    for t in range(delta):
        j = rng.integers(t, n, size=m)
        a = perm[rows, t].copy()
        perm[rows, t] = perm[rows, j]
        perm[rows, j] = a
    vars_ = perm[:, :delta]
    signs = rng.integers(0, 2, size=(m, delta))
    order = np.argsort(vars_, axis=1, kind="stable")
    return np.take_along_axis(vars_, order, 1), np.take_along_axis(signs, order, 1)


def sample_cnf(cfg: SamplerConfig) -> Cnf:
    m = cfg.resolved_m()
    if cfg.delta < 1:
        raise InvalidConfig("delta must be positive")
    rng = make_rng(cfg.seed)
    vars_, signs = sample_clause_sets(cfg.n, cfg.delta, m, rng)
    clauses = tuple(
        tuple(int(v + 1) if s else -int(v + 1) for v, s in zip(vr, sr)) for vr, sr in zip(vars_, signs)
    )
    return Cnf(cfg.n, cfg.delta, clauses, cfg.seed)


def eval_clause(cnf: Cnf, i: int, a: int) -> int:
    """1 iff clause i is satisfied by assignment ``a`` (bit j = variable j+1)."""
    if not 0 <= i < cnf.m:
        raise IndexError(f"clause index {i} out of range")
    pos, neg = cnf.masks(i)
    return int(bool(a & pos) or (a & neg) != neg)


def join_assignment(part, x: int, y: int) -> int:
    """Global assignment from Alice's bits over ``part.A`` and Bob's over ``part.B``."""
    a = 0
    for k, v in enumerate(part.A):
        a |= ((x >> k) & 1) << v
    for k, v in enumerate(part.B):
        a |= ((y >> k) & 1) << v
    return a


def split_assignment(part, a: int) -> tuple[int, int]:
    x = sum(((a >> v) & 1) << k for k, v in enumerate(part.A))
    y = sum(((a >> v) & 1) << k for k, v in enumerate(part.B))
    return x, y


def search_oracle(cnf: Cnf, part, x: int, y: int) -> frozenset[int]:
    """Indices of all clauses falsified by the split input (x, y)."""
    if sorted(list(part.A) + list(part.B)) != list(range(cnf.n)):
        raise InvalidConfig("partition does not cover the variables exactly")
    a = join_assignment(part, x, y)
    falsified = ((a & cnf._pos) == 0) & ((a & cnf._neg) == cnf._neg)
    return frozenset(int(i) for i in np.flatnonzero(falsified))


def _satisfied_block(cnf: Cnf, start: int, stop: int) -> np.ndarray:
    a = np.arange(start, stop, dtype=np.int64)
    ok = np.ones(a.shape, dtype=bool)
    for pos, neg in zip(cnf._pos, cnf._neg):
        ok &= ((a & pos) != 0) | ((a & neg) != neg)
    return ok


def count_satisfying(cnf: Cnf, cap: int = BRUTE_FORCE_CAP) -> int:
    if cnf.n > cap:
        raise CapacityError(f"n={cnf.n} exceeds brute-force cap {cap}")
    total, block = 1 << cnf.n, 1 << 20
    return sum(int(_satisfied_block(cnf, s, min(s + block, total)).sum()) for s in range(0, total, block))


def is_unsatisfiable(cnf: Cnf, cap: int = BRUTE_FORCE_CAP) -> bool:
    """Exhaustive scan of all 2^n assignments."""
    if cnf.n > cap:
        raise CapacityError(f"n={cnf.n} exceeds brute-force cap {cap}")
    total, block = 1 << cnf.n, 1 << 20
    for s in range(0, total, block):
        if _satisfied_block(cnf, s, min(s + block, total)).any():
            return False
    return True


def write_dimacs(cnf: Cnf) -> bytes:
    lines = []
    if cnf.seed is not None:
        lines.append(f"c seed {cnf.seed}")
    lines.append(f"p cnf {cnf.n} {cnf.m}")
    lines.extend(" ".join(map(str, c)) + " 0" for c in cnf.clauses)
    return ("\n".join(lines) + "\n").encode()


def read_dimacs(data, strict: bool = False) -> Cnf:
    """Parse DIMACS CNF.  ``strict`` additionally requires every clause to have the same width."""
    text = data.decode() if isinstance(data, (bytes, bytearray)) else str(data)
    n = m = None
    seed = None
    lits: list[int] = []
    clauses: list[tuple[int, ...]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == "seed":
                seed = int(parts[2])
            continue
        if line.startswith("p"):
            parts = line.split()
            if n is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"malformed header: {line!r}")
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"malformed header: {line!r}") from None
            if n < 1 or m < 0:
                raise DimacsError(f"malformed header: {line!r}")
            continue
        if n is None:
            raise DimacsError("clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad token {tok!r}") from None
            if lit == 0:
                clauses.append(_canonical(lits))
                lits = []
            elif abs(lit) > n:
                raise DimacsError(f"literal {lit} out of range for n={n}")
            else:
                lits.append(lit)
    if n is None:
        raise DimacsError("missing header")
    if lits:
        raise DimacsError("unterminated clause")
    if len(clauses) != m:
        raise DimacsError(f"header declares {m} clauses, found {len(clauses)}")
    widths = {len(c) for c in clauses}
    if strict and len(widths) > 1:
        raise DimacsError(f"non-uniform clause widths {sorted(widths)}")
    delta = max(widths, default=1)
    try:
        return Cnf(n, delta, tuple(clauses), seed)
    except InvalidConfig as exc:
        raise DimacsError(str(exc)) from None
