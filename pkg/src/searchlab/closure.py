"""Closures of expanders along label trees: sets of left vertices whose removal restores expansion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bigraph import (BipartiteGraph, CapacityError, ExpanderParams, check_expansion,
                      enumeration_size, neighborhood)
from .cnf import InvalidConfig
from .util import bits, combo_chunks, fmt_frac, popcount, to_fraction, to_mask

BAD_SET_BUDGET = 10**7


@dataclass
class LabelTree:
    """Rooted tree (node 0 is the root) whose nodes carry right-vertex masks S_u."""

    parent: list[int | None]
    S: list[int]

    def __post_init__(self):
        if not self.parent or self.parent[0] is not None:
            raise InvalidConfig("node 0 must be the root")
        if self.S[0] != 0:
            raise InvalidConfig("the root label must be empty")
        for v in range(1, len(self.parent)):
            u = self.parent[v]
            if u is None or not 0 <= u < v:
                raise InvalidConfig("parents must precede children")
            if self.S[u] & ~self.S[v]:
                raise InvalidConfig(f"labels not monotone on edge {u}->{v}")

    def __len__(self) -> int:
        return len(self.parent)

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.parent]
        for v in range(1, len(self.parent)):
            out[self.parent[v]].append(v)
        return out

    def d(self) -> int:
        return max(popcount(s) for s in self.S)


def chain_split(tree: LabelTree) -> tuple[LabelTree, list[int]]:
    """Subdivide edges so that each adds at most one element, smallest first.

    Returns the new tree and, for each original node, its index in it.
    """
    parent: list[int | None] = [None]
    S = [0]
    where = [0] * len(tree)
    for v in range(1, len(tree)):
        u = where[tree.parent[v]]
        added = bits(tree.S[v] & ~tree.S[tree.parent[v]])
        cur = tree.S[tree.parent[v]]
        for e in added[:-1]:
            cur |= 1 << e
            parent.append(u)
            S.append(cur)
            u = len(parent) - 1
        parent.append(u)
        S.append(tree.S[v])
        where[v] = len(parent) - 1
    return LabelTree(parent, S), where


def _is_bad(count, size: int, beta: Fraction, delta: int):
    # |N(B)| <= beta * Delta * |B|
    return count * beta.denominator <= beta.numerator * delta * size


def largest_bad_set(g: BipartiteGraph, excluded_left: int, removed_right: int, r: int, beta, *,
                    max_size: int | None = None, cap: int = BAD_SET_BUDGET) -> int:
    """Largest B (ties: lexicographically smallest) outside ``excluded_left`` with |B| <= r and
    |N(B) minus removed_right| <= beta*Delta*|B|; returned as a mask, 0 when none exists.

    ``max_size`` restricts the search to smaller sets (used by the fast mode).
    """
    beta = to_fraction(beta)
    allowed = [i for i in range(g.m) if not (excluded_left >> i) & 1]
    top = min(r, len(allowed)) if max_size is None else min(r, len(allowed), max_size)
    if top <= 0:
        return 0
    if enumeration_size(len(allowed), top) > cap:
        raise CapacityError("bad-set search exceeds its enumeration budget")
    if g.n <= 64:
        arr = np.array([g.adj[i] & ~removed_right for i in allowed], dtype=np.uint64)
        for s in range(top, 0, -1):
            for combos in combo_chunks(len(allowed), s):
                cnt = np.bitwise_count(np.bitwise_or.reduce(arr[combos], axis=1)).astype(np.int64)
                hit = np.flatnonzero(_is_bad(cnt, s, beta, g.delta))
                if hit.size:
                    return to_mask(allowed[int(j)] for j in combos[int(hit[0])])
        return 0
    from itertools import combinations

    for s in range(top, 0, -1):
        for B in combinations(allowed, s):
            if _is_bad(popcount(neighborhood(g, B) & ~removed_right), s, beta, g.delta):
                return to_mask(B)
    return 0


@dataclass
class ClosureFamily:
    T: list[int]
    alpha: Fraction
    beta: Fraction
    r: int
    hypothesis_ok: bool = True
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({str(u): bits(t) for u, t in enumerate(self.T)})


def closure_hypothesis(d: int, alpha, beta, r: int, delta: int) -> bool:
    """d <= (alpha-beta)^2 * r * Delta / 4."""
    alpha, beta = to_fraction(alpha), to_fraction(beta)
    return d <= (alpha - beta) ** 2 * r * delta / 4


class HypothesisError(ValueError):
    pass


def build_closure(g: BipartiteGraph, tree: LabelTree, alpha, beta, r: int, *, strict: bool = True,
                  fast: bool = False, d: int | None = None) -> ClosureFamily:
    """Grow T along the tree: an edge adding right vertex i sets T_v = T_u + B_v where B_v is the
    largest bad set of G - T_u - S_v - N(T_u).

    With ``strict`` the construction is refused unless d <= (alpha-beta)^2*r*Delta/4
    and g is a certified (r, Delta, alpha*Delta)-expander.
    """
    alpha, beta = to_fraction(alpha), to_fraction(beta)
    if not 0 < beta < alpha <= 1:
        raise InvalidConfig("need 0 < beta < alpha <= 1")
    d = tree.d() if d is None else d
    hyp = closure_hypothesis(d, alpha, beta, r, g.delta)
    notes = []
    if not hyp:
        notes.append(f"d={d} exceeds (alpha-beta)^2 r Delta/4 = {fmt_frac((alpha - beta) ** 2 * r * g.delta / 4)}")
    if g.m:
        rep = check_expansion(g, ExpanderParams(r, g.delta, alpha))
        if not rep.is_expander:
            hyp = False
            notes.append(f"graph is not an (r, Delta, alpha Delta)-expander: witness {rep.witness}")
    if strict and not hyp:
        raise HypothesisError("; ".join(notes))
    split, where = chain_split(tree)
    T = [0] * len(split)
    gap = alpha - beta
    for v in range(1, len(split)):
        u = split.parent[v]
        if split.S[v] == split.S[u]:
            T[v] = T[u]
            continue
        removed = split.S[v] | neighborhood(g, T[u])
        bound = Fraction(2 * popcount(split.S[v])) / (gap * gap * g.delta)
        B = largest_bad_set(g, T[u], removed, r, beta, max_size=int(bound) if fast else None)
        if hyp and popcount(B) > bound:
            raise AssertionError(f"bad set of size {popcount(B)} exceeds {bound}")
        T[v] = T[u] | B
    return ClosureFamily([T[where[v]] for v in range(len(tree))], alpha, beta, r, hyp, notes)


@dataclass
class ClosureReport:
    item_a: bool
    item_b: bool
    item_c: bool
    witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.item_a and self.item_b and self.item_c

    def as_dict(self) -> dict:
        return {"pass": self.passed, "expansion": self.item_a, "monotone": self.item_b, "size": self.item_c,
                "witnesses": self.witnesses[:10]}


def reduced_graph(g: BipartiteGraph, T: int, S: int) -> BipartiteGraph:
    """G - T - S - N(T)."""
    return g.reduced(drop_left=T, drop_right=S | neighborhood(g, T))


def verify_closure(g: BipartiteGraph, tree: LabelTree, fam: ClosureFamily, alpha=None, beta=None,
                   r: int | None = None) -> ClosureReport:
    """(a) every reduced graph is an (r, Delta, beta*Delta)-expander; (b) T grows along edges and
    is empty at the root; (c) |T_u| <= |S_u| / ((alpha-beta)*Delta), which implies the d-form."""
    alpha = fam.alpha if alpha is None else to_fraction(alpha)
    beta = fam.beta if beta is None else to_fraction(beta)
    r = fam.r if r is None else r
    wit = []
    a_ok = True
    for u in range(len(tree)):
        red = reduced_graph(g, fam.T[u], tree.S[u])
        if red.m == 0:
            continue
        rep = check_expansion(red, ExpanderParams(r, g.delta, beta))
        if not rep.is_expander:
            a_ok = False
            S, c = rep.witness
            wit.append({"item": "a", "node": u, "set": [red.label(i) for i in S], "neighbours": c})
    b_ok = fam.T[0] == 0
    if not b_ok:
        wit.append({"item": "b", "node": 0, "root": bits(fam.T[0])})
    for v in range(1, len(tree)):
        u = tree.parent[v]
        if fam.T[u] & ~fam.T[v]:
            b_ok = False
            wit.append({"item": "b", "edge": [u, v], "missing": bits(fam.T[u] & ~fam.T[v])})
    c_ok = True
    gap = alpha - beta
    d = tree.d()
    for u in range(len(tree)):
        t = popcount(fam.T[u])
        if t * gap * g.delta > popcount(tree.S[u]) or t * gap * g.delta > d:
            c_ok = False
            wit.append({"item": "c", "node": u, "size": t, "label_size": popcount(tree.S[u])})
    return ClosureReport(a_ok, b_ok, c_ok, wit)


def random_label_tree(n: int, nodes: int, d: int, rng: np.random.Generator, grow: float = 0.5) -> LabelTree:
    """Random recursive tree whose labels grow by random new right vertices, capped at size d."""
    parent: list[int | None] = [None]
    S = [0]
    for v in range(1, nodes):
        u = int(rng.integers(0, v))
        s = S[u]
        free = [j for j in range(n) if not (s >> j) & 1]
        room = d - popcount(s)
        k = 0
        while k < room and free and rng.random() < grow:
            k += 1
        if k:
            s |= to_mask(int(j) for j in rng.choice(free, size=k, replace=False))
        parent.append(u)
        S.append(s)
    return LabelTree(parent, S)


def greedy_expander(m: int, n: int, delta: int, r: int, alpha, rng: np.random.Generator,
                    attempts: int = 2000) -> BipartiteGraph | None:
    """Add random delta-subsets one at a time, keeping each only if the graph stays certified.

    Candidates favour lightly used right vertices, which keeps overlaps small.
    """
    p = ExpanderParams(r, delta, to_fraction(alpha))
    adj: list[int] = []
    load = np.zeros(n)
    for _ in range(attempts):
        w = (1.0 + load) ** -4
        cand = to_mask(int(j) for j in rng.choice(n, size=delta, replace=False, p=w / w.sum()))
        g = BipartiteGraph(len(adj) + 1, n, tuple(adj + [cand]), delta)
        if check_expansion(g, p).is_expander:
            adj.append(cand)
            load[bits(cand)] += 1
            if len(adj) == m:
                return g
    return None


def mutate_family(fam: ClosureFamily, tree: LabelTree, kind: str, rng: np.random.Generator,
                  m: int) -> ClosureFamily | None:
    """Corrupted copy of a family; ``None`` when the requested corruption does not apply."""
    T = list(fam.T)
    kids = tree.children()
    if kind == "inflate-root":
        T[0] |= 1 << int(rng.integers(0, m))
    elif kind == "parent-only":
        inner = [u for u in range(len(tree)) if kids[u]]
        if not inner:
            return None
        u = inner[int(rng.integers(0, len(inner)))]
        spare = [i for i in range(m) if not any((T[c] >> i) & 1 for c in kids[u])]
        if not spare:
            return None
        T[u] |= 1 << spare[int(rng.integers(0, len(spare)))]
    elif kind == "drop":
        # only removals that an inherited copy (child or parent) exposes
        cands = [(u, e) for u in range(len(tree)) for e in bits(T[u])
                 if kids[u] or (tree.parent[u] is not None and (T[tree.parent[u]] >> e) & 1)]
        if not cands:
            return None
        u, e = cands[int(rng.integers(0, len(cands)))]
        T[u] &= ~(1 << e)
    else:
        raise InvalidConfig(f"unknown mutation {kind!r}")
    return ClosureFamily(T, fam.alpha, fam.beta, fam.r, fam.hypothesis_ok, ["mutated: " + kind])


@dataclass
class ProtocolClosures:
    nodes: list[int]
    tree_x: LabelTree
    tree_y: LabelTree
    cl_x: ClosureFamily
    cl_y: ClosureFamily
    d: int

    def index(self) -> dict[int, int]:
        return {u: k for k, u in enumerate(self.nodes)}

    def J(self, u: int) -> int:
        k = self.index()[u]
        return self.cl_x.T[k] | self.cl_y.T[k]


def protocol_label_trees(shaved) -> tuple[list[int], LabelTree, LabelTree]:
    """Label trees over the non-⊥ nodes of a shaved conversion, labelled by fix(X_u) and fix(Y_u)."""
    tree = shaved.tree
    order = [u for u in shaved.nodes() if u not in shaved.cut]
    pos = {u: k for k, u in enumerate(order)}
    parent = [None if tree.nodes[u].parent is None else pos[tree.nodes[u].parent] for u in order]
    sx = [to_mask(tree.nodes[u].I) for u in order]
    sy = [to_mask(tree.nodes[u].J) for u in order]
    return order, LabelTree(parent, sx), LabelTree(parent, sy)


def protocol_closures(inst, shaved, alpha, beta, r: int, *, strict: bool = True) -> ProtocolClosures:
    """Closures for G1 along fix(X) and for G2 along fix(Y), built independently.

    The hypothesis is checked against the codimension of the shaved protocol.
    """
    order, tx, ty = protocol_label_trees(shaved)
    d = shaved.codim()
    fx = build_closure(inst.g1, tx, alpha, beta, r, strict=strict, d=d)
    fy = build_closure(inst.g2, ty, alpha, beta, r, strict=strict, d=d)
    return ProtocolClosures(order, tx, ty, fx, fy, d)
