"""All-branch conversion of a protocol into a structured (subcube-like) one, with step traces.

Every configuration reachable by the simulation is materialised, so the
probabilities of the simulation's random quantities under uniform inputs
are exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cnf import CapacityError
from .protocol import ProtocolTree, leaf_table
from .structure import deficiency, density_restoring_partition
from .util import fmt_frac, log2q, to_fraction

CONVERT_N_CAP = 10
CONVERT_DEPTH_CAP = 6
CONVERT_NODE_CAP = 400_000
TOL = 1e-9


@dataclass
class StepTrace:
    k: int
    speaker: str
    b: int
    i: int
    q: Fraction
    p_ge: Fraction
    h: float
    n_k: int
    d_before: float
    d_after: float

    def as_dict(self) -> dict:
        return {"k": self.k, "speaker": self.speaker, "b": self.b, "i": self.i, "q": fmt_frac(self.q),
                "p_ge": fmt_frac(self.p_ge), "h": self.h, "n_k": self.n_k,
                "d_before": self.d_before, "d_after": self.d_after}


@dataclass
class ConvNode:
    pnode: int
    X: np.ndarray
    Y: np.ndarray
    I: tuple[int, ...]
    J: tuple[int, ...]
    depth: int
    parent: int | None
    mass: Fraction
    deficiency: float
    trace: StepTrace | None = None
    children: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def codim(self) -> int:
        return len(self.I) + len(self.J)


@dataclass
class ConversionTree:
    n: int
    gamma: Fraction
    nodes: list[ConvNode]
    source: ProtocolTree

    def is_leaf(self, u: int) -> bool:
        return not self.nodes[u].children

    def leaves(self) -> list[int]:
        return [u for u in range(len(self.nodes)) if self.is_leaf(u)]

    def label(self, u: int) -> int | None:
        return self.source.nodes[self.nodes[u].pnode].label

    def path(self, u: int) -> list[int]:
        out = []
        while u is not None:
            out.append(u)
            u = self.nodes[u].parent
        return out[::-1]

    def speaker(self, u: int) -> str:
        return self.source.nodes[self.nodes[u].pnode].speaker


def _defic(X, I, Y, J, n) -> float:
    return deficiency(X, I, n) + deficiency(Y, J, n)


def convert(pi: ProtocolTree, gamma, *, n_cap: int = CONVERT_N_CAP, depth_cap: int = CONVERT_DEPTH_CAP,
            check_drp: bool = True, node_cap: int = CONVERT_NODE_CAP) -> ConversionTree:
    """Breadth-first realisation of the simulation over every branch.

    At a configuration (v, X, Y, I, J) where Alice speaks, X is split by v's
    bit into X^0, X^1, each half is density-restored relative to I, and one
    child per part (b, i) is created; Bob's turns are symmetric.
    """
    gamma = to_fraction(gamma)
    n = pi.n
    if n > n_cap or pi.depth() > depth_cap:
        raise CapacityError(f"conversion caps exceeded (n <= {n_cap}, depth <= {depth_cap})")
    size = 1 << n
    full = np.ones(size, bool)
    total = 1 << (2 * n)
    nodes = [ConvNode(pi.root, full, full.copy(), (), (), 0, None, Fraction(1), 0.0)]
    queue = [0]
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        cu = nodes[u]
        pv = pi.nodes[cu.pnode]
        if pv.is_leaf:
            continue
        alice = pv.speaker == "A"
        S, fixed = (cu.X, cu.I) if alice else (cu.Y, cu.J)
        s_size = int(S.sum())
        for b in (0, 1):
            Sb = S & (pv.table if b else ~pv.table)
            sb_size = int(Sb.sum())
            if sb_size == 0:
                continue
            q = Fraction(sb_size, s_size)
            drp = density_restoring_partition(Sb, gamma, n, fixed, check=check_drp)
            for i, part in enumerate(drp.parts):
                new_fix = tuple(sorted(fixed + part.I))
                if alice:
                    X, Y, I, J = part.X, cu.Y, new_fix, cu.J
                else:
                    X, Y, I, J = cu.X, part.X, cu.I, new_fix
                mass = Fraction(int(X.sum()) * int(Y.sum()), total)
                d_after = _defic(X, I, Y, J, n)
                h = log2q(1 / q) + log2q(1 / part.p_ge)
                tr = StepTrace(cu.depth + 1, pv.speaker, b, i, q, part.p_ge, h, len(part.I), cu.deficiency, d_after)
                nodes.append(ConvNode(pv.children[b], X, Y, I, J, cu.depth + 1, u, mass, d_after, tr))
                cu.children[(b, i)] = len(nodes) - 1
                queue.append(len(nodes) - 1)
        if len(nodes) > node_cap:
            raise CapacityError(f"conversion tree exceeds {node_cap} nodes")
    return ConversionTree(n, gamma, nodes, pi)


def walk(tree: ConversionTree, x: int, y: int) -> int:
    """Leaf of the conversion tree reached by (x, y)."""
    u = 0
    while not tree.is_leaf(u):
        cu = tree.nodes[u]
        pv = tree.source.nodes[cu.pnode]
        alice = pv.speaker == "A"
        b = int(pv.table[x] if alice else pv.table[y])
        for (bb, _), c in cu.children.items():
            side = tree.nodes[c].X if alice else tree.nodes[c].Y
            if bb == b and side[x if alice else y]:
                u = c
                break
        else:
            raise AssertionError(f"no child of {u} contains the input")
    return u


def conversion_label_table(tree: ConversionTree) -> np.ndarray:
    """Label (-1 for ⊥) at every input, painted from leaf rectangles; each input painted exactly once."""
    size = 1 << tree.n
    out = np.full((size, size), -2, dtype=np.int64)
    cover = np.zeros((size, size), dtype=np.int64)
    for u in tree.leaves():
        c = tree.nodes[u]
        lab = tree.label(u)
        out[np.ix_(c.X, c.Y)] = -1 if lab is None else lab
        cover[np.ix_(c.X, c.Y)] += 1
    if not (cover == 1).all():
        raise AssertionError("conversion leaves do not partition the input square")
    return out


def source_label_table(pi: ProtocolTree) -> np.ndarray:
    labels = np.array([-1 if v.label is None else v.label for v in pi.nodes])
    return labels[leaf_table(pi)]


@dataclass
class FidelityReport:
    agree: bool
    mismatches: int
    first_mismatch: tuple[int, int] | None


def check_fidelity(tree: ConversionTree) -> FidelityReport:
    """The conversion outputs the source protocol's label on every input."""
    a = conversion_label_table(tree)
    b = source_label_table(tree.source)
    bad = np.argwhere(a != b)
    first = None if bad.size == 0 else (int(bad[0][0]), int(bad[0][1]))
    return FidelityReport(bad.size == 0, int(len(bad)), first)


@dataclass
class CheckReport:
    check: str
    passed: bool
    checked: int
    worst_slack: float
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"check": self.check, "pass": self.passed, "checked": self.checked,
                "worst_slack": self.worst_slack, "witnesses": self.violations[:10]}


def check_deficiency_fact(tree: ConversionTree) -> CheckReport:
    """D(v) <= D(u) - (1-gamma)*n_k + h_k on every edge."""
    g = float(tree.gamma)
    worst, bad, count = math.inf, [], 0
    for v, c in enumerate(tree.nodes):
        t = c.trace
        if t is None:
            continue
        count += 1
        slack = t.d_before - (1 - g) * t.n_k + t.h - t.d_after
        worst = min(worst, slack)
        if slack < -TOL:
            bad.append({"edge": [c.parent, v], **t.as_dict()})
    return CheckReport("deficiency_fact", not bad, count, worst, bad)


def check_codim_bound(tree: ConversionTree) -> CheckReport:
    """Along each root-leaf path: sum n_k <= (sum h_k) / (1-gamma)."""
    g = float(tree.gamma)
    worst, bad, leaves = math.inf, [], tree.leaves()
    for u in leaves:
        path = tree.path(u)[1:]
        sn = sum(tree.nodes[v].trace.n_k for v in path)
        sh = sum(tree.nodes[v].trace.h for v in path)
        if g >= 1:
            ok = sn == 0
            slack = 0.0 if ok else -math.inf
        else:
            slack = sh / (1 - g) - sn
            ok = slack >= -TOL
        worst = min(worst, slack)
        if not ok:
            bad.append({"leaf": u, "sum_n": sn, "sum_h": sh})
    return CheckReport("codim_bound", not bad, len(leaves), worst, bad)


def check_tail_bound(tree: ConversionTree, thresholds=range(9)) -> CheckReport:
    """At every internal node v and integer t: Pr[q*p^{>=i} <= 2^(-1-t) | v] <= 2^(-t), exactly.

    Also checks the ordered-parts property Pr[p^{>=i} <= p^{>=j} | b] <= p^{>=j}.
    """
    bad, count = [], 0
    worst = math.inf
    for u, c in enumerate(tree.nodes):
        if not c.children:
            continue
        kids = [(key, tree.nodes[v]) for key, v in c.children.items()]
        for t in thresholds:
            count += 1
            lim = Fraction(1, 1 << (1 + t))
            heavy = sum((k.mass for _, k in kids if k.trace.q * k.trace.p_ge <= lim), Fraction(0))
            cond = heavy / c.mass
            bound = Fraction(1, 1 << t)
            worst = min(worst, float(bound - cond))
            if cond > bound:
                bad.append({"node": u, "t": t, "mass": str(cond)})
        for b in (0, 1):
            part = [k for (bb, _), k in kids if bb == b]
            if not part:
                continue
            tot = sum((k.mass for k in part), Fraction(0))
            for k in part:
                below = sum((o.mass for o in part if o.trace.p_ge <= k.trace.p_ge), Fraction(0)) / tot
                if below > k.trace.p_ge:
                    bad.append({"node": u, "b": b, "dominance": str(below)})
    return CheckReport("tail_bound", not bad, count, worst, bad)


def codim_threshold(gamma, d: int) -> Fraction:
    gamma = to_fraction(gamma)
    if gamma >= 1:
        raise ValueError("gamma must be below 1")
    return Fraction(7 * d) / (1 - gamma)


@dataclass
class ShavedTree:
    """The conversion tree with every node above the codimension budget cut to a ⊥ leaf.

    ``cut`` holds the topmost removed nodes; they stay as ⊥ leaves so the
    leaf rectangles still cover the square.
    """

    tree: ConversionTree
    threshold: Fraction
    cut: frozenset[int]

    def alive(self, u: int) -> bool:
        return not any(v in self.cut for v in self.tree.path(u)[:-1])

    def nodes(self) -> list[int]:
        """Nodes of the shaved protocol (cut nodes included as ⊥ leaves)."""
        out, stack = [], [0]
        while stack:
            u = stack.pop()
            out.append(u)
            if u not in self.cut:
                stack.extend(self.tree.nodes[u].children.values())
        return sorted(out)

    def is_leaf(self, u: int) -> bool:
        return u in self.cut or self.tree.is_leaf(u)

    def leaves(self) -> list[int]:
        return [u for u in self.nodes() if self.is_leaf(u)]

    def label(self, u: int) -> int | None:
        return None if u in self.cut else self.tree.label(u)

    def codim(self) -> int:
        """Largest codimension over the nodes that are not ⊥."""
        return max((self.tree.nodes[u].codim for u in self.nodes() if u not in self.cut), default=0)

    def children(self, u: int) -> list[int]:
        return [] if u in self.cut else list(self.tree.nodes[u].children.values())


def shave(tree: ConversionTree, gamma, d: int, threshold: Fraction | None = None) -> ShavedTree:
    thr = codim_threshold(gamma, d) if threshold is None else to_fraction(threshold)
    cut, stack = set(), [0]
    while stack:
        u = stack.pop()
        if tree.nodes[u].codim > thr:
            cut.add(u)
            continue
        stack.extend(tree.nodes[u].children.values())
    return ShavedTree(tree, thr, frozenset(cut))


def codim_tail(tree: ConversionTree, gamma, d: int, threshold: Fraction | None = None) -> Fraction:
    """Exact mass of inputs whose leaf has codimension above the budget."""
    thr = codim_threshold(gamma, d) if threshold is None else to_fraction(threshold)
    tail = sum((tree.nodes[u].mass for u in tree.leaves() if tree.nodes[u].codim > thr), Fraction(0))
    shaved = sum((tree.nodes[u].mass for u in shave(tree, gamma, d, thr).cut), Fraction(0))
    if tail != shaved:
        raise AssertionError(f"tail mass {tail} differs from shaved mass {shaved}")
    return tail


def h_tail(tree: ConversionTree, d: int, factor: int = 7) -> Fraction:
    """Exact Pr[sum of h_k >= factor*d], i.e. the leaf mass where prod(q*p^{>=i}) <= 2^(-factor*d)."""
    lim = Fraction(1, 1 << (factor * d))
    out = Fraction(0)
    for u in tree.leaves():
        prod = Fraction(1)
        for v in tree.path(u)[1:]:
            t = tree.nodes[v].trace
            prod *= t.q * t.p_ge
        if prod <= lim:
            out += tree.nodes[u].mass
    return out


def check_mass_conservation(tree: ConversionTree) -> bool:
    for c in tree.nodes:
        if c.children and sum((tree.nodes[v].mass for v in c.children.values()), Fraction(0)) != c.mass:
            return False
    return sum((tree.nodes[u].mass for u in tree.leaves()), Fraction(0)) == 1
