"""Deterministic two-party protocol trees with explicit bit-function tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cnf import CapacityError, InvalidConfig
from .partition import BipartiteInstance
from .util import make_rng

PROTOCOL_CAP = 16
EXHAUSTIVE_CAP = 10
BOT = None


@dataclass(eq=False)
class Node:
    """Internal node (speaker 'A' or 'B', table over 2^n inputs, two children) or leaf (label)."""

    speaker: str | None = None
    table: np.ndarray | None = None
    children: tuple[int, int] | None = None
    label: int | None = BOT

    @property
    def is_leaf(self) -> bool:
        return self.speaker is None


@dataclass(eq=False)
class ProtocolTree:
    n: int
    nodes: list[Node]

    def __post_init__(self):
        if self.n > PROTOCOL_CAP:
            raise CapacityError(f"n={self.n} exceeds the table cap {PROTOCOL_CAP}")
        size = 1 << self.n
        for k, v in enumerate(self.nodes):
            if v.is_leaf:
                continue
            if v.speaker not in ("A", "B") or v.children is None or len(v.children) != 2:
                raise InvalidConfig(f"node {k} is malformed")
            if v.table is None or v.table.shape != (size,):
                raise InvalidConfig(f"node {k} table must have length 2^n")

    @property
    def root(self) -> int:
        return 0

    def depth(self, v: int = 0) -> int:
        node = self.nodes[v]
        if node.is_leaf:
            return 0
        return 1 + max(self.depth(c) for c in node.children)

    def to_json(self) -> str:
        out = []
        for v in self.nodes:
            if v.is_leaf:
                out.append({"label": "bot" if v.label is None else int(v.label)})
            else:
                out.append({"speaker": v.speaker, "table": _table_hex(v.table), "children": list(v.children)})
        return json.dumps({"n": self.n, "nodes": out})

    @classmethod
    def from_json(cls, text: str) -> "ProtocolTree":
        obj = json.loads(text)
        n = obj["n"]
        nodes = []
        for d in obj["nodes"]:
            if "label" in d:
                nodes.append(Node(label=None if d["label"] == "bot" else int(d["label"])))
            else:
                nodes.append(Node(d["speaker"], _table_from_hex(d["table"], n), tuple(d["children"])))
        return cls(n, nodes)


def _table_hex(t: np.ndarray) -> str:
    return np.packbits(t.astype(np.uint8), bitorder="little").tobytes().hex()


def _table_from_hex(h: str, n: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(h), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[: 1 << n].astype(bool)


def leaf_protocol(n: int, label: int | None) -> ProtocolTree:
    return ProtocolTree(n, [Node(label=label)])


@dataclass
class Rectangle:
    X: np.ndarray
    Y: np.ndarray

    @property
    def size(self) -> int:
        return int(self.X.sum()) * int(self.Y.sum())


def rectangles(pi: ProtocolTree) -> dict[int, Rectangle]:
    """Rectangle of every reachable node; nodes with an empty side are left out."""
    size = 1 << pi.n
    out: dict[int, Rectangle] = {}
    stack = [(pi.root, np.ones(size, bool), np.ones(size, bool))]
    while stack:
        v, X, Y = stack.pop()
        if not X.any() or not Y.any():
            continue
        out[v] = Rectangle(X, Y)
        node = pi.nodes[v]
        if node.is_leaf:
            continue
        c0, c1 = node.children
        if node.speaker == "A":
            stack.append((c1, X & node.table, Y))
            stack.append((c0, X & ~node.table, Y))
        else:
            stack.append((c1, X, Y & node.table))
            stack.append((c0, X, Y & ~node.table))
    return out


def leaf_masses(pi: ProtocolTree, rects: dict[int, Rectangle] | None = None) -> dict[int, Fraction]:
    rects = rectangles(pi) if rects is None else rects
    total = 1 << (2 * pi.n)
    return {v: Fraction(r.size, total) for v, r in rects.items() if pi.nodes[v].is_leaf}


def execute(pi: ProtocolTree, x: int, y: int) -> tuple[int, int | None]:
    v = pi.root
    while not pi.nodes[v].is_leaf:
        node = pi.nodes[v]
        b = node.table[x] if node.speaker == "A" else node.table[y]
        v = node.children[int(b)]
    return v, pi.nodes[v].label


def leaf_table(pi: ProtocolTree, rects: dict[int, Rectangle] | None = None) -> np.ndarray:
    """Leaf id reached by every (x, y), as a 2^n x 2^n array."""
    rects = rectangles(pi) if rects is None else rects
    size = 1 << pi.n
    out = np.full((size, size), -1, dtype=np.int64)
    for v, r in rects.items():
        if pi.nodes[v].is_leaf:
            out[np.ix_(r.X, r.Y)] = v
    if (out < 0).any():
        raise AssertionError("leaf rectangles do not cover the input square")
    return out


def _check_labels(pi: ProtocolTree, m: int):
    for k, v in enumerate(pi.nodes):
        if v.is_leaf and v.label is not None and not 0 <= v.label < m:
            raise InvalidConfig(f"leaf {k} label {v.label} out of range for m={m}")


def rect_falsified_count(inst: BipartiteInstance, X: np.ndarray, Y: np.ndarray, k: int) -> int:
    """|{(x, y) in X x Y : clause k false}|, using that falsification splits across sides."""
    return int(inst.fx[k][X].sum()) * int(inst.fy[k][Y].sum())


def success_per_leaf(pi: ProtocolTree, inst: BipartiteInstance,
                     rects: dict[int, Rectangle] | None = None) -> Fraction:
    """E over leaves (weighted by rectangle mass) of Pr_{R_leaf}[output clause false]."""
    rects = rectangles(pi) if rects is None else rects
    total = 0
    for v, r in rects.items():
        lab = pi.nodes[v].label
        if pi.nodes[v].is_leaf and lab is not None:
            total += rect_falsified_count(inst, r.X, r.Y, lab)
    return Fraction(total, 1 << (2 * pi.n))


def success_exhaustive(pi: ProtocolTree, inst: BipartiteInstance,
                       rects: dict[int, Rectangle] | None = None) -> Fraction:
    """Pr over all 2^(2n) inputs that the protocol's output clause is false."""
    if pi.n > EXHAUSTIVE_CAP:
        raise CapacityError(f"n={pi.n} exceeds the exhaustive cap {EXHAUSTIVE_CAP}")
    leaves = leaf_table(pi, rects)
    labels = np.array([-1 if v.label is None or not v.is_leaf else v.label for v in pi.nodes])
    lab = labels[leaves]
    size = 1 << pi.n
    xs = np.arange(size)[:, None]
    ys = np.arange(size)[None, :]
    ok = lab >= 0
    safe = np.where(ok, lab, 0)
    hit = ok & inst.fx[safe, xs] & inst.fy[safe, ys]
    return Fraction(int(hit.sum()), 1 << (2 * pi.n))


def search_error(pi: ProtocolTree, inst: BipartiteInstance, *, exhaustive: bool | None = None) -> Fraction:
    """Probability that the output is not a falsified clause (a ⊥ output always fails).

    Computed leaf-by-leaf and, when n is small enough, also by enumerating
    every input; the two must agree exactly.
    """
    if pi.n != inst.n:
        raise InvalidConfig("protocol and instance disagree on n")
    _check_labels(pi, inst.m)
    rects = rectangles(pi)
    per_leaf = success_per_leaf(pi, inst, rects)
    if exhaustive is None:
        exhaustive = pi.n <= EXHAUSTIVE_CAP
    if exhaustive:
        brute = success_exhaustive(pi, inst, rects)
        if brute != per_leaf:
            raise AssertionError(f"leaf form {per_leaf} differs from enumeration {brute}")
    return 1 - per_leaf


def _subtree_by_code(nodes: list[Node], code: np.ndarray, Y: np.ndarray, nbits: int, cands: list[int],
                     size: int) -> int:
    """Bob reveals ``code[y]`` bit by bit (high bit first) until it is determined on Y."""
    present = np.unique(code[Y])
    if len(present) == 1 or nbits == 0:
        c = int(present[0])
        nodes.append(Node(label=cands[c] if c < len(cands) else None))
        return len(nodes) - 1
    bit = nbits - 1
    table = ((code >> bit) & 1).astype(bool)
    if not (Y & table).any() or not (Y & ~table).any():
        return _subtree_by_code(nodes, code, Y, bit, cands, size)
    idx = len(nodes)
    nodes.append(Node("B", table, (0, 0)))
    c0 = _subtree_by_code(nodes, code, Y & ~table, bit, cands, size)
    c1 = _subtree_by_code(nodes, code, Y & table, bit, cands, size)
    nodes[idx].children = (c0, c1)
    return idx


def baseline_protocol(inst: BipartiteInstance) -> ProtocolTree:
    """Alice reveals x bit by bit; Bob then names the first clause falsified by (x, y), or ⊥.

    Bob's answer indexes the clauses whose X-part x falsifies, so it costs
    ceil(log2(K+1)) further bits where K is the number of such clauses.
    """
    n = inst.n
    if n > PROTOCOL_CAP:
        raise CapacityError("n over protocol cap")
    size = 1 << n
    xs = np.arange(size)
    nodes: list[Node] = []

    def alice(prefix: int, k: int) -> int:
        if k == n:
            x = prefix
            cands = [c for c in range(inst.m) if inst.fx[c, x]]
            code = np.full(size, len(cands), dtype=np.int64)
            for j in reversed(range(len(cands))):
                code[inst.fy[cands[j]]] = j
            nbits = math.ceil(math.log2(len(cands) + 1)) if cands else 0
            return _subtree_by_code(nodes, code, np.ones(size, bool), nbits, cands, size)
        idx = len(nodes)
        nodes.append(Node("A", ((xs >> k) & 1).astype(bool), (0, 0)))
        c0 = alice(prefix, k + 1)
        c1 = alice(prefix | (1 << k), k + 1)
        nodes[idx].children = (c0, c1)
        return idx

    alice(0, 0)
    return ProtocolTree(n, nodes)


FAMILIES = ("coordinate", "xor", "balanced-random")


@dataclass(frozen=True)
class RandomProtocolConfig:
    n: int
    depth: int
    family: str = "coordinate"
    speakers: str = "alternate"
    labels: str = "uniform"
    seed: int = 0


def _node_table(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    size = 1 << n
    xs = np.arange(size, dtype=np.int64)
    if family == "coordinate":
        j = int(rng.integers(0, n))
        return ((xs >> j) & 1).astype(bool)
    if family == "xor":
        support = int(rng.integers(1, size))
        return (np.bitwise_count(xs & support) & 1).astype(bool)
    if family == "balanced-random":
        t = np.zeros(size, bool)
        t[rng.permutation(size)[: size // 2]] = True
        return t
    raise InvalidConfig(f"unknown family {family!r}")


def random_protocol(cfg: RandomProtocolConfig, m: int | None = None,
                    inst: BipartiteInstance | None = None) -> ProtocolTree:
    """Complete depth-d tree with node functions from ``cfg.family``.

    Leaves are labelled uniformly from range(m), or greedily (the clause with
    the largest falsified mass on the leaf rectangle) when ``cfg.labels`` is
    "greedy", which needs ``inst``.
    """
    if cfg.family not in FAMILIES:
        raise InvalidConfig(f"unknown family {cfg.family!r}")
    if cfg.depth < 0 or cfg.depth > 2 * PROTOCOL_CAP:
        raise CapacityError("depth out of range")
    if inst is not None:
        m = inst.m
    if m is None or m < 1:
        raise InvalidConfig("labelling needs m >= 1")
    rng = make_rng(cfg.seed, 0x9E)
    nodes: list[Node] = []

    def build(k: int) -> int:
        idx = len(nodes)
        if k == cfg.depth:
            nodes.append(Node(label=int(rng.integers(0, m))))
            return idx
        if cfg.speakers == "alternate":
            sp = "A" if k % 2 == 0 else "B"
        else:
            sp = "AB"[int(rng.integers(0, 2))]
        nodes.append(Node(sp, _node_table(cfg.family, cfg.n, rng), (0, 0)))
        c0 = build(k + 1)
        c1 = build(k + 1)
        nodes[idx].children = (c0, c1)
        return idx

    build(0)
    pi = ProtocolTree(cfg.n, nodes)
    if cfg.labels == "greedy":
        if inst is None:
            raise InvalidConfig("greedy labels need an instance")
        greedy_relabel(pi, inst)
    elif cfg.labels != "uniform":
        raise InvalidConfig(f"unknown labelling {cfg.labels!r}")
    return pi


def greedy_relabel(pi: ProtocolTree, inst: BipartiteInstance) -> None:
    """Label every reachable leaf by the clause with the most falsifying inputs in its rectangle."""
    for v, r in rectangles(pi).items():
        if pi.nodes[v].is_leaf:
            cx = inst.fx[:, r.X].sum(axis=1)
            cy = inst.fy[:, r.Y].sum(axis=1)
            pi.nodes[v].label = int(np.argmax(cx.astype(np.int64) * cy))


def relabeled(pi: ProtocolTree, labels: dict[int, int | None]) -> ProtocolTree:
    nodes = [Node(v.speaker, v.table, v.children, labels.get(k, v.label)) for k, v in enumerate(pi.nodes)]
    return ProtocolTree(pi.n, nodes)
