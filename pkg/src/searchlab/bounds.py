"""Per-leaf falsification probabilities of a structured protocol and the inequalities built on them.

All probabilities are exact rationals.  ``e`` below is the exponent
gamma*alpha*Delta/2 of the per-clause bound 2^(-e).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .closure import HypothesisError, ProtocolClosures, closure_hypothesis, protocol_closures, verify_closure
from .conversion import (ShavedTree, check_codim_bound, check_deficiency_fact, check_fidelity,
                         check_mass_conservation, check_tail_bound, codim_tail, codim_threshold, convert, shave)
from .partition import BipartiteInstance
from .protocol import ProtocolTree, search_error
from .util import bits, dyadic_pow_le, fmt_frac, popcount, to_fraction

EXHAUSTIVE_CAP = 10


@dataclass
class BoundReport:
    check: str
    params: dict
    bound: str
    measured: str
    passed: bool
    witnesses: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"check": self.check, "params": self.params, "bound": self.bound, "measured": self.measured,
                "pass": self.passed, "witnesses": self.witnesses[:10]}


def exponent(gamma, alpha, delta: int) -> Fraction:
    return to_fraction(gamma) * to_fraction(alpha) * delta / 2


def _within(value: Fraction, factor, e: Fraction) -> bool:
    """value <= factor * 2^(-e), exactly."""
    if value <= 0:
        return True
    if factor <= 0:
        return False
    return dyadic_pow_le(value / factor, e)


def _pow_str(factor, e: Fraction) -> str:
    return f"{factor}*2^-({fmt_frac(e)})"


@dataclass
class LeafRow:
    leaf: int
    mass: Fraction
    label: int | None
    J: int
    p: list[Fraction]


@dataclass
class LeafAnalysis:
    inst: BipartiteInstance
    shaved: ShavedTree
    closures: ProtocolClosures | None
    rows: list[LeafRow]
    bottom_mass: Fraction
    success: Fraction

    @property
    def codim(self) -> int:
        return self.shaved.codim()


def _paint_labels(shaved: ShavedTree) -> np.ndarray:
    size = 1 << shaved.tree.n
    out = np.full((size, size), -2, dtype=np.int64)
    for u in shaved.leaves():
        c = shaved.tree.nodes[u]
        lab = shaved.label(u)
        out[np.ix_(c.X, c.Y)] = -1 if lab is None else lab
    if (out == -2).any():
        raise AssertionError("shaved leaves do not cover the input square")
    return out


def success_by_enumeration(inst: BipartiteInstance, shaved: ShavedTree) -> Fraction:
    lab = _paint_labels(shaved)
    size = 1 << inst.n
    ok = lab >= 0
    safe = np.where(ok, lab, 0)
    hit = ok & inst.fx[safe, np.arange(size)[:, None]] & inst.fy[safe, np.arange(size)[None, :]]
    return Fraction(int(hit.sum()), 1 << (2 * inst.n))


def leaf_analysis(inst: BipartiteInstance, shaved: ShavedTree, closures: ProtocolClosures | None = None, *,
                  exhaustive: bool | None = None) -> LeafAnalysis:
    """Exact p_i(leaf) for every clause i at every non-⊥ leaf, and the success probability.

    The success probability is the mass-weighted average of p_label over
    leaves (⊥ leaves contribute nothing).  For n up to EXHAUSTIVE_CAP it is
    recomputed by enumerating every input and the two must be equal.
    """
    if inst.n != shaved.tree.n:
        raise ValueError("instance and protocol disagree on n")
    idx = closures.index() if closures is not None else {}
    rows, bottom, success = [], Fraction(0), Fraction(0)
    for u in shaved.leaves():
        c = shaved.tree.nodes[u]
        if u in shaved.cut:
            bottom += c.mass
            continue
        nx, ny = int(c.X.sum()), int(c.Y.sum())
        cx = inst.fx[:, c.X].sum(axis=1)
        cy = inst.fy[:, c.Y].sum(axis=1)
        p = [Fraction(int(a) * int(b), nx * ny) for a, b in zip(cx, cy)]
        J = 0
        if closures is not None:
            k = idx[u]
            J = closures.cl_x.T[k] | closures.cl_y.T[k]
        lab = shaved.label(u)
        rows.append(LeafRow(u, c.mass, lab, J, p))
        if lab is not None:
            success += c.mass * p[lab]
    if exhaustive is None:
        exhaustive = inst.n <= EXHAUSTIVE_CAP
    if exhaustive:
        brute = success_by_enumeration(inst, shaved)
        if brute != success:
            raise AssertionError(f"leaf average {success} differs from enumeration {brute}")
    total = bottom + sum((r.mass for r in rows), Fraction(0))
    if total != 1:
        raise AssertionError(f"leaf masses sum to {total}")
    return LeafAnalysis(inst, shaved, closures, rows, bottom, success)


def check_leaf_bound(an: LeafAnalysis, gamma, alpha, delta: int) -> BoundReport:
    """p_i(leaf) <= 2^(-e) for every leaf and every clause outside J_leaf."""
    e = exponent(gamma, alpha, delta)
    bad, worst = [], Fraction(0)
    for row in an.rows:
        for i, p in enumerate(row.p):
            if (row.J >> i) & 1:
                continue
            worst = max(worst, p)
            if not dyadic_pow_le(p, e):
                bad.append({"leaf": row.leaf, "clause": i, "p": fmt_frac(p)})
    params = {"gamma": fmt_frac(gamma), "alpha": fmt_frac(alpha), "Delta": delta}
    return BoundReport("leaf_bound", params, _pow_str(1, e), fmt_frac(worst), not bad, bad)


def _v_sets(an: LeafAnalysis) -> dict[int, list[int]]:
    """For each clause i, the topmost non-⊥ nodes whose J contains i."""
    cl = an.closures
    out: dict[int, list[int]] = {}
    if cl is None:
        return out
    tree = an.shaved.tree
    for k, u in enumerate(cl.nodes):
        J = cl.cl_x.T[k] | cl.cl_y.T[k]
        par = tree.nodes[u].parent
        Jp = 0 if par is None else cl.J(par)
        for i in bits(J & ~Jp):
            out.setdefault(i, []).append(u)
    return out


def check_bad_mass(an: LeafAnalysis, d: int, gamma, alpha, delta: int) -> BoundReport:
    """E_leaf[sum over J_leaf of p_i] <= d * 2^(-e), plus the structure behind it.

    For each clause i the topmost nodes where i joins J must have disjoint
    rectangles whose union, away from ⊥ leaves, is exactly the set of inputs
    whose leaf has i in J.  Also |J_leaf| <= d.
    """
    e = exponent(gamma, alpha, delta)
    value = sum((row.mass * sum((row.p[i] for i in bits(row.J)), Fraction(0)) for row in an.rows),
                Fraction(0))
    wit = []
    for row in an.rows:
        if popcount(row.J) > d:
            wit.append({"leaf": row.leaf, "J_size": popcount(row.J), "d": d})
    tree = an.shaved.tree
    size = 1 << tree.n
    live = np.ones((size, size), bool)
    for u in an.shaved.cut:
        c = tree.nodes[u]
        live[np.ix_(c.X, c.Y)] = False
    for i, tops in _v_sets(an).items():
        paint = np.zeros((size, size), dtype=np.int64)
        for u in tops:
            c = tree.nodes[u]
            paint[np.ix_(c.X, c.Y)] += 1
        if (paint > 1).any():
            wit.append({"clause": i, "overlap": True, "nodes": tops})
        target = np.zeros((size, size), bool)
        for row in an.rows:
            if (row.J >> i) & 1:
                c = tree.nodes[row.leaf]
                target[np.ix_(c.X, c.Y)] = True
        if not np.array_equal((paint > 0) & live, target):
            wit.append({"clause": i, "cover": False, "nodes": tops})
    ok = _within(value, d, e) and not wit
    if not _within(value, d, e):
        wit.insert(0, {"expectation": fmt_frac(value)})
    params = {"d": d, "gamma": fmt_frac(gamma), "alpha": fmt_frac(alpha), "Delta": delta}
    return BoundReport("bad_mass", params, _pow_str(d, e), fmt_frac(value), ok, wit)


def check_success_identity(an: LeafAnalysis) -> BoundReport:
    """Leaf-average success equals the enumerated success exactly."""
    brute = success_by_enumeration(an.inst, an.shaved)
    return BoundReport("success_identity", {"n": an.inst.n}, fmt_frac(brute), fmt_frac(an.success),
                       brute == an.success)


def subcube_error_bound(an: LeafAnalysis, gamma, alpha, delta: int, r: int | None = None,
                        beta=None) -> BoundReport:
    """Success of the structured protocol <= (codim + 1) * 2^(-e).

    With ``r`` given, the closure hypothesis d <= (alpha-beta)^2 r Delta/4 is
    enforced first (beta defaults to alpha/2).
    """
    alpha = to_fraction(alpha)
    d = an.codim
    if r is not None:
        beta = alpha / 2 if beta is None else to_fraction(beta)
        if not closure_hypothesis(d, alpha, beta, r, delta):
            raise HypothesisError(f"codimension {d} is outside the closure hypothesis")
    e = exponent(gamma, alpha, delta)
    ok = _within(an.success, d + 1, e)
    params = {"codim": d, "gamma": fmt_frac(gamma), "alpha": fmt_frac(alpha), "Delta": delta}
    return BoundReport("subcube_error_bound", params, _pow_str(d + 1, e), fmt_frac(an.success), ok,
                       [] if ok else [{"success": fmt_frac(an.success)}])


@dataclass
class EndToEndConfig:
    gamma: Fraction
    alpha: Fraction
    beta: Fraction
    r: int
    d: int
    threshold: Fraction | None = None
    strict: bool = True


@dataclass
class EndToEndReport:
    config: EndToEndConfig
    stage: str
    refused: bool
    checks: list[BoundReport | dict]
    success_pi: Fraction | None = None
    success_tilde: Fraction | None = None
    tail: Fraction | None = None
    codim: int | None = None

    @property
    def passed(self) -> bool:
        if self.refused:
            return False
        return all(c.passed if isinstance(c, BoundReport) else c["pass"] for c in self.checks)

    def as_dict(self) -> dict:
        c = self.config
        return {
            "check": "end_to_end",
            "params": {"gamma": fmt_frac(c.gamma), "alpha": fmt_frac(c.alpha), "beta": fmt_frac(c.beta),
                       "r": c.r, "d": c.d, "threshold": None if c.threshold is None else fmt_frac(c.threshold)},
            "stage": self.stage,
            "refused": self.refused,
            "codim": self.codim,
            "success_pi": None if self.success_pi is None else fmt_frac(self.success_pi),
            "success_tilde": None if self.success_tilde is None else fmt_frac(self.success_tilde),
            "tail": None if self.tail is None else fmt_frac(self.tail),
            "pass": self.passed,
            "checks": [x.as_dict() if isinstance(x, BoundReport) else x for x in self.checks],
        }


def _as_bound(rep, name: str) -> BoundReport:
    return BoundReport(name, {}, "", f"worst_slack={rep.worst_slack}", rep.passed, rep.violations)


def end_to_end(inst: BipartiteInstance, pi: ProtocolTree, cfg: EndToEndConfig) -> EndToEndReport:
    """Convert, shave, build closures, then check every intermediate inequality and the final chain

        success(pi) <= (codim + 1) * 2^(-e) + (mass shaved away).

    A closure-hypothesis violation stops the run at the closure stage with
    ``refused`` set (only when ``cfg.strict``).
    """
    checks: list = []
    tree = convert(pi, cfg.gamma)
    fid = check_fidelity(tree)
    checks.append(BoundReport("fidelity", {}, "0", str(fid.mismatches), fid.agree,
                              [] if fid.agree else [{"input": fid.first_mismatch}]))
    checks.append({"check": "mass_conservation", "pass": check_mass_conservation(tree)})
    checks.append(_as_bound(check_deficiency_fact(tree), "deficiency_fact"))
    checks.append(_as_bound(check_tail_bound(tree), "tail_bound"))
    checks.append(_as_bound(check_codim_bound(tree), "codim_bound"))
    thr = codim_threshold(cfg.gamma, cfg.d) if cfg.threshold is None else cfg.threshold
    shaved = shave(tree, cfg.gamma, cfg.d, thr)
    tail = codim_tail(tree, cfg.gamma, cfg.d, thr)
    d = shaved.codim()
    rep = EndToEndReport(cfg, "closure", False, checks, tail=tail, codim=d)
    try:
        cl = protocol_closures(inst, shaved, cfg.alpha, cfg.beta, cfg.r, strict=cfg.strict)
    except HypothesisError as exc:
        rep.refused = True
        checks.append({"check": "closure_hypothesis", "pass": False, "reason": str(exc)})
        return rep
    for side, g, t, fam in (("X", inst.g1, cl.tree_x, cl.cl_x), ("Y", inst.g2, cl.tree_y, cl.cl_y)):
        v = verify_closure(g, t, fam)
        checks.append({"check": f"closure_{side}", **v.as_dict()})
    an = leaf_analysis(inst, shaved, cl)
    checks.append(check_leaf_bound(an, cfg.gamma, cfg.alpha, inst.delta))
    checks.append(check_bad_mass(an, d, cfg.gamma, cfg.alpha, inst.delta))
    checks.append(subcube_error_bound(an, cfg.gamma, cfg.alpha, inst.delta))
    success_pi = 1 - search_error(pi, inst)
    e = exponent(cfg.gamma, cfg.alpha, inst.delta)
    slack = success_pi - tail
    ok = _within(slack, d + 1, e)
    checks.append(BoundReport("end_to_end_chain", {"codim": d}, _pow_str(d + 1, e) + f"+{fmt_frac(tail)}",
                              fmt_frac(success_pi), ok))
    # success(pi) and success(pi~) differ only on the shaved inputs
    checks.append(BoundReport("shave_gap", {}, fmt_frac(tail), fmt_frac(abs(success_pi - an.success)),
                              abs(success_pi - an.success) <= tail))
    rep.stage = "done"
    rep.success_pi, rep.success_tilde = success_pi, an.success
    return rep
