"""Suite runners: each builds a seeded corpus, runs the exact checks, and summarises pass/fail.

The defaults are the full-size corpora; smaller sizes are handy for
smoke runs from the command line.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bigraph import BipartiteGraph, ExpanderParams, expansion_rate_experiment
from .bounds import EndToEndConfig, check_success_identity, end_to_end, leaf_analysis
from .closure import build_closure, greedy_expander, mutate_family, random_label_tree, verify_closure
from .cnf import Cnf, SamplerConfig, read_dimacs, sample_cnf, write_dimacs
from .concentration import ADVERSARIES, ConcentrationConfig, concentration_experiment
from .conversion import (check_codim_bound, check_deficiency_fact, check_fidelity, check_mass_conservation,
                         check_tail_bound, codim_tail, codim_threshold, convert, h_tail, shave)
from .partition import (BipartiteInstance, balanced_partition, binary_entropy, bipartite_instance,
                        check_good_partition, random_partition)
from .protocol import (FAMILIES, ProtocolTree, RandomProtocolConfig, leaf_masses, random_protocol,
                       search_error)
from .structure import DrpAssertion, density_restoring_partition
from .util import fmt_frac, make_rng

GAMMAS = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


@dataclass
class SuiteResult:
    name: str
    passed: bool
    summary: dict
    records: list = field(default_factory=list)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"check": self.name, "pass": self.passed, **self.summary}


def random_subset(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random subset of {0,1}^n of varied density; a third are planted near subcubes."""
    size = 1 << n
    kind = int(rng.integers(0, 3))
    density = 2.0 ** -float(rng.uniform(0, 7))
    X = rng.random(size) < density
    if kind == 2:
        k = int(rng.integers(1, n // 2 + 1))
        coords = rng.choice(n, size=k, replace=False)
        vals = rng.integers(0, 2, size=k)
        xs = np.arange(size)
        cube = np.ones(size, bool)
        for c, v in zip(coords, vals):
            cube &= ((xs >> int(c)) & 1) == v
        X = cube & (rng.random(size) < max(density * 4, 0.5))
    if not X.any():
        X[int(rng.integers(0, size))] = True
    return X


def drp_suite(trials: int = 200, n: int = 10, gammas=GAMMAS, seed: int = 1, varied: bool = True) -> SuiteResult:
    """Half-density random subsets, plus (``varied``) as many sparse or planted ones."""
    t0 = time.perf_counter()
    fails, parts, worst = [], 0, math.inf
    sets = [make_rng(seed, t).random(1 << n) < 0.5 for t in range(trials)]
    if varied:
        sets += [random_subset(n, make_rng(seed, t, 1)) for t in range(trials)]
    for t, X in enumerate(sets):
        if not X.any():
            X[0] = True
        for g in gammas:
            try:
                res = density_restoring_partition(X, g, n, check=True)
            except DrpAssertion as exc:
                fails.append({"trial": t, "gamma": fmt_frac(g), "error": str(exc)})
                continue
            parts += len(res.parts)
            worst = min(worst, res.slack)
            cover = np.zeros(X.shape, np.int64)
            for p in res.parts:
                cover += p.X
            if not np.array_equal(cover, X.astype(np.int64)):
                fails.append({"trial": t, "gamma": fmt_frac(g), "error": "parts do not partition X"})
    dt = time.perf_counter() - t0
    summary = {"trials": trials, "sets": len(sets), "n": n, "parts": parts, "worst_entropy_slack": worst, "failures": len(fails),
               "witnesses": fails[:10]}
    return SuiteResult("drp", not fails, summary, seconds=dt)


def protocol_corpus(count: int = 100, n: int = 8, max_depth: int = 5, seed: int = 2) -> list[ProtocolTree]:
    out = []
    for k in range(count):
        depth = 1 + k % max_depth
        fam = FAMILIES[(k // max_depth) % len(FAMILIES)]
        out.append(random_protocol(RandomProtocolConfig(n, depth, fam, "random", seed=seed * 100003 + k), m=8))
    return out


def conversion_suite(count: int = 100, n: int = 8, max_depth: int = 5, gamma=Fraction(1, 2),
                     seed: int = 2) -> SuiteResult:
    """Fidelity, exact codimension tail, per-step checks and mass conservation on one corpus."""
    t0 = time.perf_counter()
    gamma = Fraction(gamma)
    flags = {"fidelity": True, "codim_tail": True, "steps": True, "mass": True}
    rows, worst = [], {"deficiency": math.inf, "tail": math.inf, "codim": math.inf}
    max_codim = 0
    for k, pi in enumerate(protocol_corpus(count, n, max_depth, seed)):
        d = pi.depth()
        tree = convert(pi, gamma)
        fid = check_fidelity(tree)
        tail = codim_tail(tree, gamma, d)
        htail = h_tail(tree, d)
        bound = math.exp(-d)
        fact, tb, cb = check_deficiency_fact(tree), check_tail_bound(tree), check_codim_bound(tree)
        mass = check_mass_conservation(tree)
        max_codim = max(max_codim, max(c.codim for c in tree.nodes))
        worst["deficiency"] = min(worst["deficiency"], fact.worst_slack)
        worst["tail"] = min(worst["tail"], tb.worst_slack)
        worst["codim"] = min(worst["codim"], cb.worst_slack)
        row = {"protocol": k, "depth": d, "nodes": len(tree.nodes), "fidelity": fid.agree,
               "codim_tail": fmt_frac(tail), "h_tail": fmt_frac(htail), "bound": bound,
               "threshold": fmt_frac(codim_threshold(gamma, d)), "deficiency_fact": fact.passed,
               "tail_bound": tb.passed, "codim_bound": cb.passed, "mass": mass}
        rows.append(row)
        flags["fidelity"] &= fid.agree
        flags["codim_tail"] &= float(tail) <= bound and float(htail) <= bound
        flags["steps"] &= fact.passed and tb.passed and cb.passed
        flags["mass"] &= mass
    dt = time.perf_counter() - t0
    summary = {"count": count, "n": n, "gamma": fmt_frac(gamma), **flags, "max_codim": max_codim,
               "worst_slack": worst, "failing": [r for r in rows if not (r["fidelity"] and r["deficiency_fact"]
                                                                       and r["tail_bound"] and r["codim_bound"]
                                                                       and r["mass"])][:10]}
    return SuiteResult("conversion", all(flags.values()), summary, rows, dt)


CLOSURE_POOL = ((1, 29, 12), (1, 29, 20), (2, 15, 5), (3, 10, 5), (4, 8, 4), (2, 15, 6), (1, 30, 16))


def closure_instance(k: int, n: int = 30, alpha=Fraction(3, 4), seed: int = 3,
                     pool=CLOSURE_POOL) -> tuple[BipartiteGraph, int]:
    """k-th certified expander of the closure corpus and its r; retries seeds until one is found."""
    r, delta, m = pool[k % len(pool)]
    for s in range(200):
        g = greedy_expander(m, n, delta, r, alpha, make_rng(seed, k, s), attempts=3000)
        if g is not None:
            return g, r
    raise RuntimeError(f"no certified expander for {(r, delta, m)}")


def closure_suite(count: int = 50, n: int = 30, alpha=Fraction(3, 4), beta=Fraction(3, 8), nodes: int = 12,
                  seed: int = 3) -> SuiteResult:
    t0 = time.perf_counter()
    alpha, beta = Fraction(alpha), Fraction(beta)
    passed = applied = detected = 0
    rows = []
    for k in range(count):
        g, r = closure_instance(k, n, alpha, seed)
        d = math.floor((alpha - beta) ** 2 * r * g.delta / 4)
        rng = make_rng(seed, k, 0xC1)
        tree = random_label_tree(n, nodes, d, rng)
        fam = build_closure(g, tree, alpha, beta, r)
        rep = verify_closure(g, tree, fam)
        passed += rep.passed
        muts = {}
        for kind in ("inflate-root", "parent-only", "drop"):
            bad = mutate_family(fam, tree, kind, rng, g.m)
            if bad is None:
                continue
            applied += 1
            caught = not verify_closure(g, tree, bad).passed
            detected += caught
            muts[kind] = caught
        rows.append({"instance": k, "m": g.m, "Delta": g.delta, "r": r, "d": d, "pass": rep.passed,
                     "closure_sizes": [bin(t).count("1") for t in fam.T], "mutations": muts})
    dt = time.perf_counter() - t0
    summary = {"count": count, "verified": passed, "mutations": applied, "detected": detected}
    ok = passed == count and applied > 0 and detected == applied
    return SuiteResult("closure", ok, summary, rows, dt)


def expansion_suite(trials: int = 500, n: int = 24, delta: int = 4, m: int = 48, r: int = 3,
                    eta=Fraction(1, 4), target: float = 0.9, seed: int = 4) -> SuiteResult:
    t0 = time.perf_counter()
    p = ExpanderParams(r, delta, 1 - Fraction(eta), Fraction(eta))
    est = expansion_rate_experiment(n, delta, m, p, trials, seed)
    dt = time.perf_counter() - t0
    summary = {"n": n, "Delta": delta, "m": m, "r": r, "eta": fmt_frac(eta), "target": target, **est.as_dict()}
    return SuiteResult("expansion", est.frequency >= target, summary, seconds=dt)


def partition_suite(pairs: int = 200, n: int = 24, delta_w: int = 4, m: int = 48, delta=Fraction(1, 10),
                    r: int = 3, target: float = 0.8, seed: int = 5) -> SuiteResult:
    t0 = time.perf_counter()
    ok, sizes_a, sizes_b, rows = 0, [], [], []
    for k in range(pairs):
        cnf = sample_cnf(SamplerConfig(n, delta_w, m, seed=seed * 100003 + k))
        part = random_partition(n, seed * 100003 + k)
        rep = check_good_partition(cnf, part, delta, r, seed=k)
        ok += rep.passed
        sizes_a.append(len(rep.error_A))
        sizes_b.append(len(rep.error_B))
        rows.append(rep.as_dict())
    bound = m * 2.0 ** (-(1 - binary_entropy(delta)) * delta_w)
    means = []
    for s in (sizes_a, sizes_b):
        a = np.asarray(s, float)
        se = a.std(ddof=1) / math.sqrt(a.size) if a.size > 1 else 0.0
        means.append((float(a.mean()), se))
    err_ok = all(mu <= bound + 3 * se for mu, se in means)
    rate = ok / pairs
    dt = time.perf_counter() - t0
    summary = {"pairs": pairs, "r": r, "pass_rate": rate, "target": target, "error_bound": bound,
               "error_mean_A": means[0][0], "error_se_A": means[0][1], "error_mean_B": means[1][0],
               "error_se_B": means[1][1], "error_ok": err_ok,
               "c_implied": delta_w / math.log2(n)}
    return SuiteResult("partition", rate >= target and err_ok, summary, rows, dt)


def concentration_suite(ns=(3, 4, 5, 6), zetas=(math.log(2), 1.0, 2.0), trials: int = 1_000_000,
                        adversaries=ADVERSARIES, seed: int = 6) -> SuiteResult:
    t0 = time.perf_counter()
    rows = []
    for n in ns:
        for z in zetas:
            for a in adversaries:
                rows.append(concentration_experiment(ConcentrationConfig(n, z, a, trials, seed)))
    dt = time.perf_counter() - t0
    bad = [r.as_dict() for r in rows if not r.passed]
    summary = {"configs": len(rows), "trials": trials, "failures": len(bad), "witnesses": bad[:10]}
    return SuiteResult("concentration", not bad, summary, [r.as_dict() for r in rows], dt)


def expander_instance(k: int, n: int, delta: int, m: int, r: int, alpha, seed: int) -> BipartiteInstance:
    """Instance whose two sides are certified (r, Delta, alpha*Delta)-expanders, with random signs."""
    for s in range(200):
        rng = make_rng(seed, k, s)
        g1 = greedy_expander(m, n, delta, r, alpha, rng)
        g2 = greedy_expander(m, n, delta, r, alpha, rng)
        if g1 is not None and g2 is not None:
            return BipartiteInstance.from_graphs(g1, g2, signs_seed=seed * 7919 + k)
    raise RuntimeError("no certified expander pair")


def leaf_bound_suite(count: int = 40, delta: int = 8, m: int = 6, r: int = 1, depth: int = 4,
                     seed: int = 7, diagnostic: bool = True) -> SuiteResult:
    """End-to-end chain on expander instances with gamma = alpha.

    Shaving uses the smaller of 7d/(1-gamma) and the largest codimension the
    closure hypothesis admits, so every instance is accepted.  The optional
    diagnostic reruns without shaving to the hypothesis (non-strict).
    """
    t0 = time.perf_counter()
    rows, bad, accepted, diag = [], [], 0, []
    for k in range(count):
        n = (8, 10)[k % 2]
        g = (Fraction(1, 4), Fraction(1, 2))[(k // 2) % 2]
        fam = ("xor", "balanced-random")[(k // 4) % 2]
        inst = expander_instance(k, n, delta, m, r, g, seed)
        pi = random_protocol(RandomProtocolConfig(n, depth, fam, "random", "greedy", seed * 100003 + k), inst=inst)
        hyp_max = math.floor((g / 2) ** 2 * r * delta / 4)
        thr = min(codim_threshold(g, depth), Fraction(hyp_max))
        rep = end_to_end(inst, pi, EndToEndConfig(g, g, g / 2, r, depth, thr))
        rec = rep.as_dict()
        rec["instance"] = k
        rows.append(rec)
        if not rep.refused:
            accepted += 1
        if not rep.passed:
            bad.append({"instance": k, "checks": [c for c in rec["checks"] if not c.get("pass", True)]})
        if diagnostic:
            loose = end_to_end(inst, pi, EndToEndConfig(g, g, g / 2, r, depth, None, strict=False))
            d = loose.as_dict()
            diag.append({"instance": k, "codim": loose.codim, "pass": loose.passed,
                         "failing": [c["check"] for c in d["checks"] if not c.get("pass", True)]})
    dt = time.perf_counter() - t0
    summary = {"count": count, "accepted": accepted, "violations": len(bad), "witnesses": bad[:5],
               "beyond_hypothesis": {"runs": len(diag), "all_pass": sum(x["pass"] for x in diag),
                                     "failing": [x for x in diag if not x["pass"]][:5]}}
    return SuiteResult("leaf_bounds", not bad and accepted == count, summary, rows, dt)


def identity_suite(count: int = 100, n_vars: int = 16, delta_w: int = 4, m: int = 24, gamma=Fraction(1, 2),
                   seed: int = 8) -> SuiteResult:
    """Leaf-average success equals enumeration; masses are conserved; on CNF-derived instances."""
    t0 = time.perf_counter()
    bad, checked = [], 0
    for k in range(count):
        s = seed * 100003 + k
        cnf = sample_cnf(SamplerConfig(n_vars, delta_w, m, seed=s))
        part = balanced_partition(n_vars, s)
        try:
            inst = bipartite_instance(cnf, part, Fraction(1, 10))
        except ValueError:
            continue
        depth = 1 + k % 4
        fam = FAMILIES[k % len(FAMILIES)]
        pi = random_protocol(RandomProtocolConfig(inst.n, depth, fam, "random", seed=s), inst=inst)
        try:
            search_error(pi, inst, exhaustive=True)
        except AssertionError as exc:
            bad.append({"instance": k, "error": str(exc)})
        if sum(leaf_masses(pi).values(), Fraction(0)) != 1:
            bad.append({"instance": k, "error": "protocol leaf masses do not sum to 1"})
        tree = convert(pi, gamma)
        if not check_mass_conservation(tree):
            bad.append({"instance": k, "error": "conversion masses not conserved"})
        for thr in (None, Fraction(1)):
            sh = shave(tree, gamma, depth, thr)
            try:
                an = leaf_analysis(inst, sh, exhaustive=True)
            except AssertionError as exc:
                bad.append({"instance": k, "error": str(exc)})
                continue
            if not check_success_identity(an).passed:
                bad.append({"instance": k, "error": "identity"})
        checked += 1
    dt = time.perf_counter() - t0
    summary = {"count": count, "checked": checked, "violations": len(bad), "witnesses": bad[:10]}
    return SuiteResult("identity", not bad and checked >= count * 9 // 10, summary, seconds=dt)


def tooling_suite(count: int = 20, seed: int = 9) -> SuiteResult:
    """Byte-stable DIMACS/JSON round trips and byte-identical reports for identical seeds."""
    import io

    from .cli import main

    t0 = time.perf_counter()
    bad = []
    for k in range(count):
        cnf = sample_cnf(SamplerConfig(12 + k % 8, 3 + k % 3, 20 + k, seed=seed * 100003 + k))
        d1 = write_dimacs(cnf)
        back = read_dimacs(d1, strict=True)
        if write_dimacs(back) != d1 or back != cnf:
            bad.append({"item": "dimacs", "k": k})
        j1 = cnf.to_json()
        if Cnf.from_json(j1).to_json() != j1:
            bad.append({"item": "cnf-json", "k": k})
        pi = random_protocol(RandomProtocolConfig(4, 3, FAMILIES[k % 3], seed=k), m=cnf.m)
        if ProtocolTree.from_json(pi.to_json()).to_json() != pi.to_json():
            bad.append({"item": "protocol-json", "k": k})
        g = BipartiteGraph(cnf.m, cnf.n, tuple(cnf.var_mask(i) for i in range(cnf.m)), cnf.delta)
        if BipartiteGraph.from_json(g.to_json()).to_json() != g.to_json():
            bad.append({"item": "graph-json", "k": k})
    runs = [
        ["gen-cnf", "--n", "12", "--delta", "3", "--m", "40", "--seed", "7"],
        ["expansion", "--n", "12", "--delta", "3", "--m", "16", "--r", "2", "--trials", "20", "--seed", "1"],
        ["protocol-run", "--n", "12", "--delta", "3", "--m", "30", "--depth", "3", "--seed", "2"],
        ["concentration", "--n", "3", "--zeta", "1", "--trials", "20000", "--seed", "5"],
        ["verify", "drp", "--trials", "3", "--seed", "1"],
    ]
    for argv in runs:
        outs = []
        for _ in range(2):
            buf, err = io.StringIO(), io.StringIO()
            main(argv, stdout=buf, stderr=err)
            outs.append(buf.getvalue())
        if outs[0] != outs[1] or not outs[0]:
            bad.append({"item": "report", "argv": argv})
    dt = time.perf_counter() - t0
    return SuiteResult("tooling", not bad, {"count": count, "runs": len(runs), "failures": bad}, seconds=dt)


SUITES = {
    "drp": drp_suite,
    "conversion": conversion_suite,
    "closure": closure_suite,
    "expansion": expansion_suite,
    "partition": partition_suite,
    "concentration": concentration_suite,
    "leaf-bounds": leaf_bound_suite,
    "identity": identity_suite,
    "tooling": tooling_suite,
}
