"""Command-line front end.  Reports go to stdout as JSON lines; a short summary goes to stderr.

Exit status: 0 when every check passes, 1 when a check fails, 2 on bad
arguments or configuration.  ``SEARCHLAB_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bigraph import BipartiteGraph, ExpanderParams, check_expansion, expansion_rate_experiment, random_graph
from .bounds import EndToEndConfig, end_to_end
from .closure import (HypothesisError, build_closure, greedy_expander, random_label_tree,
                      verify_closure)
from .cnf import (CapacityError, Cnf, DimacsError, InvalidConfig, SamplerConfig, count_satisfying, read_dimacs,
                  sample_cnf, write_dimacs)
from .concentration import ADVERSARIES, ConcentrationConfig, concentration_experiment
from .conversion import (check_codim_bound, check_deficiency_fact, check_fidelity, check_mass_conservation,
                         check_tail_bound, codim_tail, convert)
from .partition import balanced_partition, bipartite_instance, check_good_partition, random_partition
from .protocol import FAMILIES, RandomProtocolConfig, baseline_protocol, random_protocol, search_error
from .report import emit
from .util import fmt_frac, make_rng

SEED_ENV = "SEARCHLAB_SEED"
VERIFY_IDS = ("drp", "conversion", "codim-tail", "steps", "closure", "expansion", "partition", "concentration",
              "leaf-bounds", "identity", "tooling")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _formula_args(p, m_default=None):
    p.add_argument("--in", dest="input", type=Path, help="DIMACS file (otherwise a random formula is drawn)")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--delta", type=int, default=4)
    p.add_argument("--m", type=int, default=m_default)


def build_parser() -> argparse.ArgumentParser:
    seed = _default_seed()
    ap = _Parser(prog="searchlab", description="Falsified-clause search toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-cnf", help="sample a random Delta-CNF")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--density", type=_frac, help="m = density * n when --m is absent")
    p.add_argument("-o", "--out", type=Path)
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("check-unsat", help="count satisfying assignments by brute force")
    _formula_args(p, 64)
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("expansion", help="certify one incidence graph or estimate the expander rate")
    _formula_args(p, 48)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--alpha", type=_frac, default=Fraction(3, 4))
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("partition", help="check a random variable split for goodness")
    _formula_args(p, 48)
    p.add_argument("--delta-frac", type=_frac, default=Fraction(1, 10))
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--mc-trials", type=int, default=20000)
    p.add_argument("--seed", type=int, default=seed)

    for name, hlp in (("protocol-run", "run a protocol on the split instance"),
                      ("convert", "convert a protocol and run the per-step checks")):
        p = sub.add_parser(name, help=hlp)
        _formula_args(p, 32)
        p.add_argument("--depth", type=int, default=4)
        p.add_argument("--family", choices=FAMILIES + ("baseline",), default="xor")
        p.add_argument("--gamma", type=_frac, default=Fraction(1, 2))
        p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("closure", help="closures of a certified expander along a random label tree")
    p.add_argument("--graph", type=Path, help="graph JSON (otherwise one is generated)")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--delta", type=int, default=29)
    p.add_argument("--m", type=int, default=12)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--alpha", type=_frac, default=Fraction(3, 4))
    p.add_argument("--beta", type=_frac, default=Fraction(3, 8))
    p.add_argument("--nodes", type=int, default=12)
    p.add_argument("--d", type=int)
    p.add_argument("--no-strict", action="store_true")
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("verify", help="run one acceptance suite")
    p.add_argument("lemma", choices=VERIFY_IDS)
    p.add_argument("--trials", type=int, help="corpus size (suite default otherwise)")
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=_frac)
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("end-to-end", help="convert, shave, close and check the final chain")
    _formula_args(p, 32)
    p.add_argument("--gamma", type=_frac, default=Fraction(1, 2))
    p.add_argument("--alpha", type=_frac)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--d", type=int, help="shaving parameter (defaults to the depth)")
    p.add_argument("--family", choices=FAMILIES + ("baseline",), default="xor")
    p.add_argument("--fit-hypothesis", action="store_true",
                   help="shave down to the largest codimension the closure hypothesis admits")
    p.add_argument("--no-strict", action="store_true")
    p.add_argument("--seed", type=int, default=seed)

    p = sub.add_parser("concentration", help="Monte-Carlo tail of adaptive exponential-tailed sums")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--zeta", type=float, default=1.0)
    p.add_argument("--adversary", choices=ADVERSARIES + ("all",), default="all")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=seed)
    return ap


def _config(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, Fraction):
            v = fmt_frac(v)
        out[k] = v
    return out


def _formula(args) -> Cnf:
    if args.input is not None:
        return read_dimacs(args.input.read_bytes())
    return sample_cnf(SamplerConfig(args.n, args.delta, args.m, seed=args.seed))


def _instance(args):
    cnf = _formula(args)
    part = balanced_partition(cnf.n, args.seed)
    return cnf, part, bipartite_instance(cnf, part, Fraction(1, 10))


def _protocol(args, inst):
    if args.family == "baseline":
        return baseline_protocol(inst)
    return random_protocol(RandomProtocolConfig(inst.n, args.depth, args.family, labels="greedy", seed=args.seed),
                           inst=inst)


def cmd_gen_cnf(args):
    cfg = SamplerConfig(args.n, args.delta, args.m, density_alpha=args.density, seed=args.seed)
    cnf = sample_cnf(cfg)
    data = write_dimacs(cnf)
    rec = {"check": "gen-cnf", "pass": True, "n": cnf.n, "delta": cnf.delta, "m": cnf.m, "seed": args.seed}
    if args.out is not None:
        args.out.write_bytes(data)
        Path(str(args.out) + ".json").write_text(cnf.to_json())
        rec["dimacs"] = str(args.out)
        rec["sidecar"] = str(args.out) + ".json"
    else:
        rec["dimacs"] = data.decode()
    return [rec], f"sampled {cnf.m} clauses of width {cnf.delta} over {cnf.n} variables"


def cmd_check_unsat(args):
    cnf = _formula(args)
    sat = count_satisfying(cnf)
    rec = {"check": "unsat", "pass": sat == 0, "n": cnf.n, "m": cnf.m, "satisfying": sat}
    return [rec], f"{sat} satisfying assignments"


def cmd_expansion(args):
    p = ExpanderParams(args.r, args.delta, args.alpha)
    if args.trials:
        est = expansion_rate_experiment(args.n, args.delta, args.m, ExpanderParams(args.r, args.delta,
                                                                                   args.alpha, 1 - args.alpha),
                                        args.trials, args.seed)
        return [{"check": "expansion_rate", "pass": True, **est.as_dict()}], f"certified {est.successes}/{est.trials}"
    if args.input is not None:
        cnf = read_dimacs(args.input.read_bytes())
        g = BipartiteGraph(cnf.m, cnf.n, tuple(cnf.var_mask(i) for i in range(cnf.m)), cnf.delta)
    else:
        g = random_graph(args.n, args.delta, args.m, make_rng(args.seed))
    rep = check_expansion(g, ExpanderParams(min(p.r, g.m), g.delta, args.alpha))
    witness = None
    if rep.witness is not None:
        witness = {"set": list(rep.witness[0]), "neighbours": rep.witness[1]}
    rec = {"check": "expansion", "pass": rep.is_expander, "checked_sets": rep.checked_sets, "witness": witness}
    return [rec], "expander" if rep.is_expander else f"not an expander: {witness}"


def cmd_partition(args):
    cnf = _formula(args)
    part = random_partition(cnf.n, args.seed)
    rep = check_good_partition(cnf, part, args.delta_frac, args.r, args.mc_trials, args.seed)
    rec = {"check": "good_partition", **rep.as_dict()}
    return [rec], "good" if rep.passed else "not good"


def cmd_protocol_run(args):
    _, _, inst = _instance(args)
    pi = _protocol(args, inst)
    err = search_error(pi, inst)
    rec = {"check": "protocol_run", "pass": True, "n": inst.n, "m": inst.m, "depth": pi.depth(),
           "error": err, "success": 1 - err}
    return [rec], f"error {fmt_frac(err)} at depth {pi.depth()}"


def cmd_convert(args):
    _, _, inst = _instance(args)
    pi = _protocol(args, inst)
    tree = convert(pi, args.gamma)
    fid = check_fidelity(tree)
    d = pi.depth()
    recs = [{"check": "fidelity", "pass": fid.agree, "mismatches": fid.mismatches,
             "witness": fid.first_mismatch},
            {"check": "mass_conservation", "pass": check_mass_conservation(tree)},
            check_deficiency_fact(tree).as_dict(), check_tail_bound(tree).as_dict(),
            check_codim_bound(tree).as_dict(),
            {"check": "codim_tail", "pass": True, "d": d, "tail": codim_tail(tree, args.gamma, d),
             "nodes": len(tree.nodes)}]
    return recs, f"{len(tree.nodes)} conversion nodes"


def cmd_closure(args):
    if args.graph is not None:
        g = BipartiteGraph.from_json(args.graph.read_text())
    else:
        g = greedy_expander(args.m, args.n, args.delta, args.r, args.alpha, make_rng(args.seed), attempts=5000)
        if g is None:
            raise InvalidConfig("could not generate a certified expander with these parameters")
    d = args.d
    if d is None:
        d = int((args.alpha - args.beta) ** 2 * args.r * g.delta / 4)
    tree = random_label_tree(g.n, args.nodes, d, make_rng(args.seed, 1))
    fam = build_closure(g, tree, args.alpha, args.beta, args.r, strict=not args.no_strict)
    rep = verify_closure(g, tree, fam)
    rec = {"check": "closure", "d": tree.d(), "hypothesis": fam.hypothesis_ok, "family": fam.to_json(),
           **rep.as_dict()}
    return [rec], "closure verified" if rep.passed else "closure failed"


def cmd_verify(args):
    from . import experiments as ex

    kw = {"seed": args.seed}
    lemma = args.lemma
    size_key = {"drp": "trials", "conversion": "count", "codim-tail": "count", "steps": "count",
                "closure": "count", "expansion": "trials", "partition": "pairs", "concentration": "trials",
                "leaf-bounds": "count", "identity": "count", "tooling": "count"}[lemma]
    if args.trials is not None:
        kw[size_key] = args.trials
    if args.n is not None and lemma in ("drp", "conversion", "codim-tail", "steps", "expansion"):
        kw["n"] = args.n
    if args.gamma is not None:
        if lemma == "drp":
            kw["gammas"] = (args.gamma,)
        elif lemma in ("conversion", "codim-tail", "steps"):
            kw["gamma"] = args.gamma
    suite = ex.SUITES["conversion" if lemma in ("codim-tail", "steps") else lemma]
    res = suite(**kw)
    rec = res.as_dict()
    if lemma == "conversion":
        rec["pass"] = res.summary["fidelity"] and res.summary["mass"]
    elif lemma == "codim-tail":
        rec["pass"] = res.summary["codim_tail"]
    elif lemma == "steps":
        rec["pass"] = res.summary["steps"]
    rec["check"] = lemma
    return [rec], f"{lemma}: {'pass' if rec['pass'] else 'FAIL'}"


def cmd_end_to_end(args):
    _, _, inst = _instance(args)
    pi = _protocol(args, inst)
    alpha = args.gamma if args.alpha is None else args.alpha
    d = pi.depth() if args.d is None else args.d
    thr = None
    if args.fit_hypothesis:
        from .conversion import codim_threshold

        thr = min(codim_threshold(args.gamma, d), Fraction(int((alpha / 2) ** 2 * args.r * inst.delta / 4)))
    rep = end_to_end(inst, pi, EndToEndConfig(args.gamma, alpha, alpha / 2, args.r, d, thr,
                                              strict=not args.no_strict))
    msg = "refused at the closure stage" if rep.refused else ("chain holds" if rep.passed else "chain FAILS")
    return [rep.as_dict()], msg


def cmd_concentration(args):
    advs = ADVERSARIES if args.adversary == "all" else (args.adversary,)
    recs = [concentration_experiment(ConcentrationConfig(args.n, args.zeta, a, args.trials, args.seed)).as_dict()
            for a in advs]
    return recs, ", ".join(f"{r['params']['adversary']}={r['measured']:.3g}" for r in recs)


COMMANDS = {
    "gen-cnf": cmd_gen_cnf,
    "check-unsat": cmd_check_unsat,
    "expansion": cmd_expansion,
    "partition": cmd_partition,
    "protocol-run": cmd_protocol_run,
    "convert": cmd_convert,
    "closure": cmd_closure,
    "verify": cmd_verify,
    "end-to-end": cmd_end_to_end,
    "concentration": cmd_concentration,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        stderr.write(str(exc))
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        records, message = COMMANDS[args.command](args)
    except (InvalidConfig, DimacsError, CapacityError, OSError) as exc:
        stderr.write(f"searchlab {args.command}: {exc}\n")
        return 2
    except HypothesisError as exc:
        emit(stdout, args.command, _config(args), [{"check": "closure_hypothesis", "pass": False,
                                                    "refused": True, "reason": str(exc)}])
        stderr.write(f"refused: {exc}\n")
        return 1
    emit(stdout, args.command, _config(args), records)
    stderr.write(message + "\n")
    return 0 if all(r.get("pass", True) for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
