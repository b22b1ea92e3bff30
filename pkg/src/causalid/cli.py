"""Command-line front end.

Exit codes: 0 success (including a SEPARATED/CONNECTED verdict),
1 documented negative verdicts (not identified, corpus failures,
positivity violations), 2 usage or parse errors, 3 internal invariant
breaches.  With ``--json`` a single JSON document goes to stdout and
diagnostics go to stderr.  Output is byte-deterministic for identical
inputs; the only environment variable honored is NO_COLOR (output is
plain text already).
"""

from __future__ import annotations

import argparse
import json
import sys
from itertools import product
from pathlib import Path

from .catalog import catalog as corpus_entries
from .catalog import run_entry, unavailable
from .dsep import connecting_path, d_separated, pattern
from .dsl import ParseError, parse_assignment, parse_graph, parse_model
from .expr import (ExprError, evaluate, free_variables, parse, render,
                   base_name)
from .graph import GraphError, ScaleError
from .identify import (IDENTIFIED, EngineInvariantError, Query, identify)
from .scm import ModelError, PositivityError

SCHEMA = 1


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Failure(2, f"cannot read {path}: {exc.strerror}") from None


def _names(s: str | None) -> tuple[str, ...]:
    if not s:
        return ()
    return tuple(t for t in (x.strip() for x in s.split(",")) if t)


def _emit_json(doc: dict) -> None:
    doc = {"schema": SCHEMA, **doc}
    print(json.dumps(doc, indent=2))


def _fr(x) -> str:
    return str(x)


def _approx(x) -> str:
    return repr(float(x))


# -- dsep ----------------------------------------------------------------

def cmd_dsep(args) -> int:
    g = parse_graph(_read(args.graph))
    if args.cut_incoming or args.cut_outgoing:
        g = g.mutilate(cut_incoming=_names(args.cut_incoming),
                       cut_outgoing=_names(args.cut_outgoing))
    X, Y, Z = _names(args.x), _names(args.y), _names(args.given)
    separated = d_separated(g, X, Y, Z)
    witness = None if separated else connecting_path(g, X, Y, Z)
    if args.json:
        _emit_json({
            "command": "dsep",
            "x": list(X), "y": list(Y), "given": list(Z),
            "separated": separated,
            "witness": None if witness is None else witness.render(),
        })
    elif separated:
        print("SEPARATED")
    else:
        print(f"CONNECTED {witness.render()}")
    return 0


# -- identify --------------------------------------------------------------

def _status_line(res) -> str:
    if res.status == IDENTIFIED:
        return f"IDENTIFIED ({res.budget_spent} steps)"
    if res.status == "not-identified-within-budget":
        return f"NOT-IDENTIFIED-WITHIN-BUDGET ({res.budget_spent})"
    return "KNOWN-NON-IDENTIFIABLE"


def cmd_identify(args) -> int:
    g = parse_graph(_read(args.graph))
    X, Y = _names(args.x), _names(args.y)
    query = Query(g, X, Y)
    res = identify(query, budget=args.budget)
    fmt = "latex" if args.latex else "text"
    if args.json:
        _emit_json({
            "command": "identify",
            "x": list(query.treatment), "y": list(query.outcome),
            "status": res.status,
            "budget_spent": res.budget_spent,
            "formula": None if res.formula is None
            else render(res.formula, fmt),
            "derivation": [s.to_json(i)
                           for i, s in enumerate(res.derivation, 1)],
        })
    else:
        print(f"query: p({','.join(query.outcome)}|"
              f"do({','.join(query.treatment)}))")
        print(f"status: {_status_line(res)}")
        if res.formula is not None:
            print(f"formula: {render(res.formula, fmt)}")
        if res.derivation:
            print("derivation:")
            for i, s in enumerate(res.derivation, 1):
                guard = "" if s.guard is None else f" [{s.guard.render()}]"
                print(f"  {i}. {s.rule}{guard}")
                print(f"     = {render(s.after, fmt)}")
    return 0 if res.status == IDENTIFIED else 1


# -- eval -----------------------------------------------------------------

def _do_items(items):
    fixed, free = {}, []
    for item in items or []:
        if "=" in item:
            fixed.update(parse_assignment([item]))
        else:
            free.append(item)
    return fixed, free


def cmd_eval(args) -> int:
    m = parse_model(_read(args.model))
    g = m.graph
    if not args.formula and not args.do:
        raise _Failure(2, "eval needs --formula or --do")

    fixed, free_do = _do_items(args.do)
    for n, v in fixed.items():
        g.index(n)
        if v not in m.domains[n]:
            raise _Failure(2, f"value {v!r} not in domain of {n!r}")
    for n in free_do:
        g.index(n)
    targets = _names(args.target)
    for n in targets:
        g.index(n)

    formula = None
    if args.formula:
        formula = parse(args.formula)
        fvars = sorted(free_variables(formula))
        axes = [n for n in fvars
                if base_name(n) not in fixed]
        for n in axes:
            g.index(base_name(n))
        if args.check and not (args.do and targets):
            raise _Failure(2, "--check on a formula needs --do and "
                           "--target to name the oracle quantity")
    else:
        if not targets:
            raise _Failure(2, "--do needs --target")
        if len(fixed) + len(free_do) != 1:
            raise _Failure(2, "eval --do takes exactly one intervention "
                           "variable")
        axes = []

    do_vars = list(fixed) + free_do
    axis_vars = free_do + [t for t in targets] + \
        [n for n in (axes if formula else []) if base_name(n) not in
         set(free_do) | set(targets) | set(fixed)]

    rows = []
    doms = [m.domains[base_name(v)] for v in axis_vars]
    for combo in product(*doms):
        binding = dict(fixed)
        binding.update({v: c for v, c in zip(axis_vars, combo)})
        do_assign = {n: binding[n] for n in do_vars}
        if formula is not None:
            value = evaluate(formula, m, binding)
        else:
            jd = m.do_marginal(do_assign, targets)
            value = jd.p({t: binding[t] for t in targets})
        row = {"binding": {v: binding[v] for v in
                           list(fixed) + axis_vars},
               "exact": _fr(value), "approx": float(value)}
        if args.check:
            if formula is not None:
                oracle = m.do_marginal(do_assign, targets) \
                    .p({t: binding[t] for t in targets})
            else:
                # independent route: truncated product factorization
                (var, val), = do_assign.items()
                oracle = m.truncated(var, val).marginal(targets) \
                    .p({t: binding[t] for t in targets})
            row["check_diff"] = _fr(value - oracle)
        rows.append(row)

    if args.json:
        _emit_json({"command": "eval", "rows": rows})
    else:
        for row in rows:
            label = " ".join(f"{k}={v}" for k, v in row["binding"].items())
            line = f"{label}: {row['exact']} = {row['approx']!r}"
            if "check_diff" in row:
                line += f"  check-diff: {row['check_diff']}"
            print(line)
    return 0


# -- equiv / pattern ---------------------------------------------------------

def cmd_equiv(args) -> int:
    g1 = parse_graph(_read(args.graph_a))
    g2 = parse_graph(_read(args.graph_b))
    if set(g1.names) != set(g2.names):
        raise _Failure(2, "graphs are over different variable sets")
    sk1, sk2 = g1.skeleton(), g2.skeleton()
    vs1, vs2 = g1.v_structures(), g2.v_structures()
    equivalent = sk1 == sk2 and vs1 == vs2
    detail = ""
    if not equivalent:
        if sk1 != sk2:
            only = sorted(sk1 ^ sk2)
            where = args.graph_a if only[0] in sk1 else args.graph_b
            detail = f"skeleton edge {only[0][0]}-{only[0][1]} " \
                     f"only in {where}"
        else:
            only = sorted(vs1 ^ vs2)
            where = args.graph_a if only[0] in vs1 else args.graph_b
            detail = f"v-structure ({','.join(only[0])}) only in {where}"
    if args.json:
        _emit_json({"command": "equiv", "equivalent": equivalent,
                    "detail": detail})
    else:
        print("EQUIVALENT" if equivalent else f"DISTINCT {detail}")
    return 0


def cmd_pattern(args) -> int:
    g = parse_graph(_read(args.graph))
    pat = pattern(g)
    directed = [f"{a}->{b}" for a, b in pat.directed]
    undirected = [f"{a}-{b}" for a, b in pat.undirected]
    if args.json:
        _emit_json({"command": "pattern",
                    "directed": [list(e) for e in pat.directed],
                    "undirected": [list(e) for e in pat.undirected]})
    else:
        print("  ".join(directed + undirected) if (directed or undirected)
              else "(no edges)")
    return 0


# -- corpus -----------------------------------------------------------------

def cmd_corpus(args) -> int:
    entries = corpus_entries()
    if args.filter:
        entries = tuple(e for e in entries if args.filter in e.name)
    if args.list:
        if args.json:
            _emit_json({
                "command": "corpus",
                "entries": [{
                    "name": e.name,
                    "nodes": len(e.graph.names),
                    "latent": len(e.graph.latent_names),
                    "treatment": list(e.treatment),
                    "outcome": list(e.outcome),
                    "expectation": e.expectation.kind,
                    "reconstructed": e.reconstructed,
                    "description": e.description,
                } for e in entries],
                "unavailable": [{"name": n, "note": note}
                                for n, note in unavailable()],
            })
        else:
            for e in entries:
                flags = " [reconstructed]" if e.reconstructed else ""
                print(f"{e.name}: {len(e.graph.names)} nodes "
                      f"({len(e.graph.latent_names)} latent), "
                      f"expect {e.expectation.kind}{flags}")
            print("unavailable:")
            for n, note in unavailable():
                print(f"  {n}: {note}")
        return 0

    results = [(e.name, *run_entry(e)) for e in entries]
    failures = [r for r in results if not r[1]]
    if args.json:
        _emit_json({
            "command": "corpus",
            "results": [{"name": n, "passed": ok, "detail": d}
                        for n, ok, d in results],
            "passed": len(results) - len(failures),
            "failed": len(failures),
        })
    else:
        for n, ok, d in results:
            print(f"{'PASS' if ok else 'FAIL'} {n}: {d}")
        print(f"{len(results) - len(failures)}/{len(results)} passed")
    return 1 if failures else 0


# -- entry point --------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="causalid",
        description="Causal identifiability engine: d-separation, "
                    "adjustment criteria, do-calculus rewriting, exact "
                    "discrete-model evaluation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dsep", help="decide d-separation on a graph file")
    p.add_argument("graph")
    p.add_argument("--x", required=True, help="comma-separated variables")
    p.add_argument("--y", required=True)
    p.add_argument("--given", default="")
    p.add_argument("--cut-incoming", default="",
                   help="drop edges into these nodes first")
    p.add_argument("--cut-outgoing", default="",
                   help="drop edges out of these nodes first")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_dsep)

    p = sub.add_parser("identify",
                       help="derive a do-free formula for p(y|do(x))")
    p.add_argument("graph")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--budget", type=int, default=16)
    p.add_argument("--latex", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("eval", help="evaluate formulas or interventional "
                                    "marginals on a model file")
    p.add_argument("model")
    p.add_argument("--formula", help="expression in the text grammar")
    p.add_argument("--do", action="append", default=[],
                   metavar="VAR[=VALUE]",
                   help="intervention; bare VAR iterates its domain")
    p.add_argument("--target", default="", help="comma-separated outcomes")
    p.add_argument("--check", action="store_true",
                   help="also run the graph-surgery oracle and print the "
                        "difference")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("equiv", help="observational equivalence of two "
                                     "graph files")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("pattern", help="equivalence-class pattern of a "
                                       "graph file")
    p.add_argument("graph")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("corpus", help="list or run the built-in diagram "
                                      "corpus")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--list", action="store_true")
    mode.add_argument("--run", action="store_true")
    p.add_argument("--filter", default="",
                   help="substring filter on entry names")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_corpus)

    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except PositivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, GraphError, ExprError, ModelError,
            ScaleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
