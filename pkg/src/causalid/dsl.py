"""Line-oriented text formats for graphs and discrete models.

Graph DSL (UTF-8, one directive per line, ``#`` starts a comment):

    var <name> [latent]
    edge <tail> -> <head>
    arc <a> <-> <b>          # expands to a fresh latent common cause

Model DSL extends the graph DSL:

    domain <var> <v1> <v2> ...
    cpt <var> | <pa>=<val> ... : <p1> <p2> ...

Probabilities are decimal or rational ``a/b`` literals, parsed exactly.
A JSON mirror of the graph format is accepted wherever a graph file is:
``{"vars": [{"name": ..., "latent": bool}], "edges": [[tail, head]]}``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from itertools import product
from typing import Iterable

from .graph import CausalGraph, GraphError, Variable
from .scm import DiscreteModel, Mechanism, ModelError


class ParseError(Exception):
    """Syntax or consistency error, carrying the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _tokens(line: str) -> list[str]:
    return line.split("#", 1)[0].split()


def parse_fraction(tok: str, line: int = 0) -> Fraction:
    try:
        if "/" in tok:
            a, b = tok.split("/", 1)
            return Fraction(int(a), int(b))
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(line, f"bad probability literal {tok!r}") from None


def _scan(text: str):
    """Yield (lineno, tokens) for nonempty lines."""
    for i, raw in enumerate(text.splitlines(), start=1):
        toks = _tokens(raw)
        if toks:
            yield i, toks


def _graph_from_json(text: str) -> CausalGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, f"bad JSON: {exc.msg}") from None
    try:
        variables = [Variable(v["name"], bool(v.get("latent", False)))
                     for v in doc["vars"]]
        edges = [tuple(e) for e in doc.get("edges", [])]
    except (KeyError, TypeError) as exc:
        raise ParseError(1, f"bad graph JSON structure: {exc}") from None
    try:
        return CausalGraph(variables, edges)
    except GraphError as exc:
        raise ParseError(1, str(exc)) from None


def graph_to_json(g: CausalGraph) -> str:
    doc = {
        "vars": [{"name": v.name, "latent": v.latent} for v in g.variables],
        "edges": [[t, h] for t, h in g.edges],
    }
    return json.dumps(doc, indent=2) + "\n"


def graph_to_dsl(g: CausalGraph) -> str:
    lines = []
    for v in g.variables:
        lines.append(f"var {v.name} latent" if v.latent else f"var {v.name}")
    for t, h in g.edges:
        lines.append(f"edge {t} -> {h}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> CausalGraph:
    """Parse the graph DSL (or its JSON mirror, detected by a leading
    brace)."""
    if text.lstrip().startswith("{"):
        return _graph_from_json(text)
    variables: list[Variable] = []
    edges: list[tuple[str, str]] = []
    arcs: list[tuple[int, tuple[str, str]]] = []
    for i, toks in _scan(text):
        kind = toks[0]
        if kind == "var":
            if len(toks) == 2:
                variables.append(Variable(toks[1]))
            elif len(toks) == 3 and toks[2] == "latent":
                variables.append(Variable(toks[1], latent=True))
            else:
                raise ParseError(i, f"bad var directive {' '.join(toks)!r}")
        elif kind == "edge":
            if len(toks) != 4 or toks[2] != "->":
                raise ParseError(i, f"bad edge directive {' '.join(toks)!r}")
            edges.append((toks[1], toks[3]))
        elif kind == "arc":
            if len(toks) != 4 or toks[2] != "<->":
                raise ParseError(i, f"bad arc directive {' '.join(toks)!r}")
            arcs.append((i, (toks[1], toks[3])))
        elif kind in ("domain", "cpt"):
            raise ParseError(i, f"{kind!r} belongs to the model format; "
                             "this parser reads plain graphs")
        else:
            raise ParseError(i, f"unknown directive {kind!r}")
    try:
        return CausalGraph(variables, edges, bidirected=[a for _, a in arcs])
    except GraphError as exc:
        raise ParseError(arcs[0][0] if arcs else 1, str(exc)) from None


def _parse_pa_assignment(toks: list[str], line: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for tok in toks:
        if "=" not in tok:
            raise ParseError(line, f"bad parent assignment token {tok!r}")
        name, value = tok.split("=", 1)
        if not name or not value:
            raise ParseError(line, f"bad parent assignment token {tok!r}")
        if name in out:
            raise ParseError(line, f"parent {name!r} assigned twice")
        out[name] = value
    return out


def parse_model(text: str) -> DiscreteModel:
    """Parse the model DSL: graph directives plus domains and exact
    conditional tables."""
    graph_lines: list[str] = []
    domain_lines: list[tuple[int, list[str]]] = []
    cpt_lines: list[tuple[int, list[str]]] = []
    for i, toks in _scan(text):
        if toks[0] in ("var", "edge", "arc"):
            graph_lines.append(" ".join(toks))
        elif toks[0] == "domain":
            domain_lines.append((i, toks))
        elif toks[0] == "cpt":
            cpt_lines.append((i, toks))
        else:
            raise ParseError(i, f"unknown directive {toks[0]!r}")
    g = parse_graph("\n".join(graph_lines))

    domains: dict[str, tuple[str, ...]] = {}
    for i, toks in domain_lines:
        if len(toks) < 4:
            raise ParseError(i, "domain needs a variable and at least "
                             "two values")
        name, values = toks[1], tuple(toks[2:])
        if name not in g.names:
            raise ParseError(i, f"unknown variable {name!r}")
        if name in domains:
            raise ParseError(i, f"duplicate domain for {name!r}")
        if len(set(values)) != len(values):
            raise ParseError(i, f"repeated value in domain of {name!r}")
        domains[name] = values

    missing = [n for n in g.names if n not in domains]
    if missing:
        raise ParseError(1, f"no domain declared for {missing[0]!r}")

    rows: dict[str, dict[tuple, tuple]] = {n: {} for n in g.names}
    parent_order: dict[str, tuple[str, ...]] = {
        n: g.ordered(g.parents(n)) for n in g.names}
    for i, toks in cpt_lines:
        if len(toks) < 2:
            raise ParseError(i, "bad cpt directive")
        name = toks[1]
        if name not in g.names:
            raise ParseError(i, f"unknown variable {name!r}")
        rest = toks[2:]
        if rest and rest[0] == "|":
            rest = rest[1:]
        if ":" not in rest:
            raise ParseError(i, "cpt needs a ':' before the probabilities")
        sep = rest.index(":")
        pa_assign = _parse_pa_assignment(rest[:sep], i)
        probs = [parse_fraction(t, i) for t in rest[sep + 1:]]
        expected = parent_order[name]
        if set(pa_assign) != set(expected):
            raise ParseError(
                i, f"cpt for {name!r} must assign exactly its parents "
                f"{list(expected)}, got {sorted(pa_assign)}")
        for p, v in pa_assign.items():
            if v not in domains[p]:
                raise ParseError(i, f"value {v!r} not in domain of {p!r}")
        key = tuple(pa_assign[p] for p in expected)
        if key in rows[name]:
            raise ParseError(i, f"duplicate cpt row for {name!r} at "
                             f"{dict(pa_assign)}")
        if len(probs) != len(domains[name]):
            raise ParseError(
                i, f"cpt row for {name!r} has {len(probs)} probabilities, "
                f"domain has {len(domains[name])} values")
        if sum(probs) != 1:
            raise ParseError(i, f"cpt row for {name!r} sums to "
                             f"{sum(probs)}, not 1")
        rows[name][key] = tuple(probs)

    mechanisms = {}
    for n in g.names:
        expected_keys = set(product(*[domains[p] for p in parent_order[n]]))
        have = set(rows[n])
        if have != expected_keys:
            lack = sorted(expected_keys - have)
            raise ParseError(
                1, f"cpt for {n!r} misses a row for parent assignment "
                f"{dict(zip(parent_order[n], lack[0]))!r}" if lack else
                f"cpt for {n!r} has surplus rows")
        mechanisms[n] = Mechanism(n, parent_order[n], rows[n])
    try:
        return DiscreteModel(g, domains, mechanisms)
    except ModelError as exc:
        raise ParseError(1, str(exc)) from None


def model_to_dsl(m: DiscreteModel) -> str:
    lines = [graph_to_dsl(m.graph).rstrip("\n")]
    for n in m.graph.names:
        lines.append(f"domain {n} {' '.join(str(v) for v in m.domains[n])}")
    for n in m.graph.names:
        mech = m.mechanisms[n]
        for key in product(*[m.domains[p] for p in mech.parents]):
            row = mech.row(key)
            pa = " ".join(f"{p}={v}" for p, v in zip(mech.parents, key))
            ps = " ".join(str(x) for x in row)
            lines.append(f"cpt {n} | {pa} : {ps}".replace("|  :", "| :"))
    return "\n".join(lines) + "\n"


def parse_assignment(items: Iterable[str], model: DiscreteModel | None = None
                     ) -> dict[str, str]:
    """Parse ``name=value`` items (CLI style), checking domains when a
    model is supplied."""
    out: dict[str, str] = {}
    for item in items:
        if "=" not in item:
            raise ParseError(0, f"expected name=value, got {item!r}")
        name, value = item.split("=", 1)
        if model is not None:
            model.graph.index(name)
            if value not in model.domains[name]:
                raise ParseError(
                    0, f"value {value!r} not in domain of {name!r} "
                    f"{list(model.domains[name])}")
        out[name] = value
    return out
