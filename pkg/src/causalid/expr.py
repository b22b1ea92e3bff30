"""Symbolic probability expressions.

Identification results are stated in a small language of probability
terms with observation and intervention slots, sums over bound
variables, products and quotients:

    p(A,B|C,do(D))     conditional term, do() marks interventions
    sum_z <factors>    sum over all domain values of z (also sum_{a,b})
    juxtaposition      product
    /                  quotient; parentheses group

Expressions carry variable names only; domains and values come from a
model at evaluation time.  Primed variables such as x' are ordinary
bound variables stored with a numeric suffix (x__1) and rendered
primed, so graph variable names may not end in ``__<digits>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Mapping, Union

from .graph import CausalGraph
from .scm import DiscreteModel, JointDistribution, PositivityError

_SUFFIX_RE = re.compile(r"^(.*?)__([0-9]+)$")
_NAME_TEXT_RE = re.compile(r"^([A-Za-z0-9_]+)('*)$")


class ExprError(Exception):
    """Malformed expression or parse failure."""


def split_name(name: str) -> tuple[str, int]:
    """Split an internal name into (base, prime count)."""
    m = _SUFFIX_RE.match(name)
    if m:
        return m.group(1), int(m.group(2))
    return name, 0


def base_name(name: str) -> str:
    return split_name(name)[0]


def name_to_text(name: str) -> str:
    b, k = split_name(name)
    return b + "'" * k


def name_from_text(tok: str) -> str:
    m = _NAME_TEXT_RE.match(tok)
    if not m:
        raise ExprError(f"bad variable token {tok!r}")
    b, primes = m.group(1), len(m.group(2))
    return b if primes == 0 else f"{b}__{primes}"


def fresh_name(base: str, used: Iterable[str]) -> str:
    taken = set(used)
    if base not in taken:
        return base
    k = 1
    while f"{base}__{k}" in taken:
        k += 1
    return f"{base}__{k}"


def _name_key(n: str) -> tuple[str, int]:
    return split_name(n)


def _sorted_names(names: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(names, key=_name_key))


@dataclass(frozen=True)
class ProbTerm:
    """p(targets | given, do(do)); the three name sets are disjoint and
    no two of them share a base variable."""

    targets: tuple[str, ...]
    given: tuple[str, ...] = ()
    do: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", _sorted_names(self.targets))
        object.__setattr__(self, "given", _sorted_names(self.given))
        object.__setattr__(self, "do", _sorted_names(self.do))
        if not self.targets:
            raise ExprError("a probability term needs at least one target")
        allnames = self.targets + self.given + self.do
        if len(set(allnames)) != len(allnames):
            raise ExprError(f"repeated variable in term {allnames}")
        bases = [base_name(n) for n in allnames]
        if len(set(bases)) != len(bases):
            raise ExprError(
                f"term mentions one variable twice (primes included): "
                f"{allnames}")


@dataclass(frozen=True)
class Sum:
    bound: tuple[str, ...]
    body: "Expr"

    def __post_init__(self):
        if not self.bound:
            raise ExprError("sum needs at least one bound variable")
        if len(set(self.bound)) != len(self.bound):
            raise ExprError("repeated bound variable")


@dataclass(frozen=True)
class Product:
    factors: tuple["Expr", ...]

    def __post_init__(self):
        if len(self.factors) < 2:
            raise ExprError("product needs at least two factors")


@dataclass(frozen=True)
class Quotient:
    num: "Expr"
    den: "Expr"


Expr = Union[ProbTerm, Sum, Product, Quotient]


def P(targets, given=(), do=()) -> ProbTerm:
    """Convenience constructor accepting strings or iterables."""
    tt = (targets,) if isinstance(targets, str) else tuple(targets)
    gg = (given,) if isinstance(given, str) else tuple(given)
    dd = (do,) if isinstance(do, str) else tuple(do)
    return ProbTerm(tt, gg, dd)


# -- structure queries -------------------------------------------------

def walk_terms(e: Expr):
    if isinstance(e, ProbTerm):
        yield e
    elif isinstance(e, Sum):
        yield from walk_terms(e.body)
    elif isinstance(e, Product):
        for f in e.factors:
            yield from walk_terms(f)
    elif isinstance(e, Quotient):
        yield from walk_terms(e.num)
        yield from walk_terms(e.den)
    else:
        raise ExprError(f"not an expression: {e!r}")


def is_do_free(e: Expr) -> bool:
    return all(not t.do for t in walk_terms(e))


def free_variables(e: Expr, _bound: frozenset[str] = frozenset()
                   ) -> frozenset[str]:
    if isinstance(e, ProbTerm):
        return frozenset(n for n in e.targets + e.given + e.do
                         if n not in _bound)
    if isinstance(e, Sum):
        return free_variables(e.body, _bound | frozenset(e.bound))
    if isinstance(e, Product):
        out = frozenset()
        for f in e.factors:
            out |= free_variables(f, _bound)
        return out
    return free_variables(e.num, _bound) | free_variables(e.den, _bound)


def used_names(e: Expr) -> frozenset[str]:
    out = set()
    for t in walk_terms(e):
        out.update(t.targets + t.given + t.do)

    def binders(x):
        if isinstance(x, Sum):
            out.update(x.bound)
            binders(x.body)
        elif isinstance(x, Product):
            for f in x.factors:
                binders(f)
        elif isinstance(x, Quotient):
            binders(x.num)
            binders(x.den)
    binders(e)
    return frozenset(out)


def validate(e: Expr, _scope: frozenset[str] = frozenset()) -> None:
    """Check binder hygiene: a bound variable may not collide with any
    name already in scope."""
    if isinstance(e, ProbTerm):
        return
    if isinstance(e, Sum):
        clash = set(e.bound) & _scope
        if clash:
            raise ExprError(f"bound variable rebinds name in scope: {clash}")
        validate(e.body, _scope | frozenset(e.bound))
        return
    if isinstance(e, Product):
        for f in e.factors:
            validate(f, _scope)
        return
    validate(e.num, _scope)
    validate(e.den, _scope)


# -- rendering ---------------------------------------------------------

def _render_term(t: ProbTerm, latex: bool) -> str:
    name = name_to_text
    tgt = ",".join(name(n) for n in t.targets)
    parts = []
    if t.do:
        inner = ",".join(name(n) for n in t.do)
        parts.append((r"\mathrm{do}(" if latex else "do(") + inner + ")")
    parts.extend(name(n) for n in t.given)
    if parts:
        return f"p({tgt}|{','.join(parts)})"
    return f"p({tgt})"


def _needs_parens(f: Expr, last_in_product: bool) -> bool:
    if isinstance(f, ProbTerm):
        return False
    if isinstance(f, Sum):
        return not last_in_product  # a trailing sum swallows nothing more
    return True  # nested products and quotients always grouped


def render(e: Expr, format: str = "text") -> str:
    """Deterministic rendering; the text format round-trips through
    ``parse``."""
    latex = format == "latex"
    if format not in ("text", "latex"):
        raise ExprError(f"unknown format {format!r}")

    def wrap(s: str) -> str:
        return (r"\left(" + s + r"\right)") if latex else f"({s})"

    def go(x: Expr) -> str:
        if isinstance(x, ProbTerm):
            return _render_term(x, latex)
        if isinstance(x, Sum):
            if latex:
                head = r"\sum_{" + ",".join(name_to_text(b)
                                            for b in x.bound) + "} "
            elif len(x.bound) == 1:
                head = f"sum_{name_to_text(x.bound[0])} "
            else:
                head = "sum_{" + ",".join(name_to_text(b)
                                          for b in x.bound) + "} "
            body = go(x.body)
            if isinstance(x.body, Quotient):
                body = wrap(body)
            return head + body
        if isinstance(x, Product):
            out = []
            for i, f in enumerate(x.factors):
                s = go(f)
                if _needs_parens(f, i == len(x.factors) - 1):
                    s = wrap(s)
                out.append(s)
            return (r" \: " if latex else " ").join(out)
        if isinstance(x, Quotient):
            if latex:
                return r"\frac{" + go(x.num) + "}{" + go(x.den) + "}"
            num, den = go(x.num), go(x.den)
            if not isinstance(x.num, ProbTerm):
                num = wrap(num)
            if not isinstance(x.den, ProbTerm):
                den = wrap(den)
            return f"{num} / {den}"
        raise ExprError(f"not an expression: {x!r}")

    validate(e)
    return go(e)


# -- parsing -----------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*([A-Za-z0-9_]+'*|[(){}|,/])")


def _tokenize(text: str) -> list[str]:
    out, i = [], 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            if text[i:].strip():
                raise ExprError(f"unexpected character {text[i:].strip()[0]!r}"
                                f" at offset {i}")
            break
        out.append(m.group(1))
        i = m.end()
    return out


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> str:
        t = self.peek()
        if t is None:
            raise ExprError("unexpected end of expression")
        self.i += 1
        return t

    def expect(self, tok: str) -> None:
        t = self.next()
        if t != tok:
            raise ExprError(f"expected {tok!r}, found {t!r}")

    def parse_expr(self) -> Expr:
        e = self.parse_product()
        while self.peek() == "/":
            self.next()
            e = Quotient(e, self.parse_product())
        return e

    def parse_product(self) -> Expr:
        factors = [self.parse_factor()]
        while self.peek() not in (None, ")", "/"):
            factors.append(self.parse_factor())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def parse_factor(self) -> Expr:
        t = self.peek()
        if t == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t is None:
            raise ExprError("unexpected end of expression")
        if t == "p" and self.toks[self.i + 1:self.i + 2] == ["("]:
            return self.parse_term()
        if t.startswith("sum_"):
            return self.parse_sum()
        raise ExprError(f"unexpected token {t!r}")

    def parse_sum(self) -> Expr:
        t = self.next()
        rest = t[len("sum_"):]
        if rest:
            bound = [name_from_text(rest)]
        else:
            self.expect("{")
            bound = [name_from_text(self.next())]
            while self.peek() == ",":
                self.next()
                bound.append(name_from_text(self.next()))
            self.expect("}")
        body = self.parse_product()
        return Sum(tuple(bound), body)

    def parse_term(self) -> ProbTerm:
        self.expect("p")
        self.expect("(")
        targets = [name_from_text(self.next())]
        while self.peek() == ",":
            self.next()
            targets.append(name_from_text(self.next()))
        given: list[str] = []
        do: list[str] = []
        if self.peek() == "|":
            self.next()
            while True:
                t = self.next()
                if t == "do":
                    self.expect("(")
                    do.append(name_from_text(self.next()))
                    while self.peek() == ",":
                        self.next()
                        do.append(name_from_text(self.next()))
                    self.expect(")")
                else:
                    given.append(name_from_text(t))
                if self.peek() != ",":
                    break
                self.next()
        self.expect(")")
        return ProbTerm(tuple(targets), tuple(given), tuple(do))


def parse(text: str) -> Expr:
    """Parse the text grammar (the renderer's text output parses back)."""
    toks = _tokenize(text)
    if not toks:
        raise ExprError("empty expression")
    p = _Parser(toks)
    e = p.parse_expr()
    if p.peek() is not None:
        raise ExprError(f"trailing input from token {p.peek()!r}")
    validate(e)
    return e


# -- canonical form ----------------------------------------------------

def _flatten(e: Expr) -> Expr:
    if isinstance(e, ProbTerm):
        return e
    if isinstance(e, Sum):
        body = _flatten(e.body)
        bound = e.bound
        while isinstance(body, Sum):
            bound = bound + body.bound
            body = body.body
        return Sum(bound, body)
    if isinstance(e, Product):
        out: list[Expr] = []
        for f in e.factors:
            ff = _flatten(f)
            if isinstance(ff, Product):
                out.extend(ff.factors)
            else:
                out.append(ff)
        return out[0] if len(out) == 1 else Product(tuple(out))
    return Quotient(_flatten(e.num), _flatten(e.den))


def _skeleton_key(e: Expr, env: Mapping[str, str]) -> str:
    """Serialization with bound names replaced by base markers, so factor
    ordering does not depend on the eventual alpha-renaming."""
    def mark(n: str) -> str:
        return env.get(n, n)

    if isinstance(e, ProbTerm):
        return ("P(" + ",".join(sorted(mark(n) for n in e.targets)) + "|"
                + ",".join(sorted(mark(n) for n in e.given)) + ";"
                + ",".join(sorted(mark(n) for n in e.do)) + ")")
    if isinstance(e, Sum):
        env2 = dict(env)
        for b in e.bound:
            env2[b] = f"§{base_name(b)}"
        bases = ",".join(sorted(f"§{base_name(b)}" for b in e.bound))
        return f"S[{bases}]{_skeleton_key(e.body, env2)}"
    if isinstance(e, Product):
        return "*".join(sorted(_skeleton_key(f, env) for f in e.factors))
    return f"({_skeleton_key(e.num, env)})/({_skeleton_key(e.den, env)})"


def canonicalize(e: Expr) -> Expr:
    """Flatten products, merge and sort nested sums, order product
    factors structurally, and alpha-rename bound variables in order of
    appearance.  Evaluation is invariant under canonicalization."""
    validate(e)
    e = _flatten(e)

    def sort_structure(x: Expr) -> Expr:
        if isinstance(x, ProbTerm):
            return x
        if isinstance(x, Sum):
            bound = tuple(sorted(x.bound,
                                 key=lambda b: (base_name(b),)))
            return Sum(bound, sort_structure(x.body))
        if isinstance(x, Product):
            fs = [sort_structure(f) for f in x.factors]
            fs.sort(key=lambda f: _skeleton_key(f, {}))
            return Product(tuple(fs))
        return Quotient(sort_structure(x.num), sort_structure(x.den))

    e = sort_structure(e)

    free_bases = {}
    for n in free_variables(e):
        b, k = split_name(n)
        free_bases[b] = max(free_bases.get(b, 0), k)
    counters = dict(free_bases)

    def rename(x: Expr, env: Mapping[str, str]) -> Expr:
        if isinstance(x, ProbTerm):
            return ProbTerm(tuple(env.get(n, n) for n in x.targets),
                            tuple(env.get(n, n) for n in x.given),
                            tuple(env.get(n, n) for n in x.do))
        if isinstance(x, Sum):
            env2 = dict(env)
            fresh = []
            for b in x.bound:
                base = base_name(b)
                counters[base] = counters.get(base, 0) + 1
                nb = f"{base}__{counters[base]}"
                env2[b] = nb
                fresh.append(nb)
            return Sum(tuple(sorted(fresh, key=_name_key)),
                       rename(x.body, env2))
        if isinstance(x, Product):
            return Product(tuple(rename(f, env) for f in x.factors))
        return Quotient(rename(x.num, env), rename(x.den, env))

    return rename(e, {})


def tidy(e: Expr) -> Expr:
    """Commutative display cleanup: inside a product, move sums after
    plain factors so renders need no parentheses.  Semantics unchanged."""
    if isinstance(e, ProbTerm):
        return e
    if isinstance(e, Sum):
        return Sum(e.bound, tidy(e.body))
    if isinstance(e, Product):
        fs = [tidy(f) for f in e.factors]
        plain = [f for f in fs if not isinstance(f, Sum)]
        sums = [f for f in fs if isinstance(f, Sum)]
        return Product(tuple(plain + sums))
    return Quotient(tidy(e.num), tidy(e.den))


def canonical_text(e: Expr) -> str:
    return render(canonicalize(e))


def alpha_equal(a: Expr, b: Expr) -> bool:
    return canonicalize(a) == canonicalize(b)


# -- evaluation --------------------------------------------------------

def evaluate(e: Expr, model: DiscreteModel,
             binding: Mapping[str, object]):
    """Exact value of the expression under a binding of its free
    variables.  Terms with interventions are evaluated through graph
    surgery (the oracle semantics); do-free terms read the plain joint.
    """
    validate(e)
    missing = free_variables(e) - set(binding)
    if missing:
        raise ExprError(f"unbound variables: {sorted(missing)}")
    joints: dict[frozenset, JointDistribution] = {}

    def joint_for(do_assign: dict) -> JointDistribution:
        key = frozenset(do_assign.items())
        if key not in joints:
            joints[key] = (model.intervene(do_assign).joint()
                           if do_assign else model.joint())
        return joints[key]

    def term_value(t: ProbTerm, env: Mapping[str, object]):
        def assign(names):
            out = {}
            for n in names:
                b = base_name(n)
                model.graph.index(b)
                out[b] = env[n]
            return out

        t_assign = assign(t.targets)
        o_assign = assign(t.given)
        do_assign = assign(t.do)
        jd = joint_for(do_assign)
        if o_assign:
            den = jd.p(o_assign)
            if den == 0:
                culprit = ProbTerm(t.given, (), t.do)
                raise PositivityError(
                    f"{render(culprit)} = 0 while evaluating {render(t)}")
            return jd.p({**t_assign, **o_assign}) / den
        return jd.p(t_assign)

    def go(x: Expr, env: dict):
        if isinstance(x, ProbTerm):
            return term_value(x, env)
        if isinstance(x, Sum):
            doms = []
            for b in x.bound:
                base = base_name(b)
                model.graph.index(base)
                doms.append(model.domains[base])
            total = Fraction(0)
            for combo in iproduct(*doms):
                env2 = dict(env)
                env2.update(zip(x.bound, combo))
                total = total + go(x.body, env2)
            return total
        if isinstance(x, Product):
            val = 1
            for f in x.factors:
                val = val * go(f, env)
            return val
        num = go(x.num, env)
        den = go(x.den, env)
        if den == 0:
            raise PositivityError(
                f"denominator {render(x.den)} evaluates to zero")
        return num / den

    return go(e, dict(binding))


# -- derivations -------------------------------------------------------

RULE_TAGS = ("rule1", "rule2", "rule3", "chain", "marginalize", "definition")


@dataclass(frozen=True)
class GuardFact:
    """A d-separation statement on a surgically modified graph: with the
    stated edges cut, ``left`` and ``right`` are separated given
    ``given``."""

    left: tuple[str, ...]
    right: tuple[str, ...]
    given: tuple[str, ...]
    cut_incoming: tuple[str, ...]
    cut_outgoing: tuple[str, ...]

    def verify(self, g: CausalGraph) -> bool:
        from .dsep import d_separated
        h = g.mutilate(self.cut_incoming, self.cut_outgoing)
        return d_separated(h, self.left, self.right, self.given)

    def render(self) -> str:
        marks = []
        if self.cut_incoming:
            marks.append("in-cut:" + ",".join(self.cut_incoming))
        if self.cut_outgoing:
            marks.append("out-cut:" + ",".join(self.cut_outgoing))
        where = f"G[{'; '.join(marks)}]" if marks else "G"
        return (f"({','.join(self.left)} _||_ {','.join(self.right)}"
                f" | {','.join(self.given)}) in {where}")


@dataclass(frozen=True)
class DerivationStep:
    rule: str
    guard: GuardFact | None
    before: Expr
    after: Expr

    def __post_init__(self):
        if self.rule not in RULE_TAGS:
            raise ExprError(f"unknown rule tag {self.rule!r}")

    def to_json(self, step: int) -> dict:
        return {
            "step": step,
            "rule": self.rule,
            "guard": None if self.guard is None else {
                "left": list(self.guard.left),
                "right": list(self.guard.right),
                "given": list(self.guard.given),
                "cut_incoming": list(self.guard.cut_incoming),
                "cut_outgoing": list(self.guard.cut_outgoing),
            },
            "before": render(self.before),
            "after": render(self.after),
        }
