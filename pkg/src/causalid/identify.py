"""Causal-effect identification.

Decides whether p(y|do(x)) can be rewritten without interventions using
the graph alone, and produces the do-free formula plus the licensed
rewrite derivation.  Three layers:

* admissibility tests and formula builders for the back-door and
  front-door criteria;
* the three guarded rewrite rules of the do-calculus, each checking its
  d-separation condition on the prescribed surgically modified graph;
* a budget-bounded search over rewrites (rules, marginalization
  insertion, chain splits, plus back-door/front-door closures as canned
  step sequences) with canonical-state memoization.

The search runs its d-separation guards on the full graph including
latent nodes, but only observed variables ever enter a formula.  A
returned formula is cross-checked against the graph-surgery oracle on
random models before being reported.  Failure to identify within the
budget is never reported as non-identifiability; only isomorphism with
a catalog entry known to be non-identifiable yields that verdict.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations, permutations, product

from .dsep import d_separated
from .expr import (DerivationStep, Expr, GuardFact, P, ProbTerm, Product,
                   Quotient, Sum, base_name, evaluate, fresh_name,
                   is_do_free, tidy, used_names)
from .graph import CausalGraph, GraphError
from .scm import random_model

DEFAULT_BUDGET = 16

IDENTIFIED = "identified"
NOT_WITHIN_BUDGET = "not-identified-within-budget"
KNOWN_NON_IDENTIFIABLE = "known-non-identifiable"


class EngineInvariantError(Exception):
    """A derived formula failed its oracle cross-check: engine defect."""


@dataclass(frozen=True)
class Query:
    graph: CausalGraph
    treatment: tuple[str, ...]
    outcome: tuple[str, ...]

    def __post_init__(self):
        g = self.graph
        xs, ys = frozenset(self.treatment), frozenset(self.outcome)
        for n in xs | ys:
            g.index(n)
        if not xs or not ys:
            raise GraphError("treatment and outcome must be nonempty")
        if xs & ys:
            raise GraphError("treatment and outcome must be disjoint")
        latent = (xs | ys) & g.latent_names
        if latent:
            raise GraphError(
                f"treatment/outcome must be observed: {sorted(latent)}")
        object.__setattr__(self, "treatment", g.ordered(xs))
        object.__setattr__(self, "outcome", g.ordered(ys))


@dataclass(frozen=True)
class IdentificationResult:
    status: str
    formula: Expr | None
    derivation: tuple[DerivationStep, ...]
    budget_spent: int

    def __post_init__(self):
        if self.status == IDENTIFIED:
            assert self.formula is not None and is_do_free(self.formula)


# -- back-door ----------------------------------------------------------

def backdoor_admissible(g: CausalGraph, X, Y, Z) -> bool:
    """Is Z a valid adjustment set for the effect of X on Y?

    Requires (1) no member of Z descends from X and (2) Z blocks every
    path into X's back (checked by separation with X's outgoing edges
    cut).
    """
    xs, ys, zs = frozenset(X), frozenset(Y), frozenset(Z)
    latent = zs & g.latent_names
    if latent:
        raise GraphError(f"adjustment set must be observed, got latent "
                         f"{sorted(latent)}")
    if zs & (xs | ys):
        raise GraphError("adjustment set overlaps treatment or outcome")
    if zs & g.descendants(xs):
        return False
    if not zs:
        return d_separated(g.mutilate(cut_outgoing=xs), xs, ys, ())
    return d_separated(g.mutilate(cut_outgoing=xs), xs, ys, zs)


def find_backdoor_sets(g: CausalGraph, X, Y) -> list[frozenset[str]]:
    """All inclusion-minimal admissible observed adjustment sets, sorted
    by cardinality then lexicographically (declaration order)."""
    xs, ys = frozenset(X), frozenset(Y)
    pool = [n for n in g.observed_names if n not in xs | ys]
    admissible = []
    for r in range(len(pool) + 1):
        for zs in combinations(pool, r):
            if backdoor_admissible(g, xs, ys, zs):
                admissible.append(frozenset(zs))
    minimal = [z for z in admissible
               if not any(o < z for o in admissible)]
    minimal.sort(key=lambda z: (len(z), tuple(g.index(n) for n in
                                              g.ordered(z))))
    return minimal


def backdoor_formula(X, Y, Z) -> Expr:
    """sum_z p(y|x,z) p(z); collapses to p(y|x) for an empty Z."""
    xs, ys, zs = tuple(X), tuple(Y), tuple(Z)
    if not zs:
        return P(ys, given=xs)
    return Sum(tuple(sorted(zs)),
               Product((P(ys, given=xs + zs), P(zs))))


# -- front-door ---------------------------------------------------------

def frontdoor_admissible(g: CausalGraph, X, Y, Z) -> bool:
    """Mediator criterion: Z cuts every directed route from X to Y, X has
    no open back path to Z, and X blocks every back path from Z to Y."""
    xs, ys, zs = frozenset(X), frozenset(Y), frozenset(Z)
    latent = zs & g.latent_names
    if latent:
        raise GraphError(f"mediator set must be observed, got latent "
                         f"{sorted(latent)}")
    if zs & (xs | ys):
        raise GraphError("mediator set overlaps treatment or outcome")
    # 1. no directed path X -> ... -> Y avoiding Z
    reach = set(xs)
    frontier = list(xs)
    while frontier:
        v = frontier.pop()
        for c in g.children(v):
            if c in zs or c in reach:
                continue
            reach.add(c)
            frontier.append(c)
    if reach & ys:
        return False
    # 2. every back path X..Z blocked by nothing at all
    if not d_separated(g.mutilate(cut_outgoing=xs), xs, zs, ()):
        return False
    # 3. every back path Z..Y blocked by X
    return d_separated(g.mutilate(cut_outgoing=zs), zs, ys, xs)


def find_frontdoor_sets(g: CausalGraph, X, Y) -> list[frozenset[str]]:
    """Nonempty observed mediator sets satisfying the criterion,
    inclusion-minimal first."""
    xs, ys = frozenset(X), frozenset(Y)
    pool = [n for n in g.observed_names if n not in xs | ys]
    admissible = []
    for r in range(1, len(pool) + 1):
        for zs in combinations(pool, r):
            if frontdoor_admissible(g, xs, ys, zs):
                admissible.append(frozenset(zs))
    minimal = [z for z in admissible
               if not any(o < z for o in admissible)]
    minimal.sort(key=lambda z: (len(z), tuple(g.index(n) for n in
                                              g.ordered(z))))
    return minimal


def frontdoor_formula(X, Y, Z) -> Expr:
    """sum_z p(z|x) sum_x' p(y|x',z) p(x')."""
    xs, ys, zs = tuple(X), tuple(Y), tuple(Z)
    if not zs:
        raise GraphError("front-door formula needs a nonempty mediator set")
    used = set(xs) | set(ys) | set(zs)
    primed = []
    for x in xs:
        nx = fresh_name(x, used)
        used.add(nx)
        primed.append(nx)
    inner = Sum(tuple(sorted(primed)),
                Product((P(ys, given=tuple(primed) + zs), P(tuple(primed)))))
    return Sum(tuple(sorted(zs)), Product((P(zs, given=xs), inner)))


# -- do-calculus rule guards ---------------------------------------------

def _rule_sets(g: CausalGraph, X, Y, Z, W):
    xs, ys, zs, ws = (frozenset(X), frozenset(Y), frozenset(Z), frozenset(W))
    for n in xs | ys | zs | ws:
        g.index(n)
    sets = [xs, ys, zs, ws]
    for i in range(4):
        for j in range(i + 1, 4):
            if sets[i] & sets[j]:
                raise GraphError("rule sets must be pairwise disjoint")
    if not ys or not zs:
        raise GraphError("rule needs nonempty Y and Z")
    return xs, ys, zs, ws


def rule1_applicable(g: CausalGraph, X, Y, Z, W) -> bool:
    """May the observation z be dropped from p(y|do(x),z,w)?  Guard: Y and
    Z separated by X u W once edges into X are cut."""
    xs, ys, zs, ws = _rule_sets(g, X, Y, Z, W)
    return d_separated(g.mutilate(cut_incoming=xs), ys, zs, xs | ws)


def rule2_applicable(g: CausalGraph, X, Y, Z, W) -> bool:
    """May do(z) and the plain observation z be exchanged in
    p(y|do(x),do(z),w)?  Guard: Y and Z separated by X u W once edges
    into X and out of Z are cut."""
    xs, ys, zs, ws = _rule_sets(g, X, Y, Z, W)
    return d_separated(g.mutilate(cut_incoming=xs, cut_outgoing=zs),
                       ys, zs, xs | ws)


def rule3_applicable(g: CausalGraph, X, Y, Z, W) -> bool:
    """May the intervention do(z) be deleted from p(y|do(x),do(z),w)?
    Guard: Y and Z separated by X u W once edges into X and into the
    Z-nodes that are not ancestors of W (in the X-cut graph) are cut."""
    xs, ys, zs, ws = _rule_sets(g, X, Y, Z, W)
    zh = g.z_hat(xs, zs, ws)
    return d_separated(g.mutilate(cut_incoming=xs | zh), ys, zs, xs | ws)


def _rule1_guard(g, xs, ys, zs, ws) -> GuardFact:
    return GuardFact(g.ordered(ys), g.ordered(zs), g.ordered(xs | ws),
                     g.ordered(xs), ())


def _rule2_guard(g, xs, ys, zs, ws) -> GuardFact:
    return GuardFact(g.ordered(ys), g.ordered(zs), g.ordered(xs | ws),
                     g.ordered(xs), g.ordered(zs))


def _rule3_guard(g, xs, ys, zs, ws) -> GuardFact:
    zh = g.z_hat(xs, zs, ws)
    return GuardFact(g.ordered(ys), g.ordered(zs), g.ordered(xs | ws),
                     g.ordered(xs | zh), ())


# -- search plans ---------------------------------------------------------
#
# The search state is a single probability term reduced to its base
# variables: (targets, observations, interventions).  Rewrites depend
# only on those sets, factors of a product rewrite independently, and a
# sum never constrains the rewrites inside it, so the whole search
# decomposes term by term.  Plans record base-level moves; concrete
# bound names are minted only when a plan is replayed into a derivation.

State = tuple[frozenset[str], frozenset[str], frozenset[str]]


@dataclass(frozen=True)
class _Done:
    pass


@dataclass(frozen=True)
class _Rule:
    tag: str
    guard: GuardFact
    after: State
    rest: object


@dataclass(frozen=True)
class _Marg:
    added: tuple[str, ...]
    rest: object


@dataclass(frozen=True)
class _Chain:
    split: tuple[str, ...]
    first: object
    second: object


def _plan_cost(p) -> int:
    if isinstance(p, _Done):
        return 0
    if isinstance(p, (_Rule, _Marg)):
        return 1 + _plan_cost(p.rest)
    return 1 + _plan_cost(p.first) + _plan_cost(p.second)


def _subsets(g: CausalGraph, names, proper: bool = False):
    """Nonempty subsets in (size, declaration) order; ``proper`` keeps
    at least one element out."""
    pool = g.ordered(names)
    top = len(pool) - 1 if proper else len(pool)
    for r in range(1, top + 1):
        for c in combinations(pool, r):
            yield frozenset(c)


class _Searcher:
    """Budget-bounded minimal-cost search over term states with
    memoization; explored iteratively with shrinking cost caps."""

    def __init__(self, g: CausalGraph):
        self.g = g
        self.success: dict[State, tuple[int, object]] = {}
        self.failure: dict[State, int] = {}

    def solve(self, state: State, cap: int):
        T, O, D = state
        if not D:
            return 0, _Done()
        if cap <= 0:
            return None
        hit = self.success.get(state)
        if hit is not None and hit[0] <= cap:
            return hit
        if self.failure.get(state, -1) >= cap:
            return None
        best = None
        for move in self._moves(state):
            limit = cap if best is None else best[0] - 1
            got = self._try(move, limit)
            if got is not None and (best is None or got[0] < best[0]):
                best = got
                if best[0] == 1:
                    break
        if best is None:
            self.failure[state] = max(self.failure.get(state, -1), cap)
        else:
            self.success[state] = best
        return best

    def _try(self, move, cap: int):
        if cap <= 0:
            return None
        kind = move[0]
        if kind == "closure":
            plan = move[1]
            cost = _plan_cost(plan)
            return (cost, plan) if cost <= cap else None
        if kind == "rule":
            _, tag, guard, after = move
            sub = self.solve(after, cap - 1)
            if sub is None:
                return None
            return 1 + sub[0], _Rule(tag, guard, after, sub[1])
        if kind == "marg":
            _, added, inner = move
            sub = self.solve(inner, cap - 1)
            if sub is None:
                return None
            return 1 + sub[0], _Marg(added, sub[1])
        _, split, first, second = move
        sub1 = self.solve(first, cap - 1)
        if sub1 is None:
            return None
        sub2 = self.solve(second, cap - 1 - sub1[0])
        if sub2 is None:
            return None
        return 1 + sub1[0] + sub2[0], _Chain(split, sub1[1], sub2[1])

    # move generation, deterministic order

    def _moves(self, state: State):
        g = self.g
        T, O, D = state
        if not O:
            plan = self._backdoor_closure(T, D)
            if plan is not None:
                yield "closure", plan
            plan = self._frontdoor_closure(T, D)
            if plan is not None:
                yield "closure", plan
        for zs in _subsets(g, D):
            xs = D - zs
            if rule2_applicable(g, xs, T, zs, O):
                yield ("rule", "rule2", _rule2_guard(g, xs, T, zs, O),
                       (T, O | zs, xs))
        for zs in _subsets(g, D):
            xs = D - zs
            if rule3_applicable(g, xs, T, zs, O):
                yield ("rule", "rule3", _rule3_guard(g, xs, T, zs, O),
                       (T, O, xs))
        for zs in _subsets(g, O):
            ws = O - zs
            if rule2_applicable(g, D, T, zs, ws):
                yield ("rule", "rule2", _rule2_guard(g, D, T, zs, ws),
                       (T, ws, D | zs))
        for zs in _subsets(g, O):
            ws = O - zs
            if rule1_applicable(g, D, T, zs, ws):
                yield ("rule", "rule1", _rule1_guard(g, D, T, zs, ws),
                       (T, ws, D))
        candidates = [n for n in g.observed_names if n not in T | O | D]
        for vs in _subsets(g, candidates):
            yield "marg", g.ordered(vs), (T | vs, O, D)
        for ss in _subsets(g, T, proper=True):
            yield ("chain", g.ordered(ss),
                   (T - ss, O | ss, D), (ss, O, D))

    # canned closures: the canonical adjustment derivations as fixed
    # primitive-step plans, offered only when every licensing guard holds

    def _backdoor_closure(self, T, D):
        g = self.g
        sets = find_backdoor_sets(g, D, T)
        if not sets:
            return None
        zs = sets[0]
        exchange = _rule2_guard(g, frozenset(), T, D, zs)
        if not exchange.verify(g):
            return None
        if not zs:
            return _Rule("rule2", exchange, (T, D, frozenset()), _Done())
        drop = _rule3_guard(g, frozenset(), zs, D, frozenset())
        if not drop.verify(g):
            return None
        return _Marg(g.ordered(zs), _Chain(
            g.ordered(zs),
            _Rule("rule2", exchange, (T, zs | D, frozenset()), _Done()),
            _Rule("rule3", drop, (zs, frozenset(), frozenset()), _Done()),
        ))

    def _frontdoor_closure(self, T, D):
        g = self.g
        sets = find_frontdoor_sets(g, D, T)
        if not sets:
            return None
        zs = sets[0]
        g1 = _rule2_guard(g, frozenset(), zs, D, frozenset())
        g2 = _rule2_guard(g, D, T, zs, frozenset())
        g3 = _rule3_guard(g, zs, T, D, frozenset())
        g4 = _rule3_guard(g, frozenset(), D, zs, frozenset())
        g5 = _rule2_guard(g, frozenset(), T, zs, D)
        if not all(gf.verify(g) for gf in (g1, g2, g3, g4, g5)):
            return None
        inner = _Marg(g.ordered(D), _Chain(
            g.ordered(D),
            _Rule("rule2", g5, (T, D | zs, frozenset()), _Done()),
            _Rule("rule3", g4, (D, frozenset(), frozenset()), _Done()),
        ))
        first = _Rule("rule2", g2, (T, frozenset(), D | zs),
                      _Rule("rule3", g3, (T, frozenset(), zs), inner))
        second = _Rule("rule2", g1, (zs, D, frozenset()), _Done())
        return _Marg(g.ordered(zs),
                     _Chain(g.ordered(zs), first, second))


# -- plan replay into a concrete derivation --------------------------------

def _at(e: Expr, path: tuple):
    for step in path:
        if step == "sum":
            e = e.body
        elif step == "num":
            e = e.num
        elif step == "den":
            e = e.den
        else:
            e = e.factors[step[1]]
    return e


def _replace(e: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    head, rest = path[0], path[1:]
    if head == "sum":
        return Sum(e.bound, _replace(e.body, rest, new))
    if head == "num":
        return Quotient(_replace(e.num, rest, new), e.den)
    if head == "den":
        return Quotient(e.num, _replace(e.den, rest, new))
    i = head[1]
    factors = list(e.factors)
    factors[i] = _replace(factors[i], rest, new)
    return Product(tuple(factors))


class _Replayer:
    def __init__(self, g: CausalGraph, root: Expr):
        self.g = g
        self.root = root
        self.steps: list[DerivationStep] = []

    def _emit(self, rule: str, guard, path, new_sub: Expr):
        before = self.root
        self.root = _replace(self.root, path, new_sub)
        self.steps.append(DerivationStep(rule, guard, before, self.root))

    def run(self, plan, path: tuple):
        if isinstance(plan, _Done):
            return
        term = _at(self.root, path)
        names = {base_name(n): n
                 for n in term.targets + term.given + term.do}
        if isinstance(plan, _Rule):
            T, O, D = plan.after
            new_term = ProbTerm(tuple(names[b] for b in T),
                                tuple(names[b] for b in O),
                                tuple(names[b] for b in D))
            self._emit(plan.tag, plan.guard, path, new_term)
            self.run(plan.rest, path)
        elif isinstance(plan, _Marg):
            taken = set(used_names(self.root))
            bound = []
            for b in plan.added:
                nb = fresh_name(b, taken)
                taken.add(nb)
                bound.append(nb)
            inner = ProbTerm(term.targets + tuple(bound), term.given,
                             term.do)
            self._emit("marginalize", None, path,
                       Sum(tuple(sorted(bound)), inner))
            self.run(plan.rest, path + ("sum",))
        elif isinstance(plan, _Chain):
            snames = tuple(names[b] for b in plan.split)
            keep = tuple(n for n in term.targets if n not in snames)
            first = ProbTerm(keep, term.given + snames, term.do)
            second = ProbTerm(snames, term.given, term.do)
            self._emit("chain", None, path, Product((first, second)))
            self.run(plan.second, path + (("factor", 1),))
            self.run(plan.first, path + (("factor", 0),))
        else:
            raise AssertionError(f"unknown plan node {plan!r}")


# -- known non-identifiable shapes ----------------------------------------

def _role_isomorphic(g1: CausalGraph, x1, y1,
                     g2: CausalGraph, x2, y2) -> bool:
    """Is there a bijection matching latency, edges, and the designated
    treatment/outcome roles?"""
    if len(g1.names) != len(g2.names) or len(g1.edges) != len(g2.edges):
        return False
    if len(g1.latent_names) != len(g2.latent_names):
        return False
    x1, y1 = frozenset(x1), frozenset(y1)
    x2, y2 = frozenset(x2), frozenset(y2)
    if (len(x1), len(y1)) != (len(x2), len(y2)):
        return False
    rest1 = [n for n in g1.names if n not in x1 | y1]
    rest2 = [n for n in g2.names if n not in x2 | y2]
    edges2 = set(g2.edges)

    def ok(mapping):
        for n in g1.names:
            if (n in g1.latent_names) != (mapping[n] in g2.latent_names):
                return False
        return all((mapping[t], mapping[h]) in edges2 for t, h in g1.edges)

    for px in permutations(sorted(x2)):
        for py in permutations(sorted(y2)):
            for pr in permutations(rest2):
                mapping = dict(zip(sorted(x1), px))
                mapping.update(zip(sorted(y1), py))
                mapping.update(zip(rest1, pr))
                if ok(mapping):
                    return True
    return False


def matches_non_identifiable_catalog(g: CausalGraph, X, Y) -> bool:
    from .catalog import catalog
    for entry in catalog():
        if entry.expectation.kind != "non-identifiable":
            continue
        if _role_isomorphic(g, X, Y, entry.graph,
                            entry.treatment, entry.outcome):
            return True
    return False


# -- top-level entry point --------------------------------------------------

def identify(query: Query, budget: int = DEFAULT_BUDGET,
             verify_models: int = 3) -> IdentificationResult:
    """Search for a do-free formula for p(outcome | do(treatment)).

    ``budget`` caps the number of derivation steps.  On success the
    formula is evaluated against the surgery oracle on ``verify_models``
    random models and must agree exactly.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    g = query.graph
    state = (frozenset(query.outcome), frozenset(),
             frozenset(query.treatment))
    searcher = _Searcher(g)
    got = None
    for limit in range(1, budget + 1):
        got = searcher.solve(state, limit)
        if got is not None:
            break
    if got is None:
        if matches_non_identifiable_catalog(g, query.treatment,
                                            query.outcome):
            return IdentificationResult(KNOWN_NON_IDENTIFIABLE, None, (),
                                        budget)
        return IdentificationResult(NOT_WITHIN_BUDGET, None, (), budget)

    root = ProbTerm(query.outcome, (), query.treatment)
    replay = _Replayer(g, root)
    replay.run(got[1], ())
    formula = tidy(replay.root)
    _verify(query, formula, verify_models)
    return IdentificationResult(IDENTIFIED, formula,
                                tuple(replay.steps), got[0])


def _verify(query: Query, formula: Expr, n_models: int) -> None:
    if not is_do_free(formula):
        raise EngineInvariantError("search returned a formula with "
                                   "interventions left")
    g = query.graph
    latent_refs = {base_name(n) for n in used_names(formula)} \
        & set(g.latent_names)
    if latent_refs:
        raise EngineInvariantError(
            f"formula mentions latent variables {sorted(latent_refs)}")
    for seed in range(1, n_models + 1):
        m = random_model(g, random.Random(seed))
        xdoms = [m.domains[x] for x in query.treatment]
        for xv in product(*xdoms):
            do = dict(zip(query.treatment, xv))
            oracle = m.do_marginal(do, query.outcome)
            ydoms = [m.domains[y] for y in query.outcome]
            for yv in product(*ydoms):
                binding = dict(do)
                binding.update(zip(query.outcome, yv))
                got = evaluate(formula, m, binding)
                want = oracle.p(dict(zip(query.outcome, yv)))
                if got != want:
                    raise EngineInvariantError(
                        f"formula disagrees with the surgery oracle at "
                        f"{binding!r}: {got} != {want}")
