"""Exact discrete structural causal models.

Mechanisms are conditional probability tables with exact rational
entries; a structural-equation form (deterministic map plus independent
noise) compiles losslessly into such a table.  The model generates the
full joint by multiplying the tables in topological order, performs
interventions by graph surgery, and is the ground-truth oracle that
every identification formula is verified against.

Probabilities are ``fractions.Fraction`` by default so correctness
checks are exact equalities.  A float mode (``DiscreteModel.to_float``)
exists for large tables; every operation is generic over the entry type.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Mapping, Sequence

from .graph import CausalGraph, GraphError, ScaleError

# Joint tables are materialized only up to this many cells; beyond that,
# operations refuse rather than silently approximate.
CELL_BUDGET = 2 ** 20

Value = object  # domain values are opaque hashables (str in the DSL)


class PositivityError(Exception):
    """A conditioning event has probability zero; never a silent 0/0."""


class ModelError(Exception):
    """Invalid mechanism or model construction."""


def _check_row(probs: Sequence, where: str) -> tuple:
    row = tuple(probs)
    if any(isinstance(p, float) for p in row):
        if abs(sum(row) - 1.0) > 1e-12:
            raise ModelError(f"row does not sum to 1 in {where}")
    else:
        row = tuple(Fraction(p) for p in row)
        if sum(row) != 1:
            raise ModelError(f"row does not sum to exactly 1 in {where}")
    if any(p < 0 for p in row):
        raise ModelError(f"negative probability in {where}")
    return row


@dataclass(frozen=True)
class Mechanism:
    """Conditional table for one child: parent assignment -> distribution
    over the child's domain (one probability per domain value, in order).
    """

    child: str
    parents: tuple[str, ...]
    table: Mapping[tuple, tuple]

    def row(self, parent_values: tuple) -> tuple:
        try:
            return self.table[parent_values]
        except KeyError:
            raise ModelError(
                f"mechanism for {self.child!r} has no row for parent "
                f"assignment {parent_values!r}") from None


@dataclass(frozen=True)
class StructuralEquationSpec:
    """Child = f(parent values, noise), noise with an exact distribution.

    ``noise`` maps each noise value to its probability; ``f`` must be
    total over parent-domain x noise-domain combinations.
    """

    child: str
    parents: tuple[str, ...]
    parent_domains: tuple[tuple, ...]
    noise: Mapping[Value, Fraction]
    f: Callable[[tuple, Value], Value]


def compile_mechanism(spec: StructuralEquationSpec,
                      child_domain: Sequence) -> Mechanism:
    """Fold the noise distribution through the deterministic map into a
    conditional table: P(child=v | pa) = sum of noise masses with
    f(pa, eps) = v."""
    noise = {e: Fraction(p) for e, p in spec.noise.items()}
    if sum(noise.values()) != 1:
        raise ModelError(f"noise distribution for {spec.child!r} "
                         "does not sum to 1")
    dom = tuple(child_domain)
    table = {}
    for pa in product(*spec.parent_domains):
        acc = {v: Fraction(0) for v in dom}
        for eps, mass in noise.items():
            try:
                v = spec.f(pa, eps)
            except Exception as exc:
                raise ModelError(
                    f"structural map for {spec.child!r} failed at "
                    f"(pa={pa!r}, noise={eps!r}): {exc}") from exc
            if v is None:
                raise ModelError(
                    f"structural map for {spec.child!r} is not total: "
                    f"missing cell (pa={pa!r}, noise={eps!r})")
            if v not in acc:
                raise ModelError(
                    f"structural map for {spec.child!r} returned {v!r} "
                    f"outside the child domain at (pa={pa!r}, noise={eps!r})")
            acc[v] += mass
        table[pa] = tuple(acc[v] for v in dom)
    return Mechanism(spec.child, spec.parents, table)


class JointDistribution:
    """Exact table over full assignments of a fixed variable order.

    Cells with zero probability may be omitted from ``probs``.
    """

    def __init__(self, variables: Sequence[str],
                 domains: Sequence[Sequence],
                 probs: Mapping[tuple, object], *, _validate: bool = True):
        self.variables = tuple(variables)
        self.domains = tuple(tuple(d) for d in domains)
        self.probs = {k: v for k, v in probs.items() if v}
        if _validate:
            total = sum(self.probs.values())
            exact = not any(isinstance(p, float) for p in self.probs.values())
            if exact and total != 1:
                raise ModelError(f"joint table sums to {total}, not 1")
            if not exact and abs(total - 1.0) > 1e-9:
                raise ModelError(f"joint table sums to {total}, not 1")

    def _positions(self, names: Iterable[str]) -> list[int]:
        idx = {n: i for i, n in enumerate(self.variables)}
        out = []
        for n in names:
            if n not in idx:
                raise GraphError(f"unknown variable {n!r} in distribution")
            out.append(idx[n])
        return out

    def p(self, assignment: Mapping[str, Value]):
        """Probability of a (possibly partial) assignment."""
        pos = self._positions(assignment)
        want = [assignment[self.variables[i]] for i in pos]
        zero = Fraction(0)
        total = zero
        for cell, pr in self.probs.items():
            if all(cell[i] == w for i, w in zip(pos, want)):
                total += pr
        return total

    def marginal(self, names: Iterable[str]) -> JointDistribution:
        keep = [n for n in self.variables if n in set(names)]
        pos = self._positions(keep)
        acc: dict[tuple, object] = {}
        for cell, pr in self.probs.items():
            key = tuple(cell[i] for i in pos)
            acc[key] = acc.get(key, 0) + pr
        doms = [self.domains[i] for i in pos]
        return JointDistribution(keep, doms, acc, _validate=False)

    def conditional(self, names: Iterable[str],
                    given: Mapping[str, Value]) -> JointDistribution:
        """Exact renormalized distribution of ``names`` given a partial
        assignment; zero-probability conditioning raises."""
        gpos = self._positions(given)
        want = [given[self.variables[i]] for i in gpos]
        keep = [n for n in self.variables
                if n in set(names) and n not in given]
        kpos = self._positions(keep)
        acc: dict[tuple, object] = {}
        norm = 0
        for cell, pr in self.probs.items():
            if all(cell[i] == w for i, w in zip(gpos, want)):
                norm += pr
                key = tuple(cell[i] for i in kpos)
                acc[key] = acc.get(key, 0) + pr
        if norm == 0:
            ev = ",".join(f"{self.variables[i]}={v!r}"
                          for i, v in zip(gpos, want))
            raise PositivityError(f"conditioning event ({ev}) "
                                  "has probability zero")
        out = {k: v / norm for k, v in acc.items()}
        doms = [self.domains[i] for i in kpos]
        return JointDistribution(keep, doms, out, _validate=False)

    def assignments(self) -> Iterable[tuple]:
        return product(*self.domains)

    def total(self):
        return sum(self.probs.values())

    def total_variation(self, other: JointDistribution):
        assert self.variables == other.variables
        keys = set(self.probs) | set(other.probs)
        diff = sum(abs(Fraction(self.probs.get(k, 0))
                       - Fraction(other.probs.get(k, 0))) for k in keys)
        return diff / 2

    def __eq__(self, other) -> bool:
        return (isinstance(other, JointDistribution)
                and self.variables == other.variables
                and self.probs == other.probs)

    def __repr__(self) -> str:
        return (f"JointDistribution({','.join(self.variables)}; "
                f"{len(self.probs)} nonzero cells)")


def dependence_gap(j: JointDistribution, X: Iterable[str], Y: Iterable[str],
                   Z: Iterable[str] = ()):
    """Largest violation of p(x,y|z) = p(x|z) p(y|z) over assignments with
    positive p(z).  Zero iff X and Y are independent given Z."""
    xs, ys, zs = tuple(X), tuple(Y), tuple(Z)
    if set(xs) & set(ys) or set(xs) & set(zs) or set(ys) & set(zs):
        raise GraphError("independence query needs disjoint sets")
    jm = j.marginal(set(xs) | set(ys) | set(zs))
    worst = Fraction(0)
    z_marg = jm.marginal(zs)
    for z_cell in product(*(z_marg.domains or [()])) if zs else [()]:
        given = dict(zip(zs, z_cell))
        if zs and z_marg.p(given) == 0:
            continue
        cond = jm.conditional(set(xs) | set(ys), given) if zs else jm
        cx = cond.marginal(xs)
        cy = cond.marginal(ys)
        for cell in cond.assignments():
            a = dict(zip(cond.variables, cell))
            lhs = cond.p(a)
            rhs = cx.p({k: a[k] for k in xs}) * cy.p({k: a[k] for k in ys})
            gap = abs(lhs - rhs)
            if gap > worst:
                worst = gap
    return worst


def independent(j: JointDistribution, X: Iterable[str], Y: Iterable[str],
                Z: Iterable[str] = (), tol=0) -> bool:
    """Exact conditional-independence check on a joint table.

    In rational mode ``tol`` is ignored and the factorization must hold
    exactly; for float tables pass a tolerance.
    """
    return dependence_gap(j, X, Y, Z) <= tol


@dataclass(frozen=True)
class Dataset:
    variables: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.variables)
        w.writerows(self.rows)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> Dataset:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ModelError("empty dataset")
        return cls(tuple(rows[0]), tuple(tuple(r) for r in rows[1:]))


class DiscreteModel:
    """A causal graph, per-variable finite domains, and one mechanism per
    variable (latent variables carry mechanisms too)."""

    def __init__(self, graph: CausalGraph,
                 domains: Mapping[str, Sequence],
                 mechanisms: Mapping[str, Mechanism]):
        self.graph = graph
        self.domains = {n: tuple(domains[n]) for n in graph.names}
        for n in graph.names:
            if n not in domains:
                raise ModelError(f"no domain for variable {n!r}")
            if len(self.domains[n]) < 2:
                raise ModelError(f"domain of {n!r} needs at least 2 values")
            if len(set(self.domains[n])) != len(self.domains[n]):
                raise ModelError(f"domain of {n!r} has repeated values")
        self.mechanisms: dict[str, Mechanism] = {}
        for n in graph.names:
            m = mechanisms.get(n)
            if m is None:
                raise ModelError(f"no mechanism for variable {n!r}")
            if set(m.parents) != set(graph.parents(n)):
                raise ModelError(
                    f"mechanism parents {sorted(m.parents)} for {n!r} do not "
                    f"match graph parents {sorted(graph.parents(n))}")
            expect = 1
            for p in m.parents:
                expect *= len(self.domains[p])
            if len(m.table) != expect:
                raise ModelError(
                    f"mechanism for {n!r} has {len(m.table)} rows, "
                    f"expected {expect}")
            for pa, row in m.table.items():
                if len(row) != len(self.domains[n]):
                    raise ModelError(
                        f"row {pa!r} for {n!r} has {len(row)} entries, "
                        f"domain has {len(self.domains[n])}")
                _check_row(row, f"mechanism for {n!r}, row {pa!r}")
            self.mechanisms[n] = m
        self._joint: JointDistribution | None = None

    # -- construction helpers -----------------------------------------

    @classmethod
    def from_tables(cls, graph: CausalGraph,
                    domains: Mapping[str, Sequence],
                    tables: Mapping[str, Mapping[tuple, Sequence]],
                    parent_order: Mapping[str, Sequence[str]] | None = None
                    ) -> DiscreteModel:
        """Build from raw row dictionaries; parent order defaults to
        declaration order."""
        mechs = {}
        for n in graph.names:
            ps = tuple((parent_order or {}).get(n) or
                       graph.ordered(graph.parents(n)))
            rows = {tuple(k) if isinstance(k, tuple) else (k,) if k != ()
                    else (): tuple(v) for k, v in tables[n].items()}
            norm = {k: _check_row(v, f"mechanism for {n!r}, row {k!r}")
                    for k, v in rows.items()}
            mechs[n] = Mechanism(n, ps, norm)
        return cls(graph, domains, mechs)

    def cells(self) -> int:
        total = 1
        for n in self.graph.names:
            total *= len(self.domains[n])
        return total

    def _budget_check(self):
        if self.cells() > CELL_BUDGET:
            raise ScaleError(
                f"joint table would need {self.cells()} cells, over the "
                f"{CELL_BUDGET}-cell budget; refusing to materialize")

    def prob_given_parents(self, name: str, value: Value,
                           assignment: Mapping[str, Value]):
        m = self.mechanisms[name]
        pa = tuple(assignment[p] for p in m.parents)
        return m.row(pa)[self.domains[name].index(value)]

    # -- core operations ------------------------------------------------

    def joint(self) -> JointDistribution:
        """Full joint table: product of the conditional tables."""
        if self._joint is not None:
            return self._joint
        self._budget_check()
        names = self.graph.names
        doms = [self.domains[n] for n in names]
        probs: dict[tuple, object] = {}
        for cell in product(*doms):
            a = dict(zip(names, cell))
            pr = 1
            for n in names:
                pr = pr * self.prob_given_parents(n, a[n], a)
                if pr == 0:
                    break
            if pr:
                probs[cell] = pr
        self._joint = JointDistribution(names, doms, probs)
        return self._joint

    def truncated(self, target: str, value: Value) -> JointDistribution:
        """Post-intervention joint via the truncated product: drop the
        target's own factor, zero out assignments with target != value.

        The product form sidesteps division by zero-probability rows.
        """
        self.graph.index(target)
        if value not in self.domains[target]:
            raise ModelError(f"{value!r} not in domain of {target!r}")
        self._budget_check()
        names = self.graph.names
        doms = [self.domains[n] for n in names]
        probs: dict[tuple, object] = {}
        for cell in product(*doms):
            a = dict(zip(names, cell))
            if a[target] != value:
                continue
            pr = 1
            for n in names:
                if n == target:
                    continue
                pr = pr * self.prob_given_parents(n, a[n], a)
                if pr == 0:
                    break
            if pr:
                probs[cell] = pr
        return JointDistribution(names, doms, probs)

    def intervene(self, assignments: Mapping[str, Value]) -> DiscreteModel:
        """Graph surgery: cut edges into the assigned variables and pin
        their mechanisms to point masses.  Repeated intervention on the
        same variable keeps the last value."""
        for n, v in assignments.items():
            self.graph.index(n)
            if v not in self.domains[n]:
                raise ModelError(f"{v!r} not in domain of {n!r}")
        if not assignments:
            return self
        g = self.graph.mutilate(cut_incoming=assignments)
        mechs = dict(self.mechanisms)
        for n, v in assignments.items():
            row = tuple(Fraction(1) if d == v else Fraction(0)
                        for d in self.domains[n])
            mechs[n] = Mechanism(n, (), {(): row})
        return DiscreteModel(g, self.domains, mechs)

    def do_marginal(self, do: Mapping[str, Value],
                    targets: Iterable[str]) -> JointDistribution:
        """Interventional marginal p(targets | do(...)), by surgery.

        This is the oracle every identification formula is checked
        against.
        """
        return self.intervene(do).joint().marginal(targets)

    # -- sampling --------------------------------------------------------

    def sample(self, seed: int, n: int) -> Dataset:
        """Forward ancestral sampling; deterministic for a given seed."""
        if n < 1:
            raise ModelError("need at least one sample")
        rng = random.Random(seed)
        order = [v.name for v in self.graph.topological_order()]
        rows = []
        for _ in range(n):
            a: dict[str, Value] = {}
            for name in order:
                m = self.mechanisms[name]
                row = m.row(tuple(a[p] for p in m.parents))
                r = rng.random()
                acc = 0.0
                val = self.domains[name][-1]
                for v, p in zip(self.domains[name], row):
                    acc += float(p)
                    if r < acc:
                        val = v
                        break
                a[name] = val
            rows.append(tuple(a[x] for x in self.graph.names))
        return Dataset(self.graph.names, tuple(rows))

    def to_float(self) -> DiscreteModel:
        mechs = {
            n: Mechanism(m.child, m.parents,
                         {k: tuple(float(p) for p in row)
                          for k, row in m.table.items()})
            for n, m in self.mechanisms.items()}
        return DiscreteModel(self.graph, self.domains, mechs)

    def __repr__(self) -> str:
        return f"DiscreteModel({self.graph!r})"


def fit(variables: Sequence[str], domains: Mapping[str, Sequence],
        data: Dataset) -> JointDistribution:
    """Empirical joint: exact frequencies count/n over the given shape."""
    pos = [data.variables.index(v) for v in variables]
    counts: dict[tuple, int] = {}
    for row in data.rows:
        key = tuple(row[i] for i in pos)
        counts[key] = counts.get(key, 0) + 1
    n = len(data.rows)
    probs = {k: Fraction(c, n) for k, c in counts.items()}
    return JointDistribution(variables, [domains[v] for v in variables],
                             probs)


def graft_coin(model: DiscreteModel, treatment: str,
               coin: str = "C") -> DiscreteModel:
    """Randomize a treatment: add a uniform coin node as the treatment's
    only parent and make the treatment copy it, as a trial randomizer
    would.  The coin's domain mirrors the treatment's."""
    g = model.graph
    g.index(treatment)
    if coin in g.names:
        raise ModelError(f"variable {coin!r} already exists")
    kept = [(t, h) for t, h in g.edges if h != treatment]
    kept.append((coin, treatment))
    from .graph import Variable
    g2 = CausalGraph(g.variables + (Variable(coin),), kept)
    dom = model.domains[treatment]
    doms = dict(model.domains)
    doms[coin] = dom
    mechs = dict(model.mechanisms)
    uniform = tuple(Fraction(1, len(dom)) for _ in dom)
    mechs[coin] = Mechanism(coin, (), {(): uniform})
    mechs[treatment] = Mechanism(
        treatment, (coin,),
        {(c,): tuple(Fraction(1) if d == c else Fraction(0) for d in dom)
         for c in dom})
    return DiscreteModel(g2, doms, mechs)


def random_model(graph: CausalGraph, rng: random.Random,
                 cards: Sequence[int] = (2,),
                 max_weight: int = 9) -> DiscreteModel:
    """Random strictly positive rational model over a graph.

    Every conditional row is drawn from integer weights in
    [1, max_weight], so all events have positive probability and all
    arithmetic stays exact.
    """
    domains = {n: tuple(range(rng.choice(list(cards))))
               for n in graph.names}
    mechs = {}
    for n in graph.names:
        ps = graph.ordered(graph.parents(n))
        table = {}
        for pa in product(*[domains[p] for p in ps]):
            w = [rng.randint(1, max_weight) for _ in domains[n]]
            s = sum(w)
            table[pa] = tuple(Fraction(x, s) for x in w)
        mechs[n] = Mechanism(n, ps, table)
    return DiscreteModel(graph, domains, mechs)
