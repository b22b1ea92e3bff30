"""Directed acyclic graphs over named random variables.

Nodes are partitioned into observed and latent variables.  Latent
confounders are ordinary latent nodes; a declared bidirected arc
``A <-> B`` is expanded into a fresh latent parent of both endpoints, so
one graph type serves every criterion.

Graphs are immutable after construction and all operations are pure, so
values can be shared freely across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")
_RESERVED_RE = re.compile(r"__[0-9]+$")  # the formula layer's primed form

# Node-count ceiling for exhaustive path enumeration; the enumerator is
# meant for oracles and tests, production queries use reachability.
PATH_ENUM_GUARD = 16


class GraphError(Exception):
    """Invalid graph construction, or a query naming an unknown variable."""


class ScaleError(Exception):
    """An exhaustive operation was asked to run beyond its size guard."""


@dataclass(frozen=True)
class Variable:
    name: str
    latent: bool = False

    @property
    def observed(self) -> bool:
        return not self.latent


def _as_variable(spec) -> Variable:
    if isinstance(spec, Variable):
        return spec
    if isinstance(spec, str):
        return Variable(spec)
    name, latent = spec
    return Variable(name, bool(latent))


class CausalGraph:
    """A DAG with observed/latent node labels.

    ``variables`` fixes the declaration order used for every
    deterministic ordering downstream.  ``edges`` are (tail, head)
    pairs; ``bidirected`` pairs expand into fresh latent common causes.
    """

    def __init__(self, variables: Iterable, edges: Iterable = (),
                 bidirected: Iterable = ()):
        vs = [_as_variable(v) for v in variables]
        es = [tuple(e) for e in edges]
        for a, b in bidirected:
            u = self._fresh_confounder_name(a, b, {v.name for v in vs})
            vs.append(Variable(u, latent=True))
            es.append((u, a))
            es.append((u, b))

        seen: set[str] = set()
        for v in vs:
            if not NAME_RE.match(v.name):
                raise GraphError(f"invalid variable name {v.name!r}")
            if _RESERVED_RE.search(v.name):
                raise GraphError(
                    f"variable name {v.name!r} ends in a reserved "
                    "__<digits> suffix")
            if v.name in seen:
                raise GraphError(f"duplicate variable {v.name!r}")
            seen.add(v.name)
        self.variables: tuple[Variable, ...] = tuple(vs)
        self.names: tuple[str, ...] = tuple(v.name for v in vs)
        self._index: dict[str, int] = {n: i for i, n in enumerate(self.names)}
        self.latent_names: frozenset[str] = frozenset(
            v.name for v in vs if v.latent)
        self.observed_names: tuple[str, ...] = tuple(
            v.name for v in vs if not v.latent)

        for t, h in es:
            if t not in self._index:
                raise GraphError(f"unknown variable {t!r} in edge {t}->{h}")
            if h not in self._index:
                raise GraphError(f"unknown variable {h!r} in edge {t}->{h}")
            if t == h:
                raise GraphError(f"self-loop on {t!r}")
        if len(set(es)) != len(es):
            raise GraphError("duplicate edge")
        self.edges: tuple[tuple[str, str], ...] = tuple(
            sorted(es, key=lambda e: (self._index[e[0]], self._index[e[1]])))

        pa: dict[str, set[str]] = {n: set() for n in self.names}
        ch: dict[str, set[str]] = {n: set() for n in self.names}
        for t, h in self.edges:
            pa[h].add(t)
            ch[t].add(h)
        self._parents = {n: frozenset(s) for n, s in pa.items()}
        self._children = {n: frozenset(s) for n, s in ch.items()}
        self._topo = self._topological_names()

    @staticmethod
    def _fresh_confounder_name(a: str, b: str, taken: set[str]) -> str:
        base = f"U_{a}_{b}"
        name, k = base, 1
        while name in taken:
            k += 1
            name = f"{base}_{k}"
        return name

    # -- basic queries ------------------------------------------------

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GraphError(f"unknown variable {name!r}") from None

    def ordered(self, names: Iterable[str]) -> tuple[str, ...]:
        """Sort names by declaration order (the canonical output order)."""
        return tuple(sorted(names, key=self.index))

    def is_latent(self, name: str) -> bool:
        self.index(name)
        return name in self.latent_names

    def has_edge(self, tail: str, head: str) -> bool:
        return tail in self._parents.get(head, frozenset())

    def adjacent(self, a: str, b: str) -> bool:
        return self.has_edge(a, b) or self.has_edge(b, a)

    def parents(self, v: str) -> frozenset[str]:
        self.index(v)
        return self._parents[v]

    def children(self, v: str) -> frozenset[str]:
        self.index(v)
        return self._children[v]

    def _closure(self, seed, step) -> frozenset[str]:
        seeds = {seed} if isinstance(seed, str) else set(seed)
        for n in seeds:
            self.index(n)
        out: set[str] = set()
        stack = list(seeds)
        while stack:
            v = stack.pop()
            for w in step(v):
                if w not in out:
                    out.add(w)
                    stack.append(w)
        return frozenset(out - seeds)

    def ancestors(self, seed) -> frozenset[str]:
        """Proper ancestors of the seed set (the seeds are excluded)."""
        return self._closure(seed, lambda v: self._parents[v])

    def descendants(self, seed) -> frozenset[str]:
        """Proper descendants of the seed set (the seeds are excluded)."""
        return self._closure(seed, lambda v: self._children[v])

    def _topological_names(self) -> tuple[str, ...]:
        indeg = {n: len(self._parents[n]) for n in self.names}
        order: list[str] = []
        placed: set[str] = set()
        while len(order) < len(self.names):
            # declaration order breaks ties, giving a stable result
            ready = [n for n in self.names
                     if n not in placed and indeg[n] == 0]
            if not ready:
                raise GraphError("graph contains a directed cycle")
            v = ready[0]
            placed.add(v)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
        return tuple(order)

    def topological_order(self) -> tuple[Variable, ...]:
        return tuple(self.variables[self._index[n]] for n in self._topo)

    def skeleton(self) -> frozenset[tuple[str, str]]:
        """Undirected edge set; each pair in declaration order."""
        return frozenset(tuple(self.ordered(e)) for e in self.edges)

    def v_structures(self) -> frozenset[tuple[str, str, str]]:
        """Colliders i->m<-j whose tails i, j are nonadjacent.

        Triples are canonicalized with i before j in declaration order.
        """
        out = set()
        for m in self.names:
            ps = self.ordered(self._parents[m])
            for i in range(len(ps)):
                for j in range(i + 1, len(ps)):
                    if not self.adjacent(ps[i], ps[j]):
                        out.add((ps[i], m, ps[j]))
        return frozenset(out)

    # -- surgery ------------------------------------------------------

    def mutilate(self, cut_incoming: Iterable[str] = (),
                 cut_outgoing: Iterable[str] = ()) -> CausalGraph:
        """Drop edges into ``cut_incoming`` nodes and out of ``cut_outgoing``.

        A node may appear in both sets.  The original graph is unchanged.
        """
        ci = frozenset(cut_incoming)
        co = frozenset(cut_outgoing)
        for n in ci | co:
            self.index(n)
        kept = [(t, h) for t, h in self.edges if h not in ci and t not in co]
        return CausalGraph(self.variables, kept)

    def with_edge(self, tail: str, head: str) -> CausalGraph:
        self.index(tail)
        self.index(head)
        return CausalGraph(self.variables, self.edges + ((tail, head),))

    def without_edge(self, tail: str, head: str) -> CausalGraph:
        if not self.has_edge(tail, head):
            raise GraphError(f"no edge {tail}->{head}")
        kept = [e for e in self.edges if e != (tail, head)]
        return CausalGraph(self.variables, kept)

    def splice(self, tail: str, head: str, name: str,
               latent: bool = False) -> CausalGraph:
        """Replace the edge tail->head by tail->name->head."""
        if not self.has_edge(tail, head):
            raise GraphError(f"no edge {tail}->{head}")
        kept = [e for e in self.edges if e != (tail, head)]
        kept += [(tail, name), (name, head)]
        return CausalGraph(self.variables + (Variable(name, latent),), kept)

    def z_hat(self, X: Iterable[str], Z: Iterable[str],
              W: Iterable[str]) -> frozenset[str]:
        """Z-nodes that are not ancestors of any W-node once edges into X
        are cut."""
        xs, zs, ws = frozenset(X), frozenset(Z), frozenset(W)
        if xs & zs or xs & ws or zs & ws:
            raise GraphError("X, Z, W must be pairwise disjoint")
        g = self.mutilate(cut_incoming=xs)
        anc_w = g.ancestors(ws) if ws else frozenset()
        return frozenset(z for z in zs if z not in anc_w)

    # -- path enumeration (oracle scale) --------------------------------

    def paths_between(self, a: str, b: str,
                      max_nodes: int = PATH_ENUM_GUARD) -> Iterator[Path]:
        """Yield every path between two distinct nodes, depth first.

        Exponential in graph size; guarded by ``max_nodes`` because it
        exists for oracle comparisons, not production queries.
        """
        self.index(a)
        self.index(b)
        if a == b:
            raise GraphError("path endpoints must be distinct")
        if len(self.names) > max_nodes:
            raise ScaleError(
                f"path enumeration limited to {max_nodes} nodes "
                f"(graph has {len(self.names)})")

        def neighbors(v: str) -> list[tuple[str, bool]]:
            fwd = [(w, True) for w in self.ordered(self._children[v])]
            bwd = [(w, False) for w in self.ordered(self._parents[v])]
            return fwd + bwd

        def walk(v, nodes, dirs):
            for w, forward in neighbors(v):
                if w in nodes:
                    continue
                nd, dd = nodes + (w,), dirs + (forward,)
                if w == b:
                    yield Path(nd, dd)
                else:
                    yield from walk(w, nd, dd)

        yield from walk(a, (a,), ())

    def confounding_arcs(self, max_nodes: int = PATH_ENUM_GUARD
                         ) -> tuple[Path, ...]:
        """Collider-free paths joining two observed nodes through latent
        interior nodes only."""
        arcs = []
        obs = self.observed_names
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                for p in self.paths_between(obs[i], obs[j], max_nodes):
                    interior = p.nodes[1:-1]
                    if not interior:
                        continue
                    if any(n not in self.latent_names for n in interior):
                        continue
                    if any(p.junction(k) == "collider"
                           for k in range(1, len(p.nodes) - 1)):
                        continue
                    arcs.append(p)
        arcs.sort(key=lambda p: (self.index(p.nodes[0]),
                                 self.index(p.nodes[-1]),
                                 len(p.nodes),
                                 tuple(self.index(n) for n in p.nodes)))
        return tuple(arcs)

    # -- equality / repr ------------------------------------------------

    def __eq__(self, other) -> bool:
        return (isinstance(other, CausalGraph)
                and self.variables == other.variables
                and self.edges == other.edges)

    def __hash__(self) -> int:
        return hash((self.variables, self.edges))

    def __repr__(self) -> str:
        es = ", ".join(f"{t}->{h}" for t, h in self.edges)
        return f"CausalGraph({'.'.join(self.names)}; {es})"


@dataclass(frozen=True)
class Path:
    """A sequence of consecutive edges traversed in either direction.

    ``forward[i]`` is True when the i-th edge points nodes[i]->nodes[i+1].
    Paths have at least one edge and never repeat a node.
    """

    nodes: tuple[str, ...]
    forward: tuple[bool, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise GraphError("a path needs at least one edge")
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("a path may not repeat a node")
        if len(self.forward) != len(self.nodes) - 1:
            raise GraphError("malformed path: direction per edge required")

    @classmethod
    def from_nodes(cls, g: CausalGraph, nodes: Iterable[str]) -> Path:
        ns = tuple(nodes)
        dirs = []
        for a, b in zip(ns, ns[1:]):
            if g.has_edge(a, b):
                dirs.append(True)
            elif g.has_edge(b, a):
                dirs.append(False)
            else:
                raise GraphError(f"no edge between {a!r} and {b!r}")
        return cls(ns, tuple(dirs))

    def validate(self, g: CausalGraph) -> None:
        for (a, b), fwd in zip(zip(self.nodes, self.nodes[1:]), self.forward):
            t, h = (a, b) if fwd else (b, a)
            if not g.has_edge(t, h):
                raise GraphError(f"edge {t}->{h} not in graph")

    def junction(self, i: int) -> str:
        """Junction type at interior node i: chain, fork or collider."""
        if not 0 < i < len(self.nodes) - 1:
            raise GraphError(f"node {i} is not interior")
        into_left = self.forward[i - 1]      # arrow points into nodes[i]
        out_right = self.forward[i]          # arrow leaves nodes[i]
        if into_left and not out_right:
            return "collider"
        if not into_left and out_right:
            return "fork"
        return "chain"

    def render(self) -> str:
        parts = [self.nodes[0]]
        for fwd, n in zip(self.forward, self.nodes[1:]):
            parts.append("->" if fwd else "<-")
            parts.append(n)
        return " ".join(parts)


@dataclass(frozen=True)
class PartiallyDirectedGraph:
    """Mixed graph: some edges oriented, some left undirected."""

    variables: tuple[Variable, ...]
    directed: tuple[tuple[str, str], ...]
    undirected: tuple[tuple[str, str], ...]

    def __post_init__(self):
        und = {frozenset(e) for e in self.undirected}
        dire = {frozenset(e) for e in self.directed}
        if und & dire:
            raise GraphError("an edge cannot be both directed and undirected")
