"""Design language: alphabet, concepts, rules and the bounded interpretation.

A concept is a typed component graph. Nodes are component instances with a
kind and a property map; edges run from an output port of one node to an
input port of another. Each input port has at most one driver, which is part
of well-typedness rather than a rule. Rules are pure filters written in a
small terminating constraint language (see :func:`compile_constraint`).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple

from . import textio
from .errors import BudgetExceededError, UnknownReferenceError, UnknownSymbolError

SYMBOL_KINDS = ("component-kind", "port", "connective", "property")
RULE_CATEGORIES = ("formal", "conceptual")
DEFAULT_ENUMERATION_CEILING = 2_000_000


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str
    inputs: tuple = ()
    outputs: tuple = ()
    properties: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ValueError("symbol name must be a non-empty string")
        if self.kind not in SYMBOL_KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")

    def to_obj(self):
        obj = {"name": self.name, "kind": self.kind}
        if self.kind == "component-kind":
            obj.update(inputs=list(self.inputs), outputs=list(self.outputs),
                       properties=list(self.properties))
        if self.kind == "property":
            obj["values"] = list(self.values)
        return obj

    @classmethod
    def from_obj(cls, obj):
        return cls(obj["name"], obj["kind"], tuple(obj.get("inputs", ())),
                   tuple(obj.get("outputs", ())), tuple(obj.get("properties", ())),
                   tuple(obj.get("values", ())))


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        names = [s.name for s in self.symbols]
        if len(set(names)) != len(names):
            raise ValueError("symbol names must be unique within an alphabet")
        index = {s.name: s for s in self.symbols}
        for s in self.symbols:
            if s.kind != "component-kind":
                continue
            for p in s.inputs + s.outputs:
                if index.get(p) is None or index[p].kind != "port":
                    raise UnknownSymbolError(f"{s.name}: port {p!r} is not a declared port")
            for p in s.properties:
                if index.get(p) is None or index[p].kind != "property":
                    raise UnknownSymbolError(f"{s.name}: property {p!r} is not declared")
        object.__setattr__(self, "_index", index)

    def __getitem__(self, name):
        return self._index[name]

    def get(self, name):
        return self._index.get(name)

    def has(self, name, kind=None):
        s = self._index.get(name)
        return s is not None and (kind is None or s.kind == kind)

    @property
    def kinds(self):
        return tuple(s for s in self.symbols if s.kind == "component-kind")

    def node_types(self):
        """Every (kind, props) label a node can carry, in a fixed order."""
        out = []
        for k in sorted(self.kinds, key=lambda s: s.name):
            domains = [[(p, v) for v in self[p].values] for p in k.properties]
            for combo in itertools.product(*domains):
                out.append((k.name, tuple(sorted(combo))))
        return out

    def to_obj(self):
        return {"symbols": [s.to_obj() for s in self.symbols]}

    @classmethod
    def from_obj(cls, obj):
        return cls(tuple(Symbol.from_obj(s) for s in obj["symbols"]))


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    props: tuple = ()

    def prop(self, name, default=None):
        for k, v in self.props:
            if k == name:
                return v
        return default


class Edge(NamedTuple):
    src: str
    src_port: str
    dst: str
    dst_port: str


def _value_key(v):
    return json.dumps(v, sort_keys=True)


@dataclass(frozen=True)
class Concept:
    """Immutable component graph; ``Concept()`` is the empty concept."""

    nodes: tuple = ()
    edges: tuple = ()

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise UnknownReferenceError(f"duplicate instance ids in {ids}")
        idset = set(ids)
        drivers = set()
        for e in self.edges:
            if e.src not in idset or e.dst not in idset:
                raise UnknownReferenceError(f"edge {tuple(e)} references a missing node")
            if (e.dst, e.dst_port) in drivers:
                raise UnknownReferenceError(f"input {e.dst}.{e.dst_port} has two drivers")
            drivers.add((e.dst, e.dst_port))

    @classmethod
    def build(cls, nodes=(), edges=()):
        nodes = [n if isinstance(n, Node) else
                 Node(n[0], n[1], tuple(sorted(dict(n[2] if len(n) > 2 else {}).items())))
                 for n in nodes]
        nodes = tuple(sorted(nodes, key=lambda n: n.id))
        edges = tuple(sorted(Edge(*e) for e in edges))
        return cls(nodes, edges)

    @property
    def is_empty(self):
        return not self.nodes and not self.edges

    def __len__(self):
        return len(self.nodes)

    @cached_property
    def by_id(self):
        return {n.id: n for n in self.nodes}

    @cached_property
    def driver_of(self):
        return {(e.dst, e.dst_port): (e.src, e.src_port) for e in self.edges}

    def count(self, kind):
        return sum(1 for n in self.nodes if n.kind == kind)

    def fresh_id(self):
        used = set(self.by_id)
        i = len(self.nodes)
        while f"n{i}" in used:
            i += 1
        return f"n{i}"

    def add_node(self, kind, props=(), node_id=None):
        node_id = node_id or self.fresh_id()
        node = Node(node_id, kind, tuple(sorted(dict(props).items())))
        return Concept(tuple(sorted(self.nodes + (node,), key=lambda n: n.id)), self.edges), node_id

    def add_edge(self, src, src_port, dst, dst_port):
        return Concept(self.nodes, tuple(sorted(self.edges + (Edge(src, src_port, dst, dst_port),))))

    def set_prop(self, node_id, prop, value):
        nodes = []
        for n in self.nodes:
            if n.id == node_id:
                d = dict(n.props)
                d[prop] = value
                n = Node(n.id, n.kind, tuple(sorted(d.items())))
            nodes.append(n)
        return Concept(tuple(nodes), self.edges)

    def to_obj(self):
        return {
            "nodes": [{"id": n.id, "kind": n.kind, "props": dict(n.props)} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_obj(cls, obj):
        nodes = [Node(n["id"], n["kind"], tuple(sorted(n.get("props", {}).items())))
                 for n in obj.get("nodes", ())]
        return cls.build(nodes, [tuple(e) for e in obj.get("edges", ())])

    @cached_property
    def text(self):
        """Compact canonical JSON; the tie-break order for frontiers."""
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))

    @cached_property
    def digest(self):
        return textio.content_hash(self.to_obj())

    def __repr__(self):
        if self.is_empty:
            return "Concept(⊤)"
        return f"Concept({self.text})"


TOP = Concept()


def check_concept(c: Concept, alphabet: Alphabet):
    """Raise UnknownSymbolError unless every symbol and port in ``c`` is declared."""
    for n in c.nodes:
        k = alphabet.get(n.kind)
        if k is None or k.kind != "component-kind":
            raise UnknownSymbolError(f"node {n.id}: unknown component kind {n.kind!r}")
        for p, v in n.props:
            if p not in k.properties:
                raise UnknownSymbolError(f"node {n.id}: kind {n.kind} has no property {p!r}")
            if v not in alphabet[p].values:
                raise UnknownSymbolError(f"node {n.id}: {p}={v!r} outside the declared domain")
    for e in c.edges:
        src = alphabet[c.by_id[e.src].kind]
        dst = alphabet[c.by_id[e.dst].kind]
        if e.src_port not in src.outputs:
            raise UnknownSymbolError(f"{e.src} ({src.name}) has no output port {e.src_port!r}")
        if e.dst_port not in dst.inputs:
            raise UnknownSymbolError(f"{e.dst} ({dst.name}) has no input port {e.dst_port!r}")


# -- canonical form ---------------------------------------------------------

def _label(n: Node):
    return (n.kind, tuple((p, _value_key(v)) for p, v in n.props))


def _refine(colors, out_adj, in_adj):
    n = len(colors)
    distinct = len(set(colors))
    while True:
        sigs = [
            (colors[i],
             tuple(sorted((sp, dp, colors[j]) for sp, dp, j in out_adj[i])),
             tuple(sorted((sp, dp, colors[j]) for sp, dp, j in in_adj[i])))
            for i in range(n)
        ]
        rank = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [rank[s] for s in sigs]
        if len(rank) == distinct:
            return new
        colors, distinct = new, len(rank)


def _canonical_key(c: Concept):
    nodes = c.nodes
    n = len(nodes)
    index = {node.id: i for i, node in enumerate(nodes)}
    labels = [_label(node) for node in nodes]
    out_adj = [[] for _ in range(n)]
    in_adj = [[] for _ in range(n)]
    for e in c.edges:
        i, j = index[e.src], index[e.dst]
        out_adj[i].append((e.src_port, e.dst_port, j))
        in_adj[j].append((e.src_port, e.dst_port, i))
    rank = {lab: r for r, lab in enumerate(sorted(set(labels)))}

    def leaf(colors):
        order = sorted(range(n), key=lambda i: colors[i])
        pos = {v: k for k, v in enumerate(order)}
        key = (tuple(labels[v] for v in order),
               tuple(sorted((pos[index[e.src]], e.src_port, pos[index[e.dst]], e.dst_port)
                            for e in c.edges)))
        return key, order

    def search(colors):
        colors = _refine(colors, out_adj, in_adj)
        if len(set(colors)) == n:
            return leaf(colors)
        cells = {}
        for v, col in enumerate(colors):
            cells.setdefault(col, []).append(v)
        target = min(col for col, members in cells.items() if len(members) > 1)
        best = None
        for v in cells[target]:
            indiv = [2 * col + 1 for col in colors]
            indiv[v] = 2 * target
            cand = search(indiv)
            if best is None or cand[0] < best[0]:
                best = cand
        return best

    return search([rank[lab] for lab in labels])


@lru_cache(maxsize=200_000)
def canonical_form(c: Concept) -> Concept:
    """Relabel instance ids to ``n0..n{k-1}`` in a labelling-independent order.

    Colour refinement plus individualisation; the minimum leaf key over the
    search tree is returned, so isomorphic inputs give identical output.
    """
    if c.is_empty:
        return c
    _, order = _canonical_key(c)
    rename = {c.nodes[v].id: f"n{k}" for k, v in enumerate(order)}
    nodes = tuple(Node(rename[node.id], node.kind, node.props) for node in c.nodes)
    nodes = tuple(sorted(nodes, key=lambda node: node.id))
    edges = tuple(sorted(Edge(rename[e.src], e.src_port, rename[e.dst], e.dst_port) for e in c.edges))
    return Concept(nodes, edges)


# -- constraint language ----------------------------------------------------

_OPS = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def _acyclic(c: Concept):
    succ = {n.id: [] for n in c.nodes}
    indeg = {n.id: 0 for n in c.nodes}
    for e in c.edges:
        succ[e.src].append(e.dst)
        indeg[e.dst] += 1
    ready = [v for v, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return seen == len(c.nodes)


def _kind_match(pattern, kind):
    return pattern == "*" or kind == pattern


def _props_match(node, props):
    return all(node.prop(k) == v for k, v in props.items())


def compile_constraint(expr, alphabet: Alphabet):
    """Validate ``expr`` against ``alphabet`` and return a predicate on concepts.

    Expressions are JSON lists ``[op, *args]``::

        ["true"] ["false"] ["and", e...] ["or", e...] ["not", e]
        ["count", kind|"*", cmp, n, {prop: value}?]   nodes of a kind
        ["edges", cmp, n]                               total edge count
        ["edge", "K.port", "K.port"]                    some edge of that shape
        ["node", id, [kind...]]                         instance id has a kind
        ["prop", kind, prop, value]                     some node carries value
        ["distinct", kind, prop]                        values pairwise distinct
        ["free", kind, port, {prop: value}?]            some matching input undriven
        ["wired", kind, port]                           every matching input driven
        ["acyclic"]
        ["has_part", kind_a, kind_b]                    every a adjacent to some b

    No atom recurses or quantifies beyond the nodes and edges of the concept,
    so every predicate terminates.
    """
    if not isinstance(expr, (list, tuple)) or not expr:
        raise ValueError(f"malformed constraint {expr!r}")
    op, args = expr[0], list(expr[1:])

    def kind(k):
        if k != "*" and not alphabet.has(k, "component-kind"):
            raise UnknownSymbolError(f"constraint references unknown kind {k!r}")
        return k

    def port(p):
        if p != "*" and not alphabet.has(p, "port"):
            raise UnknownSymbolError(f"constraint references unknown port {p!r}")
        return p

    def props(d):
        for p, v in d.items():
            if not alphabet.has(p, "property"):
                raise UnknownSymbolError(f"constraint references unknown property {p!r}")
            if v not in alphabet[p].values:
                raise UnknownSymbolError(f"value {v!r} outside the domain of {p}")
        return dict(d)

    def cmp(o):
        if o not in _OPS:
            raise ValueError(f"unknown comparison {o!r}")
        return _OPS[o]

    if op == "true":
        return lambda c: True
    if op == "false":
        return lambda c: False
    if op == "and":
        parts = [compile_constraint(a, alphabet) for a in args]
        return lambda c: all(p(c) for p in parts)
    if op == "or":
        parts = [compile_constraint(a, alphabet) for a in args]
        return lambda c: any(p(c) for p in parts)
    if op == "not":
        (inner,) = args
        p = compile_constraint(inner, alphabet)
        return lambda c: not p(c)
    if op == "count":
        k, f, bound = kind(args[0]), cmp(args[1]), int(args[2])
        flt = props(args[3]) if len(args) > 3 else {}
        return lambda c: f(sum(1 for n in c.nodes if _kind_match(k, n.kind) and _props_match(n, flt)), bound)
    if op == "edges":
        f, bound = cmp(args[0]), int(args[1])
        return lambda c: f(len(c.edges), bound)
    if op == "edge":
        (ka, pa), (kb, pb) = (a.split(".", 1) for a in args)
        kind(ka), kind(kb), port(pa), port(pb)

        def edge(c):
            for e in c.edges:
                if (_kind_match(ka, c.by_id[e.src].kind) and _kind_match(pa, e.src_port)
                        and _kind_match(kb, c.by_id[e.dst].kind) and _kind_match(pb, e.dst_port)):
                    return True
            return False
        return edge
    if op == "node":
        node_id, kinds = args[0], [kind(k) for k in args[1]]

        def node(c):
            n = c.by_id.get(node_id)
            return n is not None and any(_kind_match(k, n.kind) for k in kinds)
        return node
    if op == "prop":
        k, p, v = kind(args[0]), args[1], args[2]
        props({p: v})
        return lambda c: any(_kind_match(k, n.kind) and n.prop(p) == v for n in c.nodes)
    if op == "distinct":
        k, p = kind(args[0]), args[1]
        props({})
        if not alphabet.has(p, "property"):
            raise UnknownSymbolError(f"unknown property {p!r}")

        def distinct(c):
            vals = [n.prop(p) for n in c.nodes if _kind_match(k, n.kind)]
            return len(vals) == len(set(map(_value_key, vals)))
        return distinct
    if op in ("free", "wired"):
        k, p = kind(args[0]), port(args[1])
        flt = props(args[2]) if len(args) > 2 else {}

        def undriven(c):
            return [n for n in c.nodes if _kind_match(k, n.kind) and _props_match(n, flt)
                    and p in alphabet[n.kind].inputs and (n.id, p) not in c.driver_of]
        if op == "free":
            return lambda c: bool(undriven(c))
        return lambda c: not undriven(c)
    if op == "acyclic":
        return _acyclic
    if op == "has_part":
        ka, kb = kind(args[0]), kind(args[1])

        def has_part(c):
            adj = {n.id: set() for n in c.nodes}
            for e in c.edges:
                adj[e.src].add(e.dst)
                adj[e.dst].add(e.src)
            for n in c.nodes:
                if _kind_match(ka, n.kind) and not any(_kind_match(kb, c.by_id[m].kind) for m in adj[n.id]):
                    return False
            return True
        return has_part
    raise ValueError(f"unknown constraint operator {op!r}")


@dataclass(frozen=True)
class Rule:
    id: str
    category: str
    constraint: tuple
    pattern: tuple = ("true",)

    def __post_init__(self):
        if self.category not in RULE_CATEGORIES:
            raise ValueError(f"rule {self.id}: unknown category {self.category!r}")
        object.__setattr__(self, "constraint", _freeze(self.constraint))
        object.__setattr__(self, "pattern", _freeze(self.pattern))

    def to_obj(self):
        return {"id": self.id, "category": self.category,
                "pattern": _thaw(self.pattern), "constraint": _thaw(self.constraint)}

    @classmethod
    def from_obj(cls, obj):
        return cls(obj["id"], obj["category"], obj["constraint"], obj.get("pattern", ["true"]))


def _freeze(x):
    if isinstance(x, (list, tuple)):
        return tuple(_freeze(v) for v in x)
    if isinstance(x, dict):
        return ("__dict__",) + tuple(sorted((k, _freeze(v)) for k, v in x.items()))
    return x


def _thaw(x):
    if isinstance(x, tuple):
        if x and x[0] == "__dict__":
            return {k: _thaw(v) for k, v in x[1:]}
        return [_thaw(v) for v in x]
    return x


@dataclass(frozen=True)
class RuleSet:
    alphabet: Alphabet
    rules: tuple = ()
    _checks: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise ValueError("rule ids must be unique")
        checks = []
        for r in self.rules:
            pat = compile_constraint(_thaw(r.pattern), self.alphabet)
            con = compile_constraint(_thaw(r.constraint), self.alphabet)
            checks.append((r, pat, con))
        object.__setattr__(self, "_checks", tuple(checks))

    def holds(self, c: Concept):
        for _, pat, con in self._checks:
            if pat(c) and not con(c):
                return False
        return True

    def violated(self, c: Concept):
        return [r.id for r, pat, con in self._checks if pat(c) and not con(c)]

    def with_rules(self, rules):
        return RuleSet(self.alphabet, tuple(rules))

    def rule(self, rule_id):
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def to_obj(self):
        return {"alphabet": self.alphabet.to_obj(), "rules": [r.to_obj() for r in self.rules]}

    @classmethod
    def from_obj(cls, obj):
        return cls(Alphabet.from_obj(obj["alphabet"]), tuple(Rule.from_obj(r) for r in obj["rules"]))

    @cached_property
    def digest(self):
        return textio.content_hash(self.to_obj())

    @classmethod
    def load(cls, path):
        return cls.from_obj(textio.read(path))


def is_permissible(c: Concept, r: RuleSet) -> bool:
    check_concept(c, r.alphabet)
    if c.is_empty:
        return True
    return r.holds(c)


def concept_order(c: Concept):
    return (len(c.nodes), c.text)


def _extensions(c: Concept, alphabet: Alphabet, node_types):
    """Every well-typed graph obtained by adding one node and any edges touching it."""
    new_id = c.fresh_id()
    free_inputs = [(n.id, p) for n in c.nodes for p in alphabet[n.kind].inputs
                   if (n.id, p) not in c.driver_of]
    for kind, props in node_types:
        sym = alphabet[kind]
        base, _ = c.add_node(kind, props, new_id)
        sources = [(n.id, p) for n in base.nodes for p in alphabet[n.kind].outputs]
        in_choices = [[None] + sources for _ in sym.inputs]
        out_choices = [[None] + list(sym.outputs) for _ in free_inputs]
        for ins in itertools.product(*in_choices):
            for outs in itertools.product(*out_choices):
                edges = list(base.edges)
                for port, src in zip(sym.inputs, ins):
                    if src is not None:
                        edges.append(Edge(src[0], src[1], new_id, port))
                for (dst, dport), sport in zip(free_inputs, outs):
                    if sport is not None:
                        edges.append(Edge(new_id, sport, dst, dport))
                yield Concept(base.nodes, tuple(sorted(edges)))


def interpret(r: RuleSet, size_bound: int, ceiling: int = DEFAULT_ENUMERATION_CEILING):
    """Permissible concepts with at most ``size_bound`` nodes, in canonical order.

    Enumerates well-typed graphs level by level (each k-node graph is some
    (k-1)-node graph plus one node and its incident edges), deduplicates by
    canonical form, then filters by the rules. Raises BudgetExceededError when
    more than ``ceiling`` candidate graphs would be generated.
    """
    if size_bound < 0:
        raise ValueError("size_bound must be >= 0")
    node_types = r.alphabet.node_types()
    level = {TOP}
    found = [TOP]
    generated = 0
    for _ in range(size_bound):
        nxt = set()
        for c in sorted(level, key=concept_order):
            for ext in _extensions(c, r.alphabet, node_types):
                generated += 1
                if generated > ceiling:
                    raise BudgetExceededError(f"enumeration passed {ceiling} candidates")
                nxt.add(canonical_form(ext))
        level = nxt
        found.extend(c for c in level if r.holds(c))
    return tuple(sorted(found, key=concept_order))
