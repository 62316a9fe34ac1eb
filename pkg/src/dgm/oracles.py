"""Brute-force reference implementations used to cross-check the engine.

Nothing here shares code with the optimised paths it checks: the
enumerator generates whole graphs per node multiset and canonicalises by
trying every label-preserving permutation; circuits are evaluated by direct
recursion over NAND gates; machines are compared by listing every input
stream.
"""
import itertools
import math

from .errors import BudgetExceededError
from .language import Concept, Edge, Node

# -- enumeration ----------------------------------------------------------------


def _perm_key(labels, edges, perm):
    """Serialisation of a graph under the node order ``perm``."""
    pos = {v: k for k, v in enumerate(perm)}
    return (tuple(labels[v] for v in perm),
            tuple(sorted((pos[s], sp, pos[d], dp) for s, sp, d, dp in edges)))


def _brute_canonical(labels, edges):
    n = len(labels)
    groups = {}
    for v in range(n):
        groups.setdefault(labels[v], []).append(v)
    ordered = [groups[k] for k in sorted(groups)]
    best = None
    for choice in itertools.product(*(itertools.permutations(g) for g in ordered)):
        perm = [v for part in choice for v in part]
        key = _perm_key(labels, edges, perm)
        if best is None or key < best:
            best = key
    return best


def enumerate_concepts(rules, bound, ceiling=5_000_000):
    """Canonical keys of every permissible concept with at most ``bound`` nodes.

    For each multiset of node labels, every assignment of a driver (or none)
    to every input port is generated, canonicalised and kept if the rules
    hold.
    """
    alphabet = rules.alphabet
    types = alphabet.node_types()
    found = {((), ())}
    generated = 0
    for n in range(1, bound + 1):
        for labels in itertools.combinations_with_replacement(types, n):
            sources = [(v, p) for v, (k, _) in enumerate(labels) for p in alphabet[k].outputs]
            ports = [(v, p) for v, (k, _) in enumerate(labels) for p in alphabet[k].inputs]
            for drivers in itertools.product([None] + sources, repeat=len(ports)):
                generated += 1
                if generated > ceiling:
                    raise BudgetExceededError(f"brute-force enumeration passed {ceiling} graphs")
                edges = [(s[0], s[1], d[0], d[1]) for d, s in zip(ports, drivers) if s is not None]
                c = _concept_of(labels, edges)
                if rules.holds(c):
                    found.add(_brute_canonical(labels, edges))
    return found


def _concept_of(labels, edges):
    nodes = [Node(f"v{v}", k, props) for v, (k, props) in enumerate(labels)]
    return Concept.build(nodes, [Edge(f"v{s}", sp, f"v{d}", dp) for s, sp, d, dp in edges])


def concept_key(c):
    """Brute-force canonical key of an existing concept."""
    index = {n.id: v for v, n in enumerate(c.nodes)}
    labels = [(n.kind, n.props) for n in c.nodes]
    edges = [(index[e.src], e.src_port, index[e.dst], e.dst_port) for e in c.edges]
    return _brute_canonical(labels, edges)


# -- circuits -------------------------------------------------------------------


class NoBehaviour(Exception):
    """The circuit has a dangling input or a combinational loop."""


def circuit_outputs(c, a, b):
    """Output pin values of a NAND circuit for input bits ``a`` and ``b``."""
    drivers = {(e.dst, e.dst_port): e.src for e in c.edges}
    kinds = {n.id: n for n in c.nodes}

    def value(nid, path):
        if nid in path:
            raise NoBehaviour("loop")
        node = kinds[nid]
        if node.kind == "IN":
            return {"A": a, "B": b}[dict(node.props)["pin_in"]]
        if node.kind == "NAND":
            if (nid, "a") not in drivers or (nid, "b") not in drivers:
                raise NoBehaviour("dangling gate input")
            x = value(drivers[nid, "a"], path | {nid})
            y = value(drivers[nid, "b"], path | {nid})
            return 0 if (x and y) else 1
        raise NoBehaviour(f"{node.kind} drives nothing")

    for n in c.nodes:
        if n.kind == "NAND":
            value(n.id, frozenset())
    out = {}
    for n in c.nodes:
        if n.kind == "OUT":
            if (n.id, "a") not in drivers:
                raise NoBehaviour("dangling output")
            out[dict(n.props)["pin_out"]] = value(drivers[n.id, "a"], frozenset())
    return out


def truth_table(c):
    """Rows ``(a, b, {pin: bit})`` in input order."""
    return [(a, b, circuit_outputs(c, a, b)) for a in (0, 1) for b in (0, 1)]


def circuit_reward(c, requirements, cost_weight, partial_credit=True):
    """Reward by direct evaluation; ``None`` when the circuit has no behaviour."""
    if not c.nodes and not c.edges:
        return 0.0
    try:
        table = {(a, b): outs for a, b, outs in truth_table(c)}
    except NoBehaviour:
        return None
    got, total, all_ok = [], 0.0, True
    for r in requirements:
        sc = r.scenario
        (a, b), = sc["inputs"]
        ok = table[a, b].get(sc["port"]) == sc["expect"][0]
        all_ok = all_ok and ok
        total += r.weight
        if ok:
            got.append(r.weight)
    gates = sum(1 for n in c.nodes if n.kind == "NAND")
    if partial_credit:
        return math.fsum(got) - cost_weight * gates
    return (total - cost_weight * gates) if all_ok else 0.0


# -- machines -------------------------------------------------------------------


def fold_simulate(sys, inputs):
    """Outputs of ``sys`` by a plain fold over its step functions."""
    s, outs = sys.q0, []
    for t, i in enumerate(inputs):
        outs.append(sys.f(i, s, t))
        s = sys.q(i, s, t)
    return outs


def brute_equivalent(a, b, horizon):
    """Compare every input stream of length ``horizon`` (prefixes are covered)."""
    if set(a.input.values) != set(b.input.values):
        return False
    for stream in itertools.product(a.input.values, repeat=horizon):
        if fold_simulate(a, stream) != fold_simulate(b, stream):
            return False
    return True


def abstract_contains(abs_sys, inputs, outputs):
    """Whether some explicit run of the abstract machine on ``inputs`` emits ``outputs``.

    Runs are enumerated path by path, without merging states.
    """
    def runs(t, s):
        if t == len(inputs):
            yield ()
            return
        i = inputs[t]
        for o in sorted(abs_sys.F[i, s, t], key=repr):
            for n in sorted(abs_sys.Q[i, s, t], key=repr):
                for rest in runs(t + 1, n):
                    yield (o,) + rest

    target = tuple(outputs)
    return any(r == target for r in runs(0, abs_sys.q0))
