"""Two-input NAND logic circuits.

Concepts use three kinds: ``IN`` (a primary input, property ``pin_in``),
``OUT`` (a primary output, property ``pin_out``) and ``NAND`` (inputs ``a``,
``b``, output ``y``). A concept compiles to a stateless machine over bit pairs
``(A, B)`` whose output is the tuple of output pins in :data:`OUTPUT_PINS`
order, ``None`` for pins the concept lacks.
"""
import itertools
from functools import lru_cache

from ..errors import CompileError, DanglingPortError, UnknownKindError
from ..library import identity, stateless
from ..machines import connect, product
from .base import Domain

INPUT_PINS = ("A", "B")
OUTPUT_PINS = ("C", "S")
ROWS = tuple(itertools.product((0, 1), (0, 1)))
# bit k of a signal mask is the signal's value on ROWS[k]
PIN_MASKS = {"A": 0b0011, "B": 0b0101}
FULL = 0b1111


def _topo_gates(c):
    gates = [n.id for n in c.nodes if n.kind == "NAND"]
    deps = {g: set() for g in gates}
    for e in c.edges:
        if e.dst in deps and c.by_id[e.src].kind == "NAND":
            deps[e.dst].add(e.src)
    order, done = [], set()
    while len(order) < len(gates):
        ready = sorted(g for g in gates if g not in done and deps[g] <= done)
        if not ready:
            raise CompileError("combinational loop: circuit concepts must be acyclic")
        order.extend(ready)
        done.update(ready)
    return order


def _image(fn, values):
    return tuple(dict.fromkeys(fn(v) for v in values))


def _bit(mask, row):
    return (mask >> (3 - row)) & 1


@lru_cache(maxsize=4096)
def build_costs(available):
    """Gates needed to derive each truth-table mask from ``available`` masks.

    Counts NAND trees without sharing, so the figure overestimates when
    subcircuits could be reused; it is a ranking aid, not a bound.
    """
    cost = {m: 0 for m in available}
    changed = True
    while changed:
        changed = False
        items = list(cost.items())
        for x, cx in items:
            for y, cy in items:
                m = FULL & ~(x & y)
                c = cx + cy + 1
                if c < cost.get(m, 99):
                    cost[m] = c
                    changed = True
    return cost


class CircuitDomain(Domain):
    name = "circuit"
    machine_horizon = 1
    item_kinds = ("IN", "NAND", "OUT")

    def check_kinds(self, c):
        for n in c.nodes:
            if n.kind not in self.item_kinds:
                raise UnknownKindError(f"node {n.id}: kind {n.kind!r} is not a circuit component")

    def _netlist(self, c):
        """``(signal order, gate drivers, output drivers)`` or a compile error."""
        self.check_kinds(c)
        src_of = {}
        for n in c.nodes:
            if n.kind == "IN":
                if n.prop("pin_in") not in INPUT_PINS:
                    raise CompileError(f"input {n.id} has no pin")
                src_of[n.id] = n.prop("pin_in")
        order = _topo_gates(c)
        for g in order:
            src_of[g] = g
        drv = c.driver_of
        gates = []
        for g in order:
            ins = []
            for port in ("a", "b"):
                if (g, port) not in drv:
                    raise DanglingPortError(f"gate {g} input {port} is not wired")
                ins.append(src_of[drv[g, port][0]])
            gates.append((g, ins))
        outs = {}
        for n in c.nodes:
            if n.kind == "OUT":
                if n.prop("pin_out") not in OUTPUT_PINS or n.prop("pin_out") in outs:
                    raise CompileError(f"output {n.id} has a missing or repeated pin")
                if (n.id, "a") not in drv:
                    raise DanglingPortError(f"output {n.prop('pin_out')} is not wired")
                outs[n.prop("pin_out")] = src_of[drv[n.id, "a"][0]]
        return gates, outs

    def compile(self, c, horizon=None):
        """Compose per-gate machines along the concept's wiring.

        A bus machine carries every signal computed so far; each gate is
        attached by a product with an identity over the bus followed by a
        connect that routes the gate's two drivers, then a flattening stage.
        A final stage selects the output pins.
        """
        gates, outs = self._netlist(c)
        T = horizon or self.machine_horizon
        names = list(INPUT_PINS)
        bus = identity(ROWS, T)
        for g, (u, v) in gates:
            iu, iv = names.index(u), names.index(v)
            values = bus.output.values
            gate = stateless(lambda i: 1 - (i[0] & i[1]), ROWS, (0, 1), T)
            fan = product(identity(values, T), gate)
            bus = connect(bus, fan, {w: (w, (w[iu], w[iv])) for w in values})
            flat_in = fan.output.values
            bus = connect(bus, stateless(lambda x: x[0] + (x[1],), flat_in,
                                         _image(lambda x: x[0] + (x[1],), flat_in), T))
            names.append(g)
        pick = [names.index(outs[p]) if p in outs else None for p in OUTPUT_PINS]

        def select(w):
            return tuple(None if k is None else w[k] for k in pick)
        values = bus.output.values
        return connect(bus, stateless(select, values, _image(select, values), T))

    def observe(self, output, port):
        return output[OUTPUT_PINS.index(port)]

    def intrinsic_cost(self, c):
        return c.count("NAND")

    def size(self, c):
        return c.count("NAND")

    # -- fast bit-parallel evaluation used for ranking ----------------------

    def signal_masks(self, c):
        """Truth-table mask per node output; ``None`` where the cone is incomplete."""
        masks = {}
        drv = c.driver_of
        visiting = set()

        def mask(nid):
            if nid in masks:
                return masks[nid]
            node = c.by_id[nid]
            if node.kind == "IN":
                m = PIN_MASKS.get(node.prop("pin_in"))
            elif node.kind == "NAND" and nid not in visiting:
                visiting.add(nid)
                a, b = drv.get((nid, "a")), drv.get((nid, "b"))
                ma = mask(a[0]) if a else None
                mb = mask(b[0]) if b else None
                m = None if ma is None or mb is None else FULL & ~(ma & mb)
                visiting.discard(nid)
            else:
                m = None
            masks[nid] = m
            return m

        for n in c.nodes:
            if n.kind in ("IN", "NAND"):
                mask(n.id)
        return masks

    def rank(self, c, requirements, params):
        """Look-ahead score used to order the search frontier.

        Wired output pins earn the internal requirement weight their driver
        satisfies. A pin that is present but unwired earns the best, over every
        signal buildable from the current ones, of that signal's weight less
        ``size_weight`` per extra gate it needs, less ``pending_weight``. The
        total is charged ``size_weight`` per gate already placed.
        """
        if c.is_empty:
            return 0.0
        masks = self.signal_masks(c)
        costs = build_costs(frozenset(m for m in masks.values() if m is not None))
        size_weight = params.get("size_weight", 0.0)
        rows_by_pin = {}
        for r in requirements:
            sc = r.scenario
            if sc.get("type") != "stream":
                continue
            a, b = sc["inputs"][0]
            rows_by_pin.setdefault(sc["port"], []).append((ROWS.index((a, b)), sc["expect"][0], r.weight))
        drv = c.driver_of
        wired = {}
        present = set()
        for n in c.nodes:
            if n.kind == "OUT":
                pin = n.prop("pin_out")
                present.add(pin)
                d = drv.get((n.id, "a"))
                if d is not None:
                    wired[pin] = masks.get(d[0])
        score = 0.0
        for pin, rows in sorted(rows_by_pin.items()):
            def hits(m):
                return sum(w for k, want, w in rows if m is not None and _bit(m, k) == want)
            if pin in wired:
                score += hits(wired[pin])
            elif pin in present:
                best = max((hits(m) - size_weight * k for m, k in costs.items()), default=0.0)
                score += best - params.get("pending_weight", 0.0)
        return score - size_weight * c.count("NAND")
