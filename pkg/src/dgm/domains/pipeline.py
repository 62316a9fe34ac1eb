"""Typed dataflow pipelines.

Kinds: ``SOURCE`` (property ``dtype``), ``MAP`` (property ``fn``), ``FILTER``
(drops a value equal to the last one it passed) and ``SINK`` (property
``dtype``). A concept compiles along the chain that feeds its single sink.
Values of the wrong type become ``None``, the absence marker, so ill-typed
pipelines still have a behaviour; type compatibility is a separate check.
"""
from ..errors import CompileError, DanglingPortError, UnknownKindError
from ..library import identity
from ..machines import MealySystem, connect
from .base import Domain

VALUES = {"int": (0, 1, 2, 3), "str": ("a", "b")}
UNIVERSE = (None,) + VALUES["int"] + VALUES["str"]
# fn -> (input type, output type, function)
MAPS = {
    "inc": ("int", "int", lambda x: (x + 1) % 4),
    "label": ("int", "str", lambda x: "ab"[x % 2]),
    "code": ("str", "int", lambda x: "ab".index(x)),
}
STAGE_COST = {"SOURCE": 0, "MAP": 1, "FILTER": 2, "SINK": 0}


def dtype_of(v):
    if v is None:
        return None
    return "int" if isinstance(v, int) else "str"


def _map_machine(fn, horizon):
    src, _, f = MAPS[fn]
    return MealySystem.from_functions(
        horizon, UNIVERSE, UNIVERSE, ("s0",), "s0",
        lambda i, s, t: f(i) if dtype_of(i) == src else None, lambda i, s, t: s)


def _filter_machine(horizon):
    return MealySystem.from_functions(
        horizon, UNIVERSE, UNIVERSE, UNIVERSE, None,
        lambda i, s, t: None if i == s else i,
        lambda i, s, t: s if i is None else i)


def _sink_machine(dtype, horizon):
    return MealySystem.from_functions(
        horizon, UNIVERSE, UNIVERSE, ("s0",), "s0",
        lambda i, s, t: i if dtype_of(i) == dtype else None, lambda i, s, t: s)


class PipelineDomain(Domain):
    name = "pipeline"
    machine_horizon = 4
    item_kinds = ("SOURCE", "MAP", "FILTER", "SINK")

    def check_kinds(self, c):
        for n in c.nodes:
            if n.kind not in self.item_kinds:
                raise UnknownKindError(f"node {n.id}: kind {n.kind!r} is not a pipeline stage")

    def chain(self, c):
        """Stages from the source to the sink, in dataflow order."""
        self.check_kinds(c)
        sinks = [n for n in c.nodes if n.kind == "SINK"]
        if len(sinks) != 1 or c.count("SOURCE") != 1:
            raise CompileError("a pipeline needs exactly one source and one sink")
        path, node, seen = [], sinks[0], set()
        while node.kind != "SOURCE":
            if node.id in seen:
                raise CompileError("pipeline stages form a loop")
            seen.add(node.id)
            path.append(node)
            d = c.driver_of.get((node.id, "a"))
            if d is None:
                raise DanglingPortError(f"stage {node.id} input is not wired")
            node = c.by_id[d[0]]
        path.append(node)
        return path[::-1]

    def compile(self, c, horizon=None):
        path = self.chain(c)
        T = horizon or self.machine_horizon
        dtype = path[0].prop("dtype")
        if dtype not in VALUES:
            raise CompileError(f"source {path[0].id} has no dtype")
        sys = identity(VALUES[dtype], T)
        for node in path[1:]:
            if node.kind == "MAP":
                if node.prop("fn") not in MAPS:
                    raise CompileError(f"map {node.id} has no function")
                stage = _map_machine(node.prop("fn"), T)
            elif node.kind == "FILTER":
                stage = _filter_machine(T)
            else:
                stage = _sink_machine(node.prop("dtype"), T)
            sys = connect(sys, stage)
        return sys

    def type_compatible(self, c):
        try:
            path = self.chain(c)
        except CompileError:
            return False
        current = path[0].prop("dtype")
        for node in path[1:]:
            if node.kind == "MAP":
                src, dst, _ = MAPS.get(node.prop("fn"), (None, None, None))
                if src != current:
                    return False
                current = dst
            elif node.kind == "SINK" and node.prop("dtype") != current:
                return False
        return current is not None

    def check_scenario(self, c, machine, scenario):
        if scenario.get("type") == "type_compatible":
            return self.type_compatible(c)
        return super().check_scenario(c, machine, scenario)

    def output_type(self, c, node_id, _seen=None):
        """Type leaving ``node_id`` along its feeding chain, ``None`` if unknown or ill-typed."""
        seen = _seen or set()
        if node_id in seen:
            return None
        seen.add(node_id)
        node = c.by_id[node_id]
        if node.kind == "SOURCE":
            return node.prop("dtype")
        d = c.driver_of.get((node_id, "a"))
        incoming = None if d is None else self.output_type(c, d[0], seen)
        if node.kind == "MAP":
            src, dst, _ = MAPS.get(node.prop("fn"), (None, None, None))
            return dst if incoming == src else None
        return incoming

    def rank(self, c, requirements, params):
        """Satisfied internal weight once the sink is fed.

        Before that, static requirements count as decided and the others earn
        half their weight when some open stage already carries the sink's type.
        """
        if c.is_empty:
            return 0.0
        size = params.get("size_weight", 0.0) * self.size(c)
        sinks = [n for n in c.nodes if n.kind == "SINK"]
        if len(sinks) == 1 and (sinks[0].id, "a") not in c.driver_of:
            want = sinks[0].prop("dtype")
            fed = {e.src for e in c.edges}
            ready = any(n.kind in ("MAP", "FILTER") and n.id not in fed and self.output_type(c, n.id) == want
                        for n in c.nodes)
            score = 0.0
            for r in requirements:
                if r.scenario.get("type") == "cost_le":
                    score += r.weight if self.check_scenario(c, None, r.scenario) else 0.0
                elif ready:
                    score += 0.5 * r.weight
            return score - size
        return super().rank(c, requirements, params)

    def intrinsic_cost(self, c):
        return sum(STAGE_COST.get(n.kind, 0) for n in c.nodes)
