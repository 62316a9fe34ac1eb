"""Shared domain interface: compilation, scenario checks, cost and ranking."""
from functools import lru_cache

from ..errors import CompileError
from ..machines import simulate
from ..textio import from_plain


class Domain:
    """A design domain binds concept kinds to machine semantics.

    Subclasses provide :meth:`compile`, :meth:`observe` and
    :meth:`intrinsic_cost`; the rest has workable defaults.
    """

    name = "abstract"
    machine_horizon = 1
    item_kinds = ()

    def check_kinds(self, c):
        raise NotImplementedError

    def compile(self, c, horizon=None):
        raise NotImplementedError

    def observe(self, output, port):
        return output

    def intrinsic_cost(self, c):
        return 0.0

    def cost(self, c, params):
        return params.get("cost_weight", 0.0) * self.intrinsic_cost(c)

    def size(self, c):
        return len(c.nodes)

    def compiled(self, c):
        """``compile(c)`` at the default horizon, memoised; compile errors are re-raised."""
        machine, error = _compile_memo(self, c)
        if error is not None:
            raise error
        return machine

    def try_compile(self, c):
        return _compile_memo(self, c)[0]

    def check_scenario(self, c, machine, scenario):
        """Decide one scenario; ``machine`` is ``None`` when ``c`` does not compile."""
        kind = scenario.get("type")
        if kind == "stream":
            if machine is None:
                return False
            inputs = [from_plain(v) for v in scenario["inputs"]]
            if len(inputs) > machine.horizon or any(i not in machine.input for i in inputs):
                return False
            outs = simulate(machine, inputs).outputs
            got = [self.observe(o, scenario["port"]) for o in outs]
            return got == [from_plain(v) for v in scenario["expect"]]
        if kind == "cost_le":
            return self.intrinsic_cost(c) <= scenario["bound"]
        if kind == "size_le":
            return self.size(c) <= scenario["bound"]
        raise ValueError(f"{self.name}: unknown scenario type {kind!r}")

    def satisfied(self, c, scenarios):
        """One boolean per scenario; the concept is compiled at most once."""
        if not scenarios:
            return []
        machine = None if c.is_empty else self.try_compile(c)
        return [False if c.is_empty else self.check_scenario(c, machine, s) for s in scenarios]

    def rank(self, c, requirements, params):
        """Frontier score: internal weight satisfied less a size penalty."""
        if c.is_empty:
            return 0.0
        ok = self.satisfied(c, [r.scenario for r in requirements])
        score = sum(r.weight for r, hit in zip(requirements, ok) if hit)
        return score - params.get("size_weight", 0.0) * self.size(c)


@lru_cache(maxsize=4096)
def _compile_memo(domain, c):
    try:
        return domain.compile(c), None
    except CompileError as exc:
        return None, exc
