"""Timed Mealy machines with explicit total tables.

A machine is ``(time, input, output, states, q0, F, Q)`` with discrete time
``0..T``. ``F`` and ``Q`` are stored as integer-coded tables indexed
``[t][state][input]``; values, states and inputs are kept in declared order
and may be ints, strings, ``None`` (the absence marker) or tuples of those.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

from . import kernels, textio
from .errors import (
    AlgebraicLoopError,
    BudgetExceededError,
    InvalidPartitionError,
    OutOfDomainError,
    SelfWiringError,
    SignatureMismatchError,
    TimeScaleMismatchError,
    TypeMismatchError,
)

EPS = None
DEFAULT_STREAM_CEILING = 10**12


@dataclass(frozen=True)
class TimeScale:
    horizon: int
    kind: str = "discrete"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class DataSet:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("a data set must be non-empty")
        if len(set(self.values)) != len(self.values):
            raise ValueError("data set values must be distinct")

    @cached_property
    def index(self):
        return {v: k for k, v in enumerate(self.values)}

    def __contains__(self, v):
        return v in self.index

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def _as_dataset(x):
    return x if isinstance(x, DataSet) else DataSet(tuple(x))


@dataclass(frozen=True)
class MealySystem:
    time: TimeScale
    input: DataSet
    output: DataSet
    states: DataSet
    q0: object
    F: tuple = field(repr=False)
    Q: tuple = field(repr=False)

    def __post_init__(self):
        if self.q0 not in self.states:
            raise ValueError(f"initial state {self.q0!r} not in S")
        nt, ns, ni = self.time.horizon + 1, len(self.states), len(self.input)
        for name, table, bound in (("F", self.F, len(self.output)), ("Q", self.Q, ns)):
            if len(table) != nt or any(len(r) != ns for r in table) or any(
                    len(c) != ni for r in table for c in r):
                raise ValueError(f"{name} must be total over In x S x {{0..T}}")
            if any(not 0 <= x < bound for r in table for c in r for x in c):
                raise ValueError(f"{name} holds a code outside its codomain")

    @classmethod
    def from_functions(cls, horizon, inputs, outputs, states, q0, f, q):
        """Tabulate ``f(i, s, t) -> out`` and ``q(i, s, t) -> state``."""
        inputs, outputs, states = _as_dataset(inputs), _as_dataset(outputs), _as_dataset(states)
        F, Q = [], []
        for t in range(horizon + 1):
            Ft, Qt = [], []
            for s in states.values:
                fr, qr = [], []
                for i in inputs.values:
                    o, n = f(i, s, t), q(i, s, t)
                    if o not in outputs:
                        raise TypeMismatchError(f"F({i!r},{s!r},{t}) = {o!r} is not an output value")
                    if n not in states:
                        raise TypeMismatchError(f"Q({i!r},{s!r},{t}) = {n!r} is not a state")
                    fr.append(outputs.index[o])
                    qr.append(states.index[n])
                Ft.append(tuple(fr))
                Qt.append(tuple(qr))
            F.append(tuple(Ft))
            Q.append(tuple(Qt))
        return cls(TimeScale(horizon), inputs, outputs, states, q0, tuple(F), tuple(Q))

    @property
    def horizon(self):
        return self.time.horizon

    def f(self, i, s, t):
        return self.output.values[self.F[t][self.states.index[s]][self.input.index[i]]]

    def q(self, i, s, t):
        return self.states.values[self.Q[t][self.states.index[s]][self.input.index[i]]]

    def to_obj(self):
        rows_f, rows_q = [], []
        for ii, i in enumerate(self.input.values):
            for si, s in enumerate(self.states.values):
                for t in range(self.horizon + 1):
                    rows_f.append([textio.to_plain(i), textio.to_plain(s), t,
                                   textio.to_plain(self.output.values[self.F[t][si][ii]])])
                    rows_q.append([textio.to_plain(i), textio.to_plain(s), t,
                                   textio.to_plain(self.states.values[self.Q[t][si][ii]])])
        return {
            "horizon": self.horizon,
            "inputs": [textio.to_plain(v) for v in self.input.values],
            "outputs": [textio.to_plain(v) for v in self.output.values],
            "states": [textio.to_plain(v) for v in self.states.values],
            "q0": textio.to_plain(self.q0),
            "F": rows_f,
            "Q": rows_q,
        }

    @classmethod
    def from_obj(cls, obj):
        fp = textio.from_plain
        f = {(fp(i), fp(s), t): fp(o) for i, s, t, o in obj["F"]}
        q = {(fp(i), fp(s), t): fp(n) for i, s, t, n in obj["Q"]}
        return cls.from_functions(obj["horizon"], [fp(v) for v in obj["inputs"]],
                                  [fp(v) for v in obj["outputs"]], [fp(v) for v in obj["states"]],
                                  fp(obj["q0"]), lambda i, s, t: f[i, s, t], lambda i, s, t: q[i, s, t])

    @cached_property
    def digest(self):
        return textio.content_hash(self.to_obj())


@dataclass(frozen=True)
class AbstractSystem:
    """Nondeterministic machine: F and Q map to non-empty sets."""

    time: TimeScale
    input: DataSet
    output: DataSet
    states: DataSet
    q0: object
    F: dict = field(repr=False, compare=False)
    Q: dict = field(repr=False, compare=False)

    @cached_property
    def deterministic(self):
        return all(len(v) == 1 for v in self.F.values()) and all(len(v) == 1 for v in self.Q.values())

    def output_streams(self, inputs):
        """Every output stream some run of the abstraction can produce."""
        runs = {((), self.q0)}
        for t, i in enumerate(inputs):
            runs = {(outs + (o,), n) for outs, s in runs
                    for o in self.F[i, s, t] for n in self.Q[i, s, t]}
        return {outs for outs, _ in runs}

    def admits(self, inputs, outputs):
        """Whether ``outputs`` is a possible response to ``inputs`` (subset construction)."""
        current = {self.q0}
        for t, (i, o) in enumerate(zip(inputs, outputs)):
            current = {n for s in current if o in self.F[i, s, t] for n in self.Q[i, s, t]}
            if not current:
                return False
        return True


@dataclass(frozen=True)
class Trace:
    inputs: tuple
    outputs: tuple
    states: tuple

    def __post_init__(self):
        if len(self.outputs) != len(self.inputs) or len(self.states) != len(self.inputs) + 1:
            raise ValueError("trace lengths are inconsistent")

    def replays_on(self, sys):
        return simulate(sys, self.inputs) == self


def step(sys: MealySystem, s, i, t):
    if s not in sys.states:
        raise OutOfDomainError(f"unknown state {s!r}")
    if i not in sys.input:
        raise OutOfDomainError(f"unknown input {i!r}")
    if not (isinstance(t, int) and 0 <= t <= sys.horizon):
        raise OutOfDomainError(f"time {t!r} outside 0..{sys.horizon}")
    return sys.f(i, s, t), sys.q(i, s, t)


def simulate(sys: MealySystem, inputs) -> Trace:
    inputs = tuple(inputs)
    if len(inputs) > sys.horizon:
        raise OutOfDomainError(f"stream of length {len(inputs)} exceeds horizon {sys.horizon}")
    for i in inputs:
        if i not in sys.input:
            raise OutOfDomainError(f"unknown input {i!r}")
    codes = [sys.input.index[i] for i in inputs]
    outs, states = kernels.simulate_codes(sys.F, sys.Q, sys.states.index[sys.q0], codes)
    return Trace(inputs, tuple(sys.output.values[o] for o in outs),
                 tuple(sys.states.values[s] for s in states))


def simulate_many(sys: MealySystem, streams):
    """Output streams for a batch of input streams (compiled kernel when present)."""
    codes = [[sys.input.index[i] for i in stream] for stream in streams]
    for c in codes:
        if len(c) > sys.horizon:
            raise OutOfDomainError("stream exceeds horizon")
    rows = kernels.simulate_batch(sys.F, sys.Q, sys.states.index[sys.q0], codes)
    return [tuple(sys.output.values[o] for o in row) for row in rows]


def _check_time(y, z):
    if y.time != z.time:
        raise TimeScaleMismatchError(f"time scales differ: {y.time} vs {z.time}")


def product(y: MealySystem, z: MealySystem) -> MealySystem:
    """Parallel composition: paired inputs, outputs and states."""
    _check_time(y, z)
    ins = tuple(itertools.product(y.input.values, z.input.values))
    outs = tuple(itertools.product(y.output.values, z.output.values))
    states = tuple(itertools.product(y.states.values, z.states.values))
    return MealySystem.from_functions(
        y.horizon, ins, outs, states, (y.q0, z.q0),
        lambda i, s, t: (y.f(i[0], s[0], t), z.f(i[1], s[1], t)),
        lambda i, s, t: (y.q(i[0], s[0], t), z.q(i[1], s[1], t)),
    )


def connect(y: MealySystem, z: MealySystem, wiring=None) -> MealySystem:
    """Series composition: every output of ``y`` is fed to ``z`` in the same step.

    ``wiring`` maps each output value of ``y`` to an input value of ``z``;
    ``None`` means the identity map.
    """
    if y is z:
        raise SelfWiringError("a machine cannot be wired to itself without a delay")
    _check_time(y, z)
    if wiring is None:
        wiring = {o: o for o in y.output.values}
    for o in y.output.values:
        if o not in wiring:
            raise TypeMismatchError(f"output {o!r} of the first machine is not wired")
        if wiring[o] not in z.input:
            raise TypeMismatchError(f"output {o!r} wired to {wiring[o]!r}, not an input of the second machine")
    states = tuple(itertools.product(y.states.values, z.states.values))

    def f(i, s, t):
        return z.f(wiring[y.f(i, s[0], t)], s[1], t)

    def q(i, s, t):
        return y.q(i, s[0], t), z.q(wiring[y.f(i, s[0], t)], s[1], t)

    return MealySystem.from_functions(y.horizon, y.input, z.output, states, (y.q0, z.q0), f, q)


def _ports(v):
    return v if isinstance(v, tuple) else (v,)


def _unports(parts, template):
    return tuple(parts) if isinstance(template, tuple) else parts[0]


def feedback(sys: MealySystem, out_port: int = 0, in_port: int = 0, keep_output: bool = True) -> MealySystem:
    """Close a loop from output component ``out_port`` to input component ``in_port``.

    Scalar values count as one-component tuples. The loop is accepted only if
    the looped output never depends on the looped input within a step, i.e.
    the path carries a unit delay; otherwise AlgebraicLoopError. The looped
    input disappears from the interface. The looped output stays visible when
    ``keep_output`` is true.
    """
    ins = sys.input.values
    rest_of = {}
    for i in ins:
        parts = _ports(i)
        if not 0 <= in_port < len(parts):
            raise ValueError(f"input port {in_port} out of range")
        rest = parts[:in_port] + parts[in_port + 1:]
        rest_of.setdefault(rest, {})[parts[in_port]] = i
    for o in sys.output.values:
        if not 0 <= out_port < len(_ports(o)):
            raise ValueError(f"output port {out_port} out of range")

    for rest, by_loop in rest_of.items():
        for s in sys.states.values:
            for t in range(sys.horizon + 1):
                seen = {_ports(sys.f(i, s, t))[out_port] for i in by_loop.values()}
                if len(seen) > 1:
                    raise AlgebraicLoopError(
                        f"looped output depends on the looped input at state {s!r}, t={t}: no delay in loop")

    def close(rest, s, t):
        by_loop = rest_of[rest]
        probe = next(iter(by_loop.values()))
        looped = _ports(sys.f(probe, s, t))[out_port]
        if looped not in by_loop:
            raise TypeMismatchError(f"looped value {looped!r} is not a valid value of input port {in_port}")
        return by_loop[looped]

    def f(rest, s, t):
        o = sys.f(close(rest, s, t), s, t)
        if keep_output:
            return o
        parts = _ports(o)
        return parts[:out_port] + parts[out_port + 1:]

    outs = sys.output.values
    if not keep_output:
        outs = tuple(dict.fromkeys(_ports(o)[:out_port] + _ports(o)[out_port + 1:] for o in outs))
    return MealySystem.from_functions(sys.horizon, tuple(rest_of), outs, sys.states, sys.q0,
                                      f, lambda rest, s, t: sys.q(close(rest, s, t), s, t))


def _stream_count(n_in, horizon):
    return sum(n_in ** k for k in range(1, horizon + 1))


def equivalent(a: MealySystem, b: MealySystem, horizon: int, ceiling: int = DEFAULT_STREAM_CEILING) -> bool:
    """True iff every input stream of length <= ``horizon`` gives equal outputs.

    Both machines must read the same input set; outputs are compared by value,
    so declared output sets may differ.

    Streams are not materialised: the check walks reachable state pairs layer
    by layer, which covers exactly the same set of streams.
    """
    if set(a.input.values) != set(b.input.values):
        raise SignatureMismatchError("machines read different input sets")
    if horizon > min(a.horizon, b.horizon):
        raise OutOfDomainError(f"horizon {horizon} exceeds a machine horizon")
    if _stream_count(len(a.input), horizon) > ceiling:
        raise BudgetExceededError(f"{len(a.input)}^{horizon} streams exceed the ceiling {ceiling}")
    perm = [b.input.index[i] for i in a.input.values]
    codes = dict(a.output.index)
    omap = [codes.setdefault(o, len(codes)) for o in b.output.values]
    Fb = [[[omap[row[p]] for p in perm] for row in layer] for layer in b.F[:horizon]]
    Qb = [[[row[p] for p in perm] for row in layer] for layer in b.Q[:horizon]]
    return bool(kernels.equivalent_codes(
        a.F[:horizon], a.Q[:horizon], a.states.index[a.q0],
        Fb, Qb, b.states.index[b.q0], len(a.input), horizon))


def project(sys: MealySystem, index: int) -> MealySystem:
    """Keep only component ``index`` of tuple-valued inputs and outputs.

    Defined only when that output component does not depend on the other input
    components; used to read one factor back out of a product.
    """
    ins = tuple(dict.fromkeys(i[index] for i in sys.input.values))
    outs = tuple(dict.fromkeys(o[index] for o in sys.output.values))
    states = tuple(dict.fromkeys(s[index] for s in sys.states.values))
    pick = {}
    for i in sys.input.values:
        pick.setdefault(i[index], i)
    rep = {}
    for s in sys.states.values:
        rep.setdefault(s[index], s)
    return MealySystem.from_functions(
        sys.horizon, ins, outs, states, sys.q0[index],
        lambda i, s, t: sys.f(pick[i], rep[s], t)[index],
        lambda i, s, t: sys.q(pick[i], rep[s], t)[index],
    )


# -- refinement ---------------------------------------------------------------

@dataclass(frozen=True)
class ProductSeam:
    """Split a machine with paired inputs/outputs into two parallel factors.

    ``state_split`` maps each state to a ``(left, right)`` pair; ``None`` means
    states are already pairs.
    """

    state_split: dict | None = None


@dataclass(frozen=True)
class SeriesSeam:
    """Split into a given stateless ``front`` machine followed by a derived back part."""

    front: MealySystem


def _split_state(seam, s):
    if seam.state_split is None:
        if not (isinstance(s, tuple) and len(s) == 2):
            raise InvalidPartitionError(f"state {s!r} is not a pair and no state split was given")
        return s
    return seam.state_split[s]


def _product_factor(x, seam, side):
    for v in x.input.values + x.output.values:
        if not (isinstance(v, tuple) and len(v) == 2):
            raise InvalidPartitionError("product seam needs paired inputs and outputs")
    ins = tuple(dict.fromkeys(i[side] for i in x.input.values))
    outs = tuple(dict.fromkeys(o[side] for o in x.output.values))
    split = {s: _split_state(seam, s) for s in x.states.values}
    states = tuple(dict.fromkeys(p[side] for p in split.values()))
    ftab, qtab = {}, {}
    for i in x.input.values:
        for s in x.states.values:
            for t in range(x.horizon + 1):
                key = (i[side], split[s][side], t)
                o = x.f(i, s, t)[side]
                n = split[x.q(i, s, t)][side]
                if ftab.setdefault(key, o) != o or qtab.setdefault(key, n) != n:
                    raise InvalidPartitionError(
                        f"factor {side} is not independent of the other factor at {key!r}")
    return MealySystem.from_functions(x.horizon, ins, outs, states, split[x.q0][side],
                                      lambda i, s, t: ftab[i, s, t], lambda i, s, t: qtab[i, s, t])


def _series_back(x, front):
    _check_time(x, front)
    if len(front.states) != 1:
        raise InvalidPartitionError("series seam needs a stateless front part")
    if set(front.input.values) != set(x.input.values):
        raise InvalidPartitionError("front part must read the whole input of the machine")
    sf = front.q0
    ftab, qtab = {}, {}
    for i in x.input.values:
        for s in x.states.values:
            for t in range(x.horizon + 1):
                key = (front.f(i, sf, t), s, t)
                o, n = x.f(i, s, t), x.q(i, s, t)
                if ftab.setdefault(key, o) != o or qtab.setdefault(key, n) != n:
                    raise InvalidPartitionError(
                        f"front output {key[0]!r} merges inputs that the machine distinguishes")
    default_out = x.output.values[0]
    return MealySystem.from_functions(
        x.horizon, front.output, x.output, x.states, x.q0,
        lambda i, s, t: ftab.get((i, s, t), default_out),
        lambda i, s, t: qtab.get((i, s, t), s),
    )


def recompose(y: MealySystem, z: MealySystem, seam) -> MealySystem:
    if isinstance(seam, ProductSeam):
        return product(y, z)
    return connect(y, z)


def decompose(x: MealySystem, seam):
    """Inverse of composition along ``seam``; returns ``(y, z)``.

    The result is checked: recomposing must be equivalent to ``x`` up to its
    horizon, otherwise InvalidPartitionError.
    """
    if isinstance(seam, ProductSeam):
        y, z = _product_factor(x, seam, 0), _product_factor(x, seam, 1)
        if set(itertools.product(y.input.values, z.input.values)) != set(x.input.values):
            raise InvalidPartitionError("machine inputs are not the full product of the factor inputs")
    elif isinstance(seam, SeriesSeam):
        y, z = seam.front, _series_back(x, seam.front)
    else:
        raise TypeError(f"unknown seam {seam!r}")
    if not equivalent(recompose(y, z, seam), x, x.horizon):
        raise InvalidPartitionError("recomposition is not equivalent to the original machine")
    return y, z


# -- abstraction --------------------------------------------------------------

def abstract(sys: MealySystem, merge=None, projection=None) -> AbstractSystem:
    """Merge states and/or project outputs; image sets collect merged behaviour."""
    merge = dict(merge) if merge is not None else {s: s for s in sys.states.values}
    projection = dict(projection) if projection is not None else {o: o for o in sys.output.values}
    missing = [s for s in sys.states.values if s not in merge]
    if missing:
        raise ValueError(f"merge map is not total: {missing!r}")
    missing = [o for o in sys.output.values if o not in projection]
    if missing:
        raise ValueError(f"projection is not total: {missing!r}")
    states = tuple(dict.fromkeys(merge[s] for s in sys.states.values))
    outs = tuple(dict.fromkeys(projection[o] for o in sys.output.values))
    F, Q = {}, {}
    for i in sys.input.values:
        for s in sys.states.values:
            for t in range(sys.horizon + 1):
                key = (i, merge[s], t)
                F.setdefault(key, set()).add(projection[sys.f(i, s, t)])
                Q.setdefault(key, set()).add(merge[sys.q(i, s, t)])
    F = {k: frozenset(v) for k, v in F.items()}
    Q = {k: frozenset(v) for k, v in Q.items()}
    return AbstractSystem(sys.time, sys.input, DataSet(outs), DataSet(states), merge[sys.q0], F, Q)
