"""Stock machines, random machine generation and the shipped decomposition cases."""
import itertools
import random

from .machines import MealySystem, ProductSeam, SeriesSeam, connect, feedback, product

BITS = (0, 1)
PAIRS = tuple(itertools.product(BITS, BITS))


def identity(values=BITS, horizon=8):
    return MealySystem.from_functions(horizon, values, values, ("s0",), "s0",
                                      lambda i, s, t: i, lambda i, s, t: s)


def delay(init=0, values=BITS, horizon=8):
    """Unit delay: outputs the held value, then holds the current input."""
    return MealySystem.from_functions(horizon, values, values, values, init,
                                      lambda i, s, t: s, lambda i, s, t: i)


def stateless(fn, inputs, outputs, horizon=8):
    return MealySystem.from_functions(horizon, inputs, outputs, ("s0",), "s0",
                                      lambda i, s, t: fn(i), lambda i, s, t: s)


def nand(horizon=8):
    return stateless(lambda i: 1 - (i[0] & i[1]), PAIRS, BITS, horizon)


def and_gate(horizon=8):
    return stateless(lambda i: i[0] & i[1], PAIRS, BITS, horizon)


def or_gate(horizon=8):
    return stateless(lambda i: i[0] | i[1], PAIRS, BITS, horizon)


def xor_gate(horizon=8):
    return stateless(lambda i: i[0] ^ i[1], PAIRS, BITS, horizon)


def not_gate(horizon=8):
    return stateless(lambda i: 1 - i, BITS, BITS, horizon)


def not_as_nand(horizon=8):
    """NAND with both inputs tied: reads a bit pair ``(x, x)``."""
    return nand(horizon)


def tie(values=BITS):
    """Wiring that duplicates one output onto both inputs of a two-input gate."""
    return {v: (v, v) for v in values}


def toggle(horizon=8, init=0):
    """Delay and inverter in a loop: 0, 1, 0, 1, ..."""
    return feedback(connect(not_gate(horizon), delay(init, horizon=horizon)), 0, 0)


def random_machine(rng: random.Random, n_states=None, n_in=None, n_out=None, horizon=8):
    n_states = n_states or rng.randint(1, 4)
    n_in = n_in or rng.randint(1, 3)
    n_out = n_out or rng.randint(1, 3)
    ins, outs, states = tuple(range(n_in)), tuple(range(n_out)), tuple(range(n_states))
    F = {(i, s, t): rng.randrange(n_out) for t in range(horizon + 1) for s in states for i in ins}
    Q = {(i, s, t): rng.randrange(n_states) for t in range(horizon + 1) for s in states for i in ins}
    return MealySystem.from_functions(horizon, ins, outs, states, rng.randrange(n_states),
                                      lambda i, s, t: F[i, s, t], lambda i, s, t: Q[i, s, t])


def decomposition_cases(horizon=6):
    """Ten ``(name, machine, seam)`` cases whose decomposition must round-trip."""
    T = horizon
    rng = random.Random(20240611)
    cases = [
        ("identity||delay", product(identity(horizon=T), delay(0, horizon=T)), ProductSeam()),
        ("delay0||delay1", product(delay(0, horizon=T), delay(1, horizon=T)), ProductSeam()),
        ("nand||not", product(nand(T), not_gate(T)), ProductSeam()),
        ("and=nand;not", and_gate(T), SeriesSeam(nand(T))),
        ("or=notnot;nand", or_gate(T),
         SeriesSeam(stateless(lambda i: (1 - i[0], 1 - i[1]), PAIRS, PAIRS, T))),
        ("xor=split;or", xor_gate(T),
         SeriesSeam(stateless(lambda i: (i[0] & (1 - i[1]), (1 - i[0]) & i[1]), PAIRS, PAIRS, T))),
        ("random||random/a", product(random_machine(rng, horizon=T), random_machine(rng, horizon=T)),
         ProductSeam()),
        ("random||random/b", product(random_machine(rng, horizon=T), random_machine(rng, horizon=T)),
         ProductSeam()),
    ]
    packed = MealySystem.from_functions(
        T, PAIRS, PAIRS, (0, 1, 2, 3), 1,
        lambda i, s, t: (s // 2, s % 2),
        lambda i, s, t: 2 * i[0] + i[1],
    )
    cases.append(("packed-delays", packed, ProductSeam({s: (s // 2, s % 2) for s in range(4)})))
    delayed_nand = MealySystem.from_functions(
        T, PAIRS, BITS, BITS, 0, lambda i, s, t: s, lambda i, s, t: 1 - (i[0] & i[1]))
    cases.append(("delay-after-nand", delayed_nand, SeriesSeam(nand(T))))
    return cases
