import itertools
import random
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgm import _pykernels, kernels
from dgm.errors import (AlgebraicLoopError, InvalidPartitionError, OutOfDomainError, SelfWiringError,
                        SignatureMismatchError, TimeScaleMismatchError, TypeMismatchError)
from dgm.library import (and_gate, decomposition_cases, delay, identity, nand, not_as_nand, not_gate,
                         random_machine, tie, toggle, xor_gate)
from dgm.machines import (MealySystem, ProductSeam, SeriesSeam, Trace, abstract, connect, decompose,
                          equivalent, feedback, product, project, simulate, simulate_many, step)
from dgm.oracles import abstract_contains, brute_equivalent, fold_simulate


def streams(values, horizon):
    return [list(s) for n in range(1, horizon + 1) for s in itertools.product(values, repeat=n)]


def test_delay_shifts_its_input():
    assert simulate(delay(0, horizon=4), [1, 0, 1, 1]).outputs == (0, 1, 0, 1)
    t = toggle(4)
    assert simulate(t, [t.input.values[0]] * 4).outputs == (0, 1, 0, 1)


def test_simulate_agrees_with_a_plain_fold():
    rng = random.Random(1)
    for _ in range(30):
        m = random_machine(rng, horizon=5)
        for s in streams(m.input.values, 3):
            assert list(simulate(m, s).outputs) == fold_simulate(m, s)


def test_trace_replays_and_checks_lengths():
    m = delay(1, horizon=3)
    tr = simulate(m, [0, 0, 1])
    assert tr.states == (1, 0, 0, 1)
    assert tr.replays_on(m)
    with pytest.raises(ValueError):
        Trace((0,), (0, 1), (0, 0))


def test_out_of_domain_inputs_are_rejected():
    m = nand(2)
    with pytest.raises(OutOfDomainError):
        simulate(m, [(0, 2)])
    with pytest.raises(OutOfDomainError):
        simulate(m, [(0, 0)] * 3)
    with pytest.raises(OutOfDomainError):
        step(m, "nope", (0, 0), 0)
    with pytest.raises(OutOfDomainError):
        step(m, "s0", (0, 0), 5)


def test_tables_must_be_total():
    with pytest.raises(TypeMismatchError):
        MealySystem.from_functions(1, (0,), (0,), ("s",), "s", lambda i, s, t: 9, lambda i, s, t: s)
    with pytest.raises(ValueError):
        MealySystem.from_functions(1, (0,), (0,), ("s",), "missing", lambda i, s, t: 0, lambda i, s, t: s)


def test_machine_serialization_round_trips():
    m = random_machine(random.Random(3), horizon=3)
    back = MealySystem.from_obj(m.to_obj())
    assert back.digest == m.digest
    assert equivalent(back, m, 3)


def test_product_runs_components_side_by_side():
    y, z = delay(0, horizon=4), not_gate(4)
    yz = product(y, z)
    out = simulate(yz, [(1, 0), (0, 1), (1, 1)]).outputs
    assert out == ((0, 1), (1, 0), (0, 0))
    assert equivalent(project(yz, 0), y, 4)


def test_connect_feeds_outputs_forward():
    and_ = connect(nand(3), not_as_nand(3), tie())
    assert equivalent(and_, and_gate(3), 3)
    assert brute_equivalent(and_, and_gate(3), 3)


def test_connect_refuses_bad_wiring():
    with pytest.raises(SelfWiringError):
        m = nand(2)
        connect(m, m)
    with pytest.raises(TypeMismatchError):
        connect(nand(2), nand(2))
    with pytest.raises(TimeScaleMismatchError):
        connect(not_gate(2), not_gate(3))


def test_feedback_needs_a_delay():
    with pytest.raises(AlgebraicLoopError):
        feedback(connect(not_gate(3), identity(horizon=3)), 0, 0)
    t = toggle(6)
    outs = simulate(t, list(t.input.values[:1]) * 6).outputs
    assert all(a != b for a, b in zip(outs, outs[1:]))


def test_equivalence_is_exact_and_checks_signatures():
    assert equivalent(xor_gate(3), xor_gate(3), 3)
    assert not equivalent(xor_gate(3), and_gate(3), 3)
    with pytest.raises(SignatureMismatchError):
        equivalent(not_gate(3), nand(3), 3)
    with pytest.raises(OutOfDomainError):
        equivalent(not_gate(3), not_gate(3), 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_equivalence_matches_stream_listing(seed):
    rng = random.Random(seed)
    a = random_machine(rng, n_in=2, horizon=4)
    b = random_machine(rng, n_in=2, n_out=len(a.output), horizon=4) if rng.random() < 0.5 else \
        MealySystem.from_obj(a.to_obj())
    assert equivalent(a, b, 4) == brute_equivalent(a, b, 4)


def test_decomposition_cases_round_trip():
    cases = decomposition_cases()
    assert len(cases) == 10
    for name, x, seam in cases:
        y, z = decompose(x, seam)
        assert y.horizon == z.horizon == x.horizon, name


def test_decomposition_rejects_dependent_factors():
    swap = MealySystem.from_functions(3, list(itertools.product((0, 1), (0, 1))),
                                      list(itertools.product((0, 1), (0, 1))), ("s",), "s",
                                      lambda i, s, t: (i[1], i[0]), lambda i, s, t: s)
    with pytest.raises(InvalidPartitionError):
        decompose(swap, ProductSeam())
    with pytest.raises(InvalidPartitionError):
        decompose(xor_gate(3), SeriesSeam(and_gate(3)))


def test_abstraction_contains_every_concrete_trace():
    rng = random.Random(5)
    for _ in range(20):
        m = random_machine(rng, horizon=4)
        merge = {s: rng.randrange(2) for s in m.states.values}
        a = abstract(m, merge)
        for s in streams(m.input.values, 3):
            outs = tuple(fold_simulate(m, s))
            assert outs in a.output_streams(s)
            assert a.admits(s, outs) and abstract_contains(a, s, outs)


def test_identity_abstraction_stays_deterministic():
    m = random_machine(random.Random(6), horizon=3)
    assert abstract(m).deterministic
    with pytest.raises(ValueError):
        abstract(m, {})


def test_kernel_backends_agree():
    rng = random.Random(7)
    for _ in range(20):
        m = random_machine(rng, horizon=6)
        codes = [[rng.randrange(len(m.input)) for _ in range(6)] for _ in range(10)]
        q0 = m.states.index[m.q0]
        assert kernels.simulate_batch(m.F, m.Q, q0, codes) == _pykernels.simulate_batch(m.F, m.Q, q0, codes)
        n = len(m.input)
        args = (m.F, m.Q, q0, m.F, m.Q, q0, n, 6)
        assert bool(kernels.equivalent_codes(*args)) == bool(_pykernels.equivalent_codes(*args)) is True


def test_pure_python_fallback_is_selectable():
    code = "from dgm import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"DGM_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"


def test_batch_simulation_matches_single_runs():
    m = random_machine(random.Random(8), horizon=5)
    batch = [[m.input.values[0]] * 5, list(m.input.values[-1:]) * 3]
    assert simulate_many(m, batch) == [simulate(m, s).outputs for s in batch]
