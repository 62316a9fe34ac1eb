"""Compare the compiled and pure-Python machine kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on random table-driven machines; results must agree
exactly, and the best-of-N wall time per backend is printed.
"""
import argparse
import random
import sys
import timeit

from dgm import _pykernels

try:
    from dgm import _ckernels
except ImportError:
    _ckernels = None


def random_tables(rng, n_states, n_in, n_out, horizon):
    F = [[[rng.randrange(n_out) for _ in range(n_in)] for _ in range(n_states)] for _ in range(horizon + 1)]
    Q = [[[rng.randrange(n_states) for _ in range(n_in)] for _ in range(n_states)] for _ in range(horizon + 1)]
    return F, Q


def workloads(seed=7):
    rng = random.Random(seed)
    horizon = 64
    F, Q = random_tables(rng, 32, 4, 4, horizon)
    streams = [[rng.randrange(4) for _ in range(horizon)] for _ in range(2000)]
    F2, Q2 = random_tables(rng, 48, 4, 2, horizon)
    # a machine paired with a relabelled copy of itself, so the check runs to the end
    perm = list(range(48))
    rng.shuffle(perm)
    inv = {p: k for k, p in enumerate(perm)}
    F3 = [[F2[t][inv[s]] for s in range(48)] for t in range(horizon + 1)]
    Q3 = [[[perm[x] for x in Q2[t][inv[s]]] for s in range(48)] for t in range(horizon + 1)]
    return {
        "simulate_batch": lambda k: k.simulate_batch(F, Q, 0, streams),
        "equivalent_codes": lambda k: k.equivalent_codes(F2, Q2, 0, F3, Q3, perm[0], 4, horizon),
        "reachable_counts": lambda k: k.reachable_counts(F2, Q2, 0, 4, horizon),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':<18}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}")
    for name, run in workloads().items():
        if run(_pykernels) != run(_ckernels):
            print(f"{name}: backends disagree")
            return 2
        py = min(timeit.repeat(lambda: run(_pykernels), number=1, repeat=args.repeat))
        cy = min(timeit.repeat(lambda: run(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:<18}{py:>12.4f}{cy:>12.4f}{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
