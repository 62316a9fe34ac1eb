"""Pure-Python kernels. Same signatures and results as the compiled ``_ckernels``.

Tables are nested sequences indexed ``[t][state][input]`` holding integer
codes (output code for F, state code for Q).
"""


def simulate_codes(F, Q, q0, inputs):
    outs = []
    states = [q0]
    s = q0
    for t, i in enumerate(inputs):
        outs.append(F[t][s][i])
        s = Q[t][s][i]
        states.append(s)
    return outs, states


def simulate_batch(F, Q, q0, streams):
    return [simulate_codes(F, Q, q0, stream)[0] for stream in streams]


def equivalent_codes(Fa, Qa, qa, Fb, Qb, qb, n_in, horizon):
    """Layered reachability over state pairs.

    Two deterministic machines agree on every input stream of length at most
    ``horizon`` iff, for every state pair reachable in ``d < horizon`` steps and
    every input, the outputs at time ``d`` coincide.
    """
    layer = {(qa, qb)}
    for d in range(horizon):
        nxt = set()
        fa, fb, ga, gb = Fa[d], Fb[d], Qa[d], Qb[d]
        for sa, sb in layer:
            ra, rb = fa[sa], fb[sb]
            for i in range(n_in):
                if ra[i] != rb[i]:
                    return False
                nxt.add((ga[sa][i], gb[sb][i]))
        layer = nxt
    return True


def reachable_counts(F, Q, q0, n_in, horizon):
    """Number of distinct states reachable at each depth up to ``horizon``."""
    layer = {q0}
    counts = [1]
    for d in range(horizon):
        layer = {Q[d][s][i] for s in layer for i in range(n_in)}
        counts.append(len(layer))
    return counts
