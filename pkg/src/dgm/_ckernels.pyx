# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for table-driven Mealy machines.

Mirrors ``dgm._pykernels``; tables arrive as nested Python sequences and are
packed once per call into flat C arrays indexed ``(t * S + s) * I + i``.
"""
from libc.stdlib cimport malloc, free
from libc.string cimport memset


cdef int *_pack(object T, int nt, int ns, int ni) except NULL:
    cdef int *buf = <int *> malloc(nt * ns * ni * sizeof(int))
    if buf == NULL:
        raise MemoryError()
    cdef int t, s, i
    cdef object row_t, row_s
    for t in range(nt):
        row_t = T[t]
        for s in range(ns):
            row_s = row_t[s]
            for i in range(ni):
                buf[(t * ns + s) * ni + i] = row_s[i]
    return buf


def simulate_codes(F, Q, q0, inputs):
    cdef int n = len(inputs)
    cdef int s = q0
    cdef int t, i
    outs = [0] * n
    states = [0] * (n + 1)
    states[0] = s
    for t in range(n):
        i = inputs[t]
        outs[t] = F[t][s][i]
        s = Q[t][s][i]
        states[t + 1] = s
    return outs, states


def simulate_batch(F, Q, q0, streams):
    cdef int nt = len(F)
    cdef int ns = len(F[0])
    cdef int ni = len(F[0][0])
    cdef int *fb = _pack(F, nt, ns, ni)
    cdef int *qb
    try:
        qb = _pack(Q, nt, ns, ni)
    except BaseException:
        free(fb)
        raise
    cdef int s, t, i, n, k
    result = []
    try:
        for stream in streams:
            n = len(stream)
            row = [0] * n
            s = q0
            for t in range(n):
                i = stream[t]
                k = (t * ns + s) * ni + i
                row[t] = fb[k]
                s = qb[k]
            result.append(row)
    finally:
        free(fb)
        free(qb)
    return result


def equivalent_codes(Fa, Qa, int qa, Fb, Qb, int qb, int n_in, int horizon):
    if horizon <= 0:
        return True
    cdef int na = len(Fa[0])
    cdef int nb = len(Fb[0])
    cdef int *fa = _pack(Fa, horizon, na, n_in)
    cdef int *ga = _pack(Qa, horizon, na, n_in)
    cdef int *fbuf = _pack(Fb, horizon, nb, n_in)
    cdef int *gb = _pack(Qb, horizon, nb, n_in)
    cdef char *cur = <char *> malloc(na * nb)
    cdef char *nxt = <char *> malloc(na * nb)
    cdef char *tmp
    cdef int d, sa, sb, i, ka, kb
    cdef bint ok = True
    try:
        memset(cur, 0, na * nb)
        cur[qa * nb + qb] = 1
        for d in range(horizon):
            memset(nxt, 0, na * nb)
            for sa in range(na):
                for sb in range(nb):
                    if not cur[sa * nb + sb]:
                        continue
                    for i in range(n_in):
                        ka = (d * na + sa) * n_in + i
                        kb = (d * nb + sb) * n_in + i
                        if fa[ka] != fbuf[kb]:
                            ok = False
                            break
                        nxt[ga[ka] * nb + gb[kb]] = 1
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
            tmp = cur
            cur = nxt
            nxt = tmp
    finally:
        free(fa)
        free(ga)
        free(fbuf)
        free(gb)
        free(cur)
        free(nxt)
    return ok


def reachable_counts(F, Q, int q0, int n_in, int horizon):
    cdef int ns = len(F[0])
    counts = [1]
    if horizon <= 0:
        return counts
    cdef int *g = _pack(Q, horizon, ns, n_in)
    cdef char *cur = <char *> malloc(ns)
    cdef char *nxt = <char *> malloc(ns)
    cdef char *tmp
    cdef int d, s, i, c
    try:
        memset(cur, 0, ns)
        cur[q0] = 1
        for d in range(horizon):
            memset(nxt, 0, ns)
            for s in range(ns):
                if cur[s]:
                    for i in range(n_in):
                        nxt[g[(d * ns + s) * n_in + i]] = 1
            c = 0
            for s in range(ns):
                c += nxt[s]
            counts.append(c)
            tmp = cur
            cur = nxt
            nxt = tmp
    finally:
        free(g)
        free(cur)
        free(nxt)
    return counts
