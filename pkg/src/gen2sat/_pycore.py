"""Pure-Python kernels.

Reference implementations of the hot loops in ``_core.pyx``. Both versions
consume randomness only through ``Generator.random()`` (the bit generator's
``next_double``) in the same order and perform the same floating-point
operations, so given equal inputs they return identical arrays.
"""

from __future__ import annotations

import numpy as np

POS, NEG = 0, 1
PREFER_POSITIVE, PREFER_NEGATIVE = 0, 1


def scc(indptr, indices, nv):
    """Iterative Tarjan. Components are numbered in completion order,
    which is a reverse topological order of the condensation."""
    indptr = np.asarray(indptr, dtype=np.int64).tolist()
    indices = np.asarray(indices, dtype=np.int64).tolist()
    index = [-1] * nv
    low = [0] * nv
    onstack = [False] * nv
    comp = [-1] * nv
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for s in range(nv):
        if index[s] != -1:
            continue
        index[s] = low[s] = counter
        counter += 1
        stack.append(s)
        onstack[s] = True
        call = [[s, indptr[s]]]
        while call:
            frame = call[-1]
            v, e = frame
            if e < indptr[v + 1]:
                w = indices[e]
                frame[1] = e + 1
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    onstack[w] = True
                    call.append([w, indptr[w]])
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            call.pop()
            if call:
                p = call[-1][0]
                if low[v] < low[p]:
                    low[p] = low[v]
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return np.array(comp, dtype=np.int32), ncomp


def inv_binomial(N, p, u):
    """Inverse-transform draw from Bin(N, p) for the uniform ``u``."""
    if N <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return N
    q = 1.0 - p
    r = p / q
    pk = q ** N
    if pk == 0.0:
        raise OverflowError("binomial mass at 0 underflows; N*p too large for inverse transform")
    cdf = pk
    k = 0
    while u >= cdf and k < N:
        pk = pk * (((N - k) * r) / (k + 1))
        k += 1
        cdf += pk
        if pk == 0.0:
            break
    return k


def inv_table(cdf, u):
    k = 0
    while u >= cdf[k]:
        k += 1
    return k


def _choose(alive, where, u_count, k, rng, out):
    # partial Fisher-Yates over alive[0:u_count]
    for j in range(k):
        r = j + int(rng.random() * (u_count - j))
        a, b = alive[j], alive[r]
        alive[j], alive[r] = b, a
        where[b] = j
        where[a] = r
        out.append(alive[j])


def explore(p0, p1, p2, alive_init, n, start, T, policy, rng, cdfs=None):
    """Stack exploration over a lazily revealed random formula.

    ``alive_init`` holds 0-based alive variables (restriction minus the start
    variable). ``start`` is a vertex index. When ``cdfs`` is a triple of CDF
    tables for F0, F1, F2 the 2-type traversal is run on shared uniforms.
    """
    alive = [int(v) for v in alive_init]
    where = [-1] * n
    for i, v in enumerate(alive):
        where[v] = i
    u = len(alive)
    spos: list[int] = []
    sneg: list[int] = []
    if start & 1:
        sneg.append(start)
    else:
        spos.append(start)

    coupled = cdfs is not None
    if coupled:
        cdf0, cdf1, cdf2 = (list(c) for c in cdfs)
        x1, x2 = (0, 1) if start & 1 else (1, 0)
    else:
        x1 = x2 = 0

    U = np.empty(T + 1, dtype=np.int64)
    AP = np.empty(T + 1, dtype=np.int64)
    AN = np.empty(T + 1, dtype=np.int64)
    X1 = np.zeros(T + 1, dtype=np.int64)
    X2 = np.zeros(T + 1, dtype=np.int64)
    cur = np.full(T, -1, dtype=np.int8)
    exposed = np.full(T, -1, dtype=np.int64)
    act_v: list[int] = []
    act_t: list[int] = []
    U[0], AP[0], AN[0], X1[0], X2[0] = u, len(spos), len(sneg), x1, x2
    chosen_pos: list[int] = []
    chosen_neg: list[int] = []

    for t in range(T):
        visit = -1
        if coupled and (x1 > 0 or x2 > 0):
            visit = POS if x1 > 0 else NEG
        if visit == POS and spos:
            pop = POS
        elif visit == NEG and sneg:
            pop = NEG
        elif policy == PREFER_NEGATIVE:
            pop = NEG if sneg else (POS if spos else -1)
        else:
            pop = POS if spos else (NEG if sneg else -1)

        if pop != -1:
            lit = spos.pop() if pop == POS else sneg.pop()
            cur[t] = pop
            exposed[t] = lit
            if pop == POS:
                pp, pn = p1, p0
            else:
                pp, pn = p2, p1
            ua = rng.random()
            ub = rng.random()
            kpos = inv_binomial(u, pp, ua)
            kneg = inv_binomial(u, pn, ub)
            if visit == pop:
                if pop == POS:
                    x1 += inv_table(cdf1, ua) - 1
                    x2 += inv_table(cdf0, ub)
                else:
                    x1 += inv_table(cdf2, ua)
                    x2 += inv_table(cdf1, ub) - 1
                visit = -1
            chosen_pos.clear()
            chosen_neg.clear()
            _choose(alive, where, u, kpos, rng, chosen_pos)
            _choose(alive, where, u, kneg, rng, chosen_neg)
            chosen_pos.sort()
            chosen_neg.sort()
            for v in chosen_pos:
                spos.append(2 * v)
                act_v.append(2 * v)
                act_t.append(t + 1)
            for v in chosen_neg:
                sneg.append(2 * v + 1)
                act_v.append(2 * v + 1)
                act_t.append(t + 1)
            for v in chosen_pos + chosen_neg:
                i = where[v]
                if i < 0:
                    continue
                last = alive[u - 1]
                alive[i] = last
                where[last] = i
                alive[u - 1] = v
                where[v] = -1
                u -= 1
        if visit != -1:
            # traversal moves on its own randomness
            ua = rng.random()
            ub = rng.random()
            if visit == POS:
                x1 += inv_table(cdf1, ua) - 1
                x2 += inv_table(cdf0, ub)
            else:
                x1 += inv_table(cdf2, ua)
                x2 += inv_table(cdf1, ub) - 1
        U[t + 1], AP[t + 1], AN[t + 1] = u, len(spos), len(sneg)
        X1[t + 1], X2[t + 1] = x1, x2

    return {
        "u": U,
        "a_pos": AP,
        "a_neg": AN,
        "current": cur,
        "exposed": exposed,
        "act_vertex": np.array(act_v, dtype=np.int64),
        "act_step": np.array(act_t, dtype=np.int64),
        "stack_pos": np.array(spos, dtype=np.int64),
        "stack_neg": np.array(sneg, dtype=np.int64),
        "x1": X1,
        "x2": X2,
    }


def traverse(cdf0, cdf1, cdf2, start_type, T, rng):
    """Type-I-first traversal of the 2-type tree; returns X1, X2 over t = 0..T."""
    cdf0, cdf1, cdf2 = list(cdf0), list(cdf1), list(cdf2)
    X1 = np.zeros(T + 1, dtype=np.int64)
    X2 = np.zeros(T + 1, dtype=np.int64)
    x1, x2 = (1, 0) if start_type == POS else (0, 1)
    X1[0], X2[0] = x1, x2
    for t in range(T):
        if x1 > 0:
            ua = rng.random()
            ub = rng.random()
            x1 += inv_table(cdf1, ua) - 1
            x2 += inv_table(cdf0, ub)
        elif x2 > 0:
            ua = rng.random()
            ub = rng.random()
            x1 += inv_table(cdf2, ua)
            x2 += inv_table(cdf1, ub) - 1
        X1[t + 1], X2[t + 1] = x1, x2
    return X1, X2
