# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_pycore`` operation for operation."""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport pow
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

cnp.import_array()

ctypedef long long i64

cdef enum:
    POS = 0
    NEG = 1
    PREFER_NEGATIVE = 1


cdef inline bitgen_t* _bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _next(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


def scc(const i64[::1] indptr, const i64[::1] indices, Py_ssize_t nv):
    cdef cnp.ndarray[cnp.int32_t, ndim=1] comp_arr = np.full(nv, -1, dtype=np.int32)
    cdef int[::1] comp = comp_arr
    cdef i64[::1] index = np.full(nv, -1, dtype=np.int64)
    cdef i64[::1] low = np.zeros(nv, dtype=np.int64)
    cdef unsigned char[::1] onstack = np.zeros(nv, dtype=np.uint8)
    cdef i64[::1] stack = np.empty(nv, dtype=np.int64)
    cdef i64[::1] cs_v = np.empty(nv, dtype=np.int64)
    cdef i64[::1] cs_e = np.empty(nv, dtype=np.int64)
    cdef Py_ssize_t sp = 0, csp = 0, s, v, w, p
    cdef i64 e, counter = 0
    cdef int ncomp = 0
    with nogil:
        for s in range(nv):
            if index[s] != -1:
                continue
            index[s] = counter
            low[s] = counter
            counter += 1
            stack[sp] = s
            sp += 1
            onstack[s] = 1
            cs_v[0] = s
            cs_e[0] = indptr[s]
            csp = 1
            while csp > 0:
                v = cs_v[csp - 1]
                e = cs_e[csp - 1]
                if e < indptr[v + 1]:
                    w = indices[e]
                    cs_e[csp - 1] = e + 1
                    if index[w] == -1:
                        index[w] = counter
                        low[w] = counter
                        counter += 1
                        stack[sp] = w
                        sp += 1
                        onstack[w] = 1
                        cs_v[csp] = w
                        cs_e[csp] = indptr[w]
                        csp += 1
                    elif onstack[w] and index[w] < low[v]:
                        low[v] = index[w]
                    continue
                csp -= 1
                if csp > 0:
                    p = cs_v[csp - 1]
                    if low[v] < low[p]:
                        low[p] = low[v]
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        onstack[w] = 0
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
    return comp_arr, ncomp


cdef inline i64 _inv_binomial(i64 N, double p, double u) noexcept nogil:
    cdef double q, r, pk, cdf
    cdef i64 k
    if N <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return N
    q = 1.0 - p
    r = p / q
    pk = pow(q, <double>N)
    if pk == 0.0:
        return -1
    cdf = pk
    k = 0
    while u >= cdf and k < N:
        pk = pk * (((<double>(N - k)) * r) / <double>(k + 1))
        k += 1
        cdf += pk
        if pk == 0.0:
            break
    return k


def inv_binomial(i64 N, double p, double u):
    cdef i64 k = _inv_binomial(N, p, u)
    if k < 0:
        raise OverflowError("binomial mass at 0 underflows; N*p too large for inverse transform")
    return k


cdef inline i64 _inv_table(const double[::1] cdf, double u) noexcept nogil:
    cdef i64 k = 0
    while u >= cdf[k]:
        k += 1
    return k


def inv_table(const double[::1] cdf, double u):
    return _inv_table(cdf, u)


cdef inline void _choose(i64* alive, i64* where, i64 u_count, i64 k,
                         bitgen_t* bg, i64* out) noexcept nogil:
    cdef i64 j, r, a, b
    for j in range(k):
        r = j + <i64>(_next(bg) * <double>(u_count - j))
        a = alive[j]
        b = alive[r]
        alive[j] = b
        alive[r] = a
        where[b] = j
        where[a] = r
        out[j] = alive[j]


cdef inline void _isort(i64* a, i64 k) noexcept nogil:
    cdef i64 i, j, x
    for i in range(1, k):
        x = a[i]
        j = i - 1
        while j >= 0 and a[j] > x:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = x


def explore(double p0, double p1, double p2, alive_init, Py_ssize_t n, i64 start,
            Py_ssize_t T, int policy, rng, cdfs=None):
    init = np.asarray(alive_init, dtype=np.int64)
    cdef i64 u = init.shape[0]
    alive_arr = np.zeros(u + 1, dtype=np.int64)
    alive_arr[:u] = init
    cdef i64[::1] alive = alive_arr
    cdef i64[::1] where = np.full(n, -1, dtype=np.int64)
    cdef i64 i
    for i in range(u):
        where[alive[i]] = i
    cdef i64[::1] spos = np.empty(u + 1, dtype=np.int64)
    cdef i64[::1] sneg = np.empty(u + 1, dtype=np.int64)
    cdef i64 npos = 0, nneg = 0
    if start & 1:
        sneg[0] = start
        nneg = 1
    else:
        spos[0] = start
        npos = 1

    cdef bint coupled = cdfs is not None
    cdef const double[::1] cdf0
    cdef const double[::1] cdf1
    cdef const double[::1] cdf2
    cdef i64 x1 = 0, x2 = 0
    if coupled:
        cdf0 = np.ascontiguousarray(cdfs[0], dtype=np.float64)
        cdf1 = np.ascontiguousarray(cdfs[1], dtype=np.float64)
        cdf2 = np.ascontiguousarray(cdfs[2], dtype=np.float64)
        if start & 1:
            x2 = 1
        else:
            x1 = 1

    U_arr = np.empty(T + 1, dtype=np.int64)
    AP_arr = np.empty(T + 1, dtype=np.int64)
    AN_arr = np.empty(T + 1, dtype=np.int64)
    X1_arr = np.zeros(T + 1, dtype=np.int64)
    X2_arr = np.zeros(T + 1, dtype=np.int64)
    cur_arr = np.full(T, -1, dtype=np.int8)
    exp_arr = np.full(T, -1, dtype=np.int64)
    actv_arr = np.empty(2 * u + 1, dtype=np.int64)
    actt_arr = np.empty(2 * u + 1, dtype=np.int64)
    cdef i64[::1] U = U_arr
    cdef i64[::1] AP = AP_arr
    cdef i64[::1] AN = AN_arr
    cdef i64[::1] X1 = X1_arr
    cdef i64[::1] X2 = X2_arr
    cdef signed char[::1] cur = cur_arr
    cdef i64[::1] exposed = exp_arr
    cdef i64[::1] act_v = actv_arr
    cdef i64[::1] act_t = actt_arr
    cdef i64 nact = 0

    cdef i64* chosen_pos = <i64*> malloc((u + 1) * sizeof(i64))
    cdef i64* chosen_neg = <i64*> malloc((u + 1) * sizeof(i64))
    if chosen_pos == NULL or chosen_neg == NULL:
        free(chosen_pos)
        free(chosen_neg)
        raise MemoryError()

    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t t
    cdef int visit, pop
    cdef i64 lit, kpos, kneg, v, last, idx, j
    cdef double pp, pn, ua, ub
    cdef bint overflow = False

    U[0] = u
    AP[0] = npos
    AN[0] = nneg
    X1[0] = x1
    X2[0] = x2
    try:
      with rng.bit_generator.lock:
        with nogil:
            for t in range(T):
                visit = -1
                if coupled and (x1 > 0 or x2 > 0):
                    visit = POS if x1 > 0 else NEG
                if visit == POS and npos > 0:
                    pop = POS
                elif visit == NEG and nneg > 0:
                    pop = NEG
                elif policy == PREFER_NEGATIVE:
                    pop = NEG if nneg > 0 else (POS if npos > 0 else -1)
                else:
                    pop = POS if npos > 0 else (NEG if nneg > 0 else -1)

                if pop != -1:
                    if pop == POS:
                        npos -= 1
                        lit = spos[npos]
                        pp = p1
                        pn = p0
                    else:
                        nneg -= 1
                        lit = sneg[nneg]
                        pp = p2
                        pn = p1
                    cur[t] = pop
                    exposed[t] = lit
                    ua = _next(bg)
                    ub = _next(bg)
                    kpos = _inv_binomial(u, pp, ua)
                    kneg = _inv_binomial(u, pn, ub)
                    if kpos < 0 or kneg < 0:
                        overflow = True
                        break
                    if visit == pop:
                        if pop == POS:
                            x1 += _inv_table(cdf1, ua) - 1
                            x2 += _inv_table(cdf0, ub)
                        else:
                            x1 += _inv_table(cdf2, ua)
                            x2 += _inv_table(cdf1, ub) - 1
                        visit = -1
                    _choose(&alive[0], &where[0], u, kpos, bg, chosen_pos)
                    _choose(&alive[0], &where[0], u, kneg, bg, chosen_neg)
                    _isort(chosen_pos, kpos)
                    _isort(chosen_neg, kneg)
                    for j in range(kpos):
                        v = chosen_pos[j]
                        spos[npos] = 2 * v
                        npos += 1
                        act_v[nact] = 2 * v
                        act_t[nact] = t + 1
                        nact += 1
                    for j in range(kneg):
                        v = chosen_neg[j]
                        sneg[nneg] = 2 * v + 1
                        nneg += 1
                        act_v[nact] = 2 * v + 1
                        act_t[nact] = t + 1
                        nact += 1
                    for j in range(kpos + kneg):
                        v = chosen_pos[j] if j < kpos else chosen_neg[j - kpos]
                        idx = where[v]
                        if idx < 0:
                            continue
                        last = alive[u - 1]
                        alive[idx] = last
                        where[last] = idx
                        alive[u - 1] = v
                        where[v] = -1
                        u -= 1
                if visit != -1:
                    ua = _next(bg)
                    ub = _next(bg)
                    if visit == POS:
                        x1 += _inv_table(cdf1, ua) - 1
                        x2 += _inv_table(cdf0, ub)
                    else:
                        x1 += _inv_table(cdf2, ua)
                        x2 += _inv_table(cdf1, ub) - 1
                U[t + 1] = u
                AP[t + 1] = npos
                AN[t + 1] = nneg
                X1[t + 1] = x1
                X2[t + 1] = x2
    finally:
        free(chosen_pos)
        free(chosen_neg)
    if overflow:
        raise OverflowError("binomial mass at 0 underflows; N*p too large for inverse transform")

    return {
        "u": U_arr,
        "a_pos": AP_arr,
        "a_neg": AN_arr,
        "current": cur_arr,
        "exposed": exp_arr,
        "act_vertex": actv_arr[:nact].copy(),
        "act_step": actt_arr[:nact].copy(),
        "stack_pos": np.asarray(spos)[:npos].copy(),
        "stack_neg": np.asarray(sneg)[:nneg].copy(),
        "x1": X1_arr,
        "x2": X2_arr,
    }


def traverse(cdf0_in, cdf1_in, cdf2_in, int start_type, Py_ssize_t T, rng):
    cdef const double[::1] cdf0 = np.ascontiguousarray(cdf0_in, dtype=np.float64)
    cdef const double[::1] cdf1 = np.ascontiguousarray(cdf1_in, dtype=np.float64)
    cdef const double[::1] cdf2 = np.ascontiguousarray(cdf2_in, dtype=np.float64)
    X1_arr = np.zeros(T + 1, dtype=np.int64)
    X2_arr = np.zeros(T + 1, dtype=np.int64)
    cdef i64[::1] X1 = X1_arr
    cdef i64[::1] X2 = X2_arr
    cdef i64 x1 = 1 if start_type == POS else 0
    cdef i64 x2 = 0 if start_type == POS else 1
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t t
    cdef double ua, ub
    X1[0] = x1
    X2[0] = x2
    with rng.bit_generator.lock:
      with nogil:
        for t in range(T):
            if x1 > 0:
                ua = _next(bg)
                ub = _next(bg)
                x1 += _inv_table(cdf1, ua) - 1
                x2 += _inv_table(cdf0, ub)
            elif x2 > 0:
                ua = _next(bg)
                ub = _next(bg)
                x1 += _inv_table(cdf2, ua)
                x2 += _inv_table(cdf1, ub) - 1
            X1[t + 1] = x1
            X2[t + 1] = x2
    return X1_arr, X2_arr
