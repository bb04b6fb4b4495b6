# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Mirrors ``_pykernels`` result for result."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF BASELINE = 0
DEF FCFS = 1
DEF MIN_ORACLE = 2


cdef inline long long _iabs(long long x) nogil:
    return -x if x < 0 else x


def bruteforce_select(directions, Py_ssize_t n, long long s0):
    cdef const signed char[::1] d = np.ascontiguousarray(directions, dtype=np.int8)
    cdef Py_ssize_t m = d.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.arange(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] best = idx.copy()
    cdef long long[::1] iv = idx
    cdef long long total, cost, best_cost = -1
    cdef Py_ssize_t i, j
    if n > m:
        raise ValueError("mempool smaller than block")
    if n == 0:
        return best
    with nogil:
        while True:
            total = s0
            for i in range(n):
                total += d[iv[i]]
            cost = _iabs(total)
            if best_cost < 0 or cost < best_cost:
                best_cost = cost
                for i in range(n):
                    best[i] = iv[i]
            # next combination in lexicographic order
            i = n - 1
            while i >= 0 and iv[i] == m - n + i:
                i -= 1
            if i < 0:
                break
            iv[i] += 1
            for j in range(i + 1, n):
                iv[j] = iv[j - 1] + 1
    return best


cdef Py_ssize_t _greedy(const signed char[::1] row, Py_ssize_t m, Py_ssize_t n, long long s0,
                        long long[::1] buys, long long[::1] sells, long long* nb_out) nogil:
    """Fill `buys`/`sells` with arrival indices; return the number of buys to take (or -1)."""
    cdef Py_ssize_t nb = 0, ns = 0, i, lo, hi, c0, c1, x
    cdef long long t_floor, cost0, cost1
    for i in range(m):
        if row[i] > 0:
            buys[nb] = i
            nb += 1
        else:
            sells[ns] = i
            ns += 1
    nb_out[0] = nb
    if nb + ns < n:
        return -1
    lo = n - ns if n > ns else 0
    hi = n if n < nb else nb
    t_floor = n - s0
    # floor division toward -inf
    if t_floor >= 0:
        t_floor = t_floor // 2
    else:
        t_floor = -((-t_floor + 1) // 2)
    c0 = <Py_ssize_t>(t_floor if t_floor > lo else lo)
    if c0 > hi:
        c0 = hi
    c1 = <Py_ssize_t>(t_floor + 1 if t_floor + 1 > lo else lo)
    if c1 > hi:
        c1 = hi
    x = c0
    if c1 != c0:
        cost0 = _iabs(s0 + 2 * c0 - n)
        cost1 = _iabs(s0 + 2 * c1 - n)
        if cost1 < cost0:
            x = c1
        elif cost1 == cost0:
            x = c0 if sells[n - c0 - 1] < buys[c0] else c1
    return x


def greedy_select(directions, Py_ssize_t n, long long s0):
    cdef const signed char[::1] row = np.ascontiguousarray(directions, dtype=np.int8)
    cdef Py_ssize_t m = row.shape[0]
    cdef long long[::1] buys = np.empty(m, dtype=np.int64)
    cdef long long[::1] sells = np.empty(m, dtype=np.int64)
    cdef long long nb
    cdef Py_ssize_t x = _greedy(row, m, n, s0, buys, sells, &nb)
    if x < 0:
        raise ValueError("mempool smaller than block")
    out = np.concatenate([np.asarray(buys[:x]), np.asarray(sells[: n - x])])
    out.sort()
    return out


cdef Py_ssize_t _order(const signed char[::1] row, long long[::1] buys, Py_ssize_t nb,
                       long long[::1] sells, Py_ssize_t ns, long long s0,
                       long long[::1] out) nogil:
    cdef Py_ssize_t bi = 0, si = 0, k = 0
    cdef long long s = s0
    cdef bint take_buy
    while bi < nb or si < ns:
        if bi < nb and si < ns:
            if s > 0:
                take_buy = False
            elif s < 0:
                take_buy = True
            else:
                take_buy = buys[bi] < sells[si]
        else:
            take_buy = bi < nb
        if take_buy:
            out[k] = buys[bi]
            bi += 1
            s += 1
        else:
            out[k] = sells[si]
            si += 1
            s -= 1
        k += 1
    return k


def order_for_min_disorder(directions, chosen, long long s0):
    cdef const signed char[::1] row = np.ascontiguousarray(directions, dtype=np.int8)
    ch = np.asarray(chosen, dtype=np.int64)
    cdef long long[::1] buys = np.ascontiguousarray(ch[np.asarray(row)[ch] > 0])
    cdef long long[::1] sells = np.ascontiguousarray(ch[np.asarray(row)[ch] < 0])
    cdef long long[::1] out = np.empty(ch.shape[0], dtype=np.int64)
    _order(row, buys, buys.shape[0], sells, sells.shape[0], s0, out)
    return np.asarray(out)


def simulate_batch(dirs, Py_ssize_t n, int strategy, payoff):
    cdef const signed char[:, :, ::1] d = np.ascontiguousarray(dirs, dtype=np.int8)
    cdef const long long[::1] pay = np.ascontiguousarray(payoff, dtype=np.int64)
    cdef Py_ssize_t runs = d.shape[0], blocks = d.shape[1], m = d.shape[2]
    cdef Py_ssize_t npay = pay.shape[0]
    traj_a = np.zeros((runs, blocks * n), dtype=np.int64)
    mev_a = np.zeros(runs, dtype=np.int64)
    arbs_a = np.zeros(runs, dtype=np.int64)
    term_a = np.zeros(runs, dtype=np.int64)
    cdef long long[:, ::1] traj = traj_a
    cdef long long[::1] mev = mev_a
    cdef long long[::1] arbs = arbs_a
    cdef long long[::1] term = term_a
    cdef long long[::1] buys = np.empty(m, dtype=np.int64)
    cdef long long[::1] sells = np.empty(m, dtype=np.int64)
    cdef long long[::1] order = np.empty(m, dtype=np.int64)
    cdef Py_ssize_t r, b, j, ti, step, x, k, i
    cdef long long s, total, count, nb, a
    cdef int err = 0
    if strategy not in (BASELINE, FCFS, MIN_ORACLE):
        raise ValueError(f"unknown strategy code {strategy}")
    with nogil:
        for r in range(runs):
            s = 0
            step = 0
            total = 0
            count = 0
            for b in range(blocks):
                if strategy == BASELINE:
                    for j in range(n):
                        s += d[r, b, j]
                        traj[r, step] = s
                        step += 1
                elif strategy == FCFS:
                    ti = 0
                    for j in range(n):
                        if s != 0:
                            a = _iabs(s)
                            if a >= npay or pay[a] < 0:
                                err = 2
                                break
                            total += pay[a]
                            count += 1
                            s = 0
                        else:
                            if ti >= m:
                                err = 1
                                break
                            s += d[r, b, ti]
                            ti += 1
                        traj[r, step] = s
                        step += 1
                else:
                    x = _greedy(d[r, b], m, n, s, buys, sells, &nb)
                    if x < 0:
                        err = 3
                        break
                    # chosen buys are buys[:x], chosen sells are sells[:n-x]
                    k = _order(d[r, b], buys, x, sells, n - x, s, order)
                    for i in range(k):
                        s += d[r, b, order[i]]
                        traj[r, step] = s
                        step += 1
                if err:
                    break
            if err:
                break
            mev[r] = total
            arbs[r] = count
            term[r] = _iabs(traj[r, blocks * n - 1]) if blocks * n > 0 else 0
    if err == 1:
        raise ValueError("trade stream exhausted")
    if err == 2:
        raise ValueError("payoff table does not cover an imbalance reached in simulation")
    if err == 3:
        raise ValueError("mempool smaller than block")
    return traj_a, mev_a, arbs_a, term_a
