# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled mirrors of the pure-Python replication kernels.

Every routine here reproduces ``simcal._kernels._reference`` operation
for operation: same splitmix64 stream layout, same draw order, same
floating-point evaluation order.  Given equal inputs the two backends
return bit-identical results; the test suite enforces that.
"""

import numpy as np

from libc.math cimport INFINITY, NAN, cos, exp, log, sqrt

BACKEND_NAME = "compiled"

ctypedef unsigned long long u64

cdef double _INV_2_53 = 1.0 / 9007199254740992.0
cdef double _TWO_PI = 6.283185307179586


cdef inline u64 _next_u64(u64* state) noexcept nogil:
    state[0] = state[0] + <u64>0x9E3779B97F4A7C15
    cdef u64 z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _unit(u64* state) noexcept nogil:
    return <double>((_next_u64(state) >> 11) + 1) * _INV_2_53


cdef inline double _expo(u64* state, double mean) noexcept nogil:
    return -mean * log(_unit(state))


cdef inline double _normal(u64* state) noexcept nogil:
    cdef double u1 = _unit(state)
    cdef double u2 = _unit(state)
    return sqrt(-2.0 * log(u1)) * cos(_TWO_PI * u2)


cdef inline u64 _stream_seed(u64 seed, long k) noexcept nogil:
    cdef u64 st = seed + (<u64>(k + 1)) * (<u64>0x9E3779B97F4A7C15)
    return _next_u64(&st)


def stream_seed(seed, k):
    """Starting state of logical stream ``k`` under master ``seed``."""
    return int(_stream_seed(<u64>seed, <long>k))


# ---------------------------------------------------------------------------
# Discrete-event simulation kernel
# ---------------------------------------------------------------------------

def call_center_reps(
    long reps,
    seed,
    int servers,
    double arrival_mean,
    double arrival_log_mu,
    double arrival_log_sigma,
    double service_mean,
    double abandon_mean,
    double warmup,
    double horizon,
    bint breaks_on,
    double break_gap_mean,
    double break_duration_mean,
    int break_trigger_idle,
    int stop_trigger_idle,
    double[::1] out_sum_wait,
    long long[::1] out_n_served,
):
    cdef u64 master = <u64>seed
    cdef double end_time = warmup + horizon
    cdef int QCAP = 1 << 16
    cdef int QMASK = QCAP - 1

    state_arr = np.empty(servers, dtype=np.int32)
    time_arr = np.empty(servers, dtype=np.float64)
    qa_arr = np.empty(QCAP, dtype=np.float64)
    qd_arr = np.empty(QCAP, dtype=np.float64)
    cdef int[::1] svr_state = state_arr
    cdef double[::1] svr_time = time_arr
    cdef double[::1] q_arr = qa_arr
    cdef double[::1] q_dead = qd_arr

    cdef u64 main_state, brk_state
    cdef long r
    cdef int k, k_srv, k_idle, ev, idle_count, n_stop
    cdef long q_head, q_tail
    cdef double rate, gap_mean, next_arrival, next_break, sum_wait
    cdef double t, t_srv, a_t, d_t, deadline
    cdef long long n_served
    cdef bint overflow = False

    for r in range(reps):
        main_state = _stream_seed(master, 2 * r)
        brk_state = _stream_seed(master, 2 * r + 1)

        if arrival_log_sigma > 0.0:
            rate = exp(arrival_log_mu + arrival_log_sigma * _normal(&main_state))
        else:
            rate = arrival_mean
        gap_mean = 1.0 / rate

        for k in range(servers):
            svr_state[k] = 0
            svr_time[k] = INFINITY
        q_head = 0
        q_tail = 0
        next_arrival = _expo(&main_state, gap_mean)
        if breaks_on:
            next_break = _expo(&brk_state, break_gap_mean)
        else:
            next_break = INFINITY
        sum_wait = 0.0
        n_served = 0

        while True:
            t_srv = INFINITY
            k_srv = -1
            for k in range(servers):
                if svr_time[k] < t_srv:
                    t_srv = svr_time[k]
                    k_srv = k
            # Tie priority: arrival, then server event, then break tick.
            if next_arrival <= t_srv and next_arrival <= next_break:
                t = next_arrival
                ev = 0
            elif t_srv <= next_break:
                t = t_srv
                ev = 1
            else:
                t = next_break
                ev = 2
            if t >= end_time:
                break

            if ev == 0:
                next_arrival = t + _expo(&main_state, gap_mean)
                k_idle = -1
                for k in range(servers):
                    if svr_state[k] == 0:
                        k_idle = k
                        break
                if k_idle >= 0:
                    if t >= warmup:
                        n_served += 1
                    svr_state[k_idle] = 1
                    svr_time[k_idle] = t + _expo(&main_state, service_mean)
                else:
                    if abandon_mean != INFINITY:
                        deadline = t + _expo(&main_state, abandon_mean)
                    else:
                        deadline = INFINITY
                    if q_tail - q_head >= QCAP:
                        overflow = True
                        break
                    q_arr[q_tail & QMASK] = t
                    q_dead[q_tail & QMASK] = deadline
                    q_tail += 1
            elif ev == 1:
                svr_state[k_srv] = 0
                svr_time[k_srv] = INFINITY
                while q_head < q_tail:
                    a_t = q_arr[q_head & QMASK]
                    d_t = q_dead[q_head & QMASK]
                    q_head += 1
                    if d_t <= t:
                        continue
                    if t >= warmup:
                        sum_wait += t - a_t
                        n_served += 1
                    svr_state[k_srv] = 1
                    svr_time[k_srv] = t + _expo(&main_state, service_mean)
                    break
            else:
                next_break = t + _expo(&brk_state, break_gap_mean)
                idle_count = 0
                for k in range(servers):
                    if svr_state[k] == 0:
                        idle_count += 1
                if idle_count >= break_trigger_idle:
                    n_stop = idle_count - stop_trigger_idle
                    for k in range(servers):
                        if n_stop <= 0:
                            break
                        if svr_state[k] == 0:
                            svr_state[k] = 3
                            n_stop -= 1
                    for k in range(servers):
                        if svr_state[k] == 0:
                            svr_state[k] = 2
                            svr_time[k] = t + _expo(&brk_state, break_duration_mean)

        if overflow:
            raise RuntimeError("waiting-line buffer overflow (more than 65536 simultaneous waiters)")
        out_sum_wait[r] = sum_wait
        out_n_served[r] = n_served


# ---------------------------------------------------------------------------
# Random-walk Metropolis kernel
# ---------------------------------------------------------------------------

cdef double _log_target(
    double* p,
    double* q,
    int dim,
    double inv_m,
    double[::1] n_counts,
    double[::1] sim_counts,
    double lam_d,
    double lam_p,
    double[:, ::1] rd_inv,
    double[:, ::1] rp_inv,
    double* d_buf,
) noexcept nogil:
    cdef int a, b
    cdef double acc, c, quad, inner, va
    for a in range(dim):
        if p[a] <= 0.0 or q[a] <= 0.0:
            return -INFINITY
    acc = 0.0
    for a in range(dim):
        c = n_counts[a]
        if c != 0.0:
            acc += c * log(p[a])
    for a in range(dim):
        c = sim_counts[a]
        if c != 0.0:
            acc += c * log(q[a])
    if lam_p != 0.0:
        quad = 0.0
        for a in range(dim):
            va = q[a] - inv_m
            inner = 0.0
            for b in range(dim):
                inner += rp_inv[a, b] * (q[b] - inv_m)
            quad += va * inner
        acc -= lam_p * quad
    if lam_d != 0.0:
        for a in range(dim):
            d_buf[a] = p[a] / q[a] - 1.0
        quad = 0.0
        for a in range(dim):
            va = d_buf[a]
            inner = 0.0
            for b in range(dim):
                inner += rd_inv[a, b] * d_buf[b]
            quad += va * inner
        acc -= lam_d * quad
    return acc


cdef double _propose_rows(
    u64* state, double* cur, double* prop, int s, int m, double step, double* y_buf
) noexcept nogil:
    cdef int j, i, base
    cdef double log_jac = 0.0
    cdef double ref, mx, y, denom, x
    for j in range(s):
        base = j * m
        ref = log(cur[base + m - 1])
        mx = 0.0
        for i in range(m - 1):
            y = log(cur[base + i]) - ref + step * _normal(state)
            y_buf[i] = y
            if y > mx:
                mx = y
        denom = exp(-mx)
        for i in range(m - 1):
            y_buf[i] = exp(y_buf[i] - mx)
            denom += y_buf[i]
        for i in range(m - 1):
            x = y_buf[i] / denom
            prop[base + i] = x
            if x <= 0.0:
                return -INFINITY
            log_jac += log(x)
        x = exp(-mx) / denom
        prop[base + m - 1] = x
        if x <= 0.0:
            return -INFINITY
        log_jac += log(x)
    return log_jac


def mh_chain(
    long n_keep,
    long burn_in,
    double step0,
    bint adapt,
    seed,
    double[::1] n_counts,
    double[::1] sim_counts,
    double lam_d,
    double lam_p,
    double[:, ::1] rd_inv,
    double[:, ::1] rp_inv,
    double[::1] p0,
    double[::1] q0,
    int s,
    int m,
    double[:, ::1] out_p,
    double[:, ::1] out_q,
    double[::1] out_logpost,
):
    cdef int dim = s * m
    cdef double inv_m = 1.0 / m
    cdef u64 state = _stream_seed(<u64>seed, 0)

    scratch = np.empty((5, dim), dtype=np.float64)
    ybuf_arr = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef double[::1] yb = ybuf_arr
    cdef double* cur_p = &sc[0, 0]
    cdef double* cur_q = &sc[1, 0]
    cdef double* prop_p = &sc[2, 0]
    cdef double* prop_q = &sc[3, 0]
    cdef double* d_buf = &sc[4, 0]
    cdef double* y_buf = &yb[0]

    cdef int a
    for a in range(dim):
        cur_p[a] = p0[a]
        cur_q[a] = q0[a]

    cdef double cur_lt = _log_target(
        cur_p, cur_q, dim, inv_m, n_counts, sim_counts, lam_d, lam_p, rd_inv, rp_inv, d_buf
    )
    if cur_lt == -INFINITY:
        raise ValueError("chain must start at a state with finite log posterior")
    cdef double cur_jac = 0.0
    for a in range(dim):
        cur_jac += log(cur_p[a])
    for a in range(dim):
        cur_jac += log(cur_q[a])

    cdef double step = step0
    cdef long total = burn_in + n_keep
    cdef long acc_window = 0
    cdef long acc_kept = 0
    cdef long it, idx
    cdef bint accepted
    cdef double jac_p, jac_q, u, prop_lt, log_acc, rate

    for it in range(total):
        jac_p = _propose_rows(&state, cur_p, prop_p, s, m, step, y_buf)
        jac_q = _propose_rows(&state, cur_q, prop_q, s, m, step, y_buf)
        u = _unit(&state)
        accepted = False
        if jac_p > -INFINITY and jac_q > -INFINITY:
            prop_lt = _log_target(
                prop_p, prop_q, dim, inv_m, n_counts, sim_counts,
                lam_d, lam_p, rd_inv, rp_inv, d_buf,
            )
            if prop_lt > -INFINITY:
                log_acc = (prop_lt + jac_p + jac_q) - (cur_lt + cur_jac)
                if log(u) < log_acc:
                    accepted = True
                    for a in range(dim):
                        cur_p[a] = prop_p[a]
                        cur_q[a] = prop_q[a]
                    cur_lt = prop_lt
                    cur_jac = jac_p + jac_q
        if it < burn_in:
            if adapt:
                if accepted:
                    acc_window += 1
                if (it + 1) % 100 == 0:
                    rate = acc_window / 100.0
                    if rate > 0.3:
                        step *= 1.2
                    elif rate < 0.2:
                        step /= 1.2
                    if step > 10.0:
                        step = 10.0
                    elif step < 1e-4:
                        step = 1e-4
                    acc_window = 0
        else:
            idx = it - burn_in
            for a in range(dim):
                out_p[idx, a] = cur_p[a]
                out_q[idx, a] = cur_q[a]
            out_logpost[idx] = cur_lt
            if accepted:
                acc_kept += 1
    cdef double acc_rate = (<double>acc_kept) / n_keep if n_keep > 0 else 0.0
    return acc_rate, step


# ---------------------------------------------------------------------------
# Level-set grid scan kernel
# ---------------------------------------------------------------------------

def grid_scan(
    double[:, ::1] p_pts,
    double[::1] p_obj,
    double[::1] p_loga,
    double[:, ::1] q_pts,
    double[::1] q_logb,
    double[:, ::1] md,
    double log_c,
):
    cdef long n_p = p_pts.shape[0]
    cdef long n_q = q_pts.shape[0]
    cdef int dim = <int>p_pts.shape[1]
    if n_p == 0 or n_q == 0:
        return False, float("nan"), -1, -1

    v_arr = np.empty(dim, dtype=np.float64)
    cdef double[::1] vv = v_arr
    cdef double* v = &vv[0]

    cdef long ip, iq
    cdef int a, b
    cdef bint ok
    cdef double b_max = q_logb[0]
    cdef double la, ab, qa, pa, quad, inner, va

    with nogil:
        for ip in range(n_p):
            la = p_loga[ip]
            if la + b_max < log_c:
                continue
            for iq in range(n_q):
                ab = la + q_logb[iq]
                if ab < log_c:
                    break
                ok = True
                for a in range(dim):
                    qa = q_pts[iq, a]
                    pa = p_pts[ip, a]
                    if qa == 0.0:
                        if pa != 0.0:
                            ok = False
                            break
                        v[a] = 0.0
                    else:
                        v[a] = pa / qa - 1.0
                if not ok:
                    continue
                quad = 0.0
                for a in range(dim):
                    va = v[a]
                    if va != 0.0:
                        inner = 0.0
                        for b in range(dim):
                            inner += md[a, b] * v[b]
                        quad += va * inner
                if ab - quad >= log_c:
                    with gil:
                        return True, p_obj[ip], ip, iq
    return False, float("nan"), -1, -1
