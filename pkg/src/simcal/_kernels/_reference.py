"""Pure-Python replication kernels.

This module defines the exact semantics — random-stream layout, draw
order, and floating-point operation order — for the three replication-
heavy kernels:

* ``call_center_reps``: discrete-event simulation of a multi-server
  queue with abandonment and an optional server-break process,
* ``mh_chain``: random-walk Metropolis over product-simplex states,
* ``grid_scan``: pruned exhaustive scan of a discretized level set.

The compiled extension (``simcal._kernels._ckernels``) mirrors this file
operation for operation; given equal inputs the two backends produce
bit-identical outputs, which the test suite verifies.  Randomness comes
from a splitmix64 generator so that both implementations can share one
integer-arithmetic specification.

Random-stream layout for the simulator: replication ``r`` owns streams
``2r`` (arrivals, services, abandonment) and ``2r + 1`` (break process).
Keeping the break process on its own stream means configurations whose
break rules never trigger reproduce the no-break simulator exactly,
draw for draw.
"""

from __future__ import annotations

import math

BACKEND_NAME = "python"

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_PI = 6.283185307179586
_INV_2_53 = 2.0**-53
_INF = math.inf


class _Stream:
    """splitmix64 stream with inverse-transform and Box-Muller draws."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & _MASK

    def u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def unit(self) -> float:
        """Uniform draw in the half-open interval (0, 1]."""
        return ((self.u64() >> 11) + 1) * _INV_2_53

    def expo(self, mean: float) -> float:
        return -mean * math.log(self.unit())

    def normal(self) -> float:
        u1 = self.unit()
        u2 = self.unit()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


def stream_seed(seed: int, k: int) -> int:
    """Starting state of logical stream ``k`` under master ``seed``."""
    st = _Stream((seed + (k + 1) * _GOLDEN) & _MASK)
    return st.u64()


# ---------------------------------------------------------------------------
# Discrete-event simulation kernel
# ---------------------------------------------------------------------------

def call_center_reps(
    reps,
    seed,
    servers,
    arrival_mean,
    arrival_log_mu,
    arrival_log_sigma,
    service_mean,
    abandon_mean,
    warmup,
    horizon,
    breaks_on,
    break_gap_mean,
    break_duration_mean,
    break_trigger_idle,
    stop_trigger_idle,
    out_sum_wait,
    out_n_served,
):
    """Run ``reps`` independent days of the queueing system.

    Writes, per replication, the total waiting time and the number of
    customers who entered service inside the measurement window
    ``[warmup, warmup + horizon)``.  Server states: 0 idle, 1 busy,
    2 on break, 3 stopped for the day.
    """
    end_time = warmup + horizon
    for r in range(reps):
        main = _Stream(stream_seed(seed, 2 * r))
        brk = _Stream(stream_seed(seed, 2 * r + 1))

        if arrival_log_sigma > 0.0:
            rate = math.exp(arrival_log_mu + arrival_log_sigma * main.normal())
        else:
            rate = arrival_mean
        gap_mean = 1.0 / rate

        svr_state = [0] * servers
        svr_time = [_INF] * servers
        q_arr: list[float] = []
        q_dead: list[float] = []
        q_head = 0
        next_arrival = main.expo(gap_mean)
        next_break = brk.expo(break_gap_mean) if breaks_on else _INF
        sum_wait = 0.0
        n_served = 0

        while True:
            t_srv = _INF
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
                next_arrival = t + main.expo(gap_mean)
                k_idle = -1
                for k in range(servers):
                    if svr_state[k] == 0:
                        k_idle = k
                        break
                if k_idle >= 0:
                    if t >= warmup:
                        n_served += 1
                    svr_state[k_idle] = 1
                    svr_time[k_idle] = t + main.expo(service_mean)
                else:
                    deadline = t + main.expo(abandon_mean) if abandon_mean != _INF else _INF
                    q_arr.append(t)
                    q_dead.append(deadline)
            elif ev == 1:
                svr_state[k_srv] = 0
                svr_time[k_srv] = _INF
                while q_head < len(q_arr):
                    a_t = q_arr[q_head]
                    d_t = q_dead[q_head]
                    q_head += 1
                    if d_t <= t:
                        continue
                    if t >= warmup:
                        sum_wait += t - a_t
                        n_served += 1
                    svr_state[k_srv] = 1
                    svr_time[k_srv] = t + main.expo(service_mean)
                    break
            else:
                next_break = t + brk.expo(break_gap_mean)
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
                            svr_time[k] = t + brk.expo(break_duration_mean)

        out_sum_wait[r] = sum_wait
        out_n_served[r] = n_served


# ---------------------------------------------------------------------------
# Random-walk Metropolis kernel
# ---------------------------------------------------------------------------

def _log_target(p, q, dim, inv_m, n_counts, sim_counts, lam_d, lam_p, rd_inv, rp_inv, d_buf):
    """Log posterior density (product parameterization) at an interior state."""
    for a in range(dim):
        if p[a] <= 0.0 or q[a] <= 0.0:
            return -_INF
    acc = 0.0
    for a in range(dim):
        c = n_counts[a]
        if c != 0.0:
            acc += c * math.log(p[a])
    for a in range(dim):
        c = sim_counts[a]
        if c != 0.0:
            acc += c * math.log(q[a])
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


def _propose_rows(stream, cur, prop, s, m, step, y_buf):
    """Logistic-normal row proposals; returns the sum of log-coordinates."""
    log_jac = 0.0
    for j in range(s):
        base = j * m
        ref = math.log(cur[base + m - 1])
        mx = 0.0
        for i in range(m - 1):
            y = math.log(cur[base + i]) - ref + step * stream.normal()
            y_buf[i] = y
            if y > mx:
                mx = y
        denom = math.exp(-mx)
        for i in range(m - 1):
            y_buf[i] = math.exp(y_buf[i] - mx)
            denom += y_buf[i]
        for i in range(m - 1):
            x = y_buf[i] / denom
            prop[base + i] = x
            if x <= 0.0:
                return -_INF
            log_jac += math.log(x)
        x = math.exp(-mx) / denom
        prop[base + m - 1] = x
        if x <= 0.0:
            return -_INF
        log_jac += math.log(x)
    return log_jac


def mh_chain(
    n_keep,
    burn_in,
    step0,
    adapt,
    seed,
    n_counts,
    sim_counts,
    lam_d,
    lam_p,
    rd_inv,
    rp_inv,
    p0,
    q0,
    s,
    m,
    out_p,
    out_q,
    out_logpost,
):
    """Random-walk Metropolis over ``(p, q)`` product-simplex states.

    Proposals transform each simplex row to additive-log-ratio
    coordinates (last category as reference), add Gaussian noise of
    scale ``step``, and map back; the acceptance ratio carries the
    transform's Jacobian.  During burn-in the scale adapts toward a
    25% acceptance rate in windows of 100 iterations, then freezes.
    Returns ``(acceptance_rate, final_step)``.
    """
    dim = s * m
    inv_m = 1.0 / m
    stream = _Stream(stream_seed(seed, 0))
    cur_p = [float(p0[a]) for a in range(dim)]
    cur_q = [float(q0[a]) for a in range(dim)]
    prop_p = [0.0] * dim
    prop_q = [0.0] * dim
    d_buf = [0.0] * dim
    y_buf = [0.0] * m

    cur_lt = _log_target(
        cur_p, cur_q, dim, inv_m, n_counts, sim_counts, lam_d, lam_p, rd_inv, rp_inv, d_buf
    )
    if cur_lt == -_INF:
        raise ValueError("chain must start at a state with finite log posterior")
    cur_jac = 0.0
    for a in range(dim):
        cur_jac += math.log(cur_p[a])
    for a in range(dim):
        cur_jac += math.log(cur_q[a])

    step = step0
    total = burn_in + n_keep
    acc_window = 0
    acc_kept = 0
    for it in range(total):
        jac_p = _propose_rows(stream, cur_p, prop_p, s, m, step, y_buf)
        jac_q = _propose_rows(stream, cur_q, prop_q, s, m, step, y_buf)
        u = stream.unit()
        accepted = False
        if jac_p > -_INF and jac_q > -_INF:
            prop_lt = _log_target(
                prop_p,
                prop_q,
                dim,
                inv_m,
                n_counts,
                sim_counts,
                lam_d,
                lam_p,
                rd_inv,
                rp_inv,
                d_buf,
            )
            if prop_lt > -_INF:
                log_acc = (prop_lt + jac_p + jac_q) - (cur_lt + cur_jac)
                if math.log(u) < log_acc:
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
    acc_rate = acc_kept / n_keep if n_keep > 0 else 0.0
    return acc_rate, step


# ---------------------------------------------------------------------------
# Level-set grid scan kernel
# ---------------------------------------------------------------------------

def grid_scan(p_pts, p_obj, p_loga, q_pts, q_logb, md, log_c):
    """Find the best-objective feasible pair on a discretized level set.

    ``p_pts`` must be ordered best objective first and ``q_pts`` by
    decreasing log-density part ``q_logb``; both orderings license the
    early exits.  Against each candidate pair the remaining posterior
    term — the discrepancy penalty with matrix ``md`` — is evaluated
    exactly.  Returns ``(found, best_objective, ip, iq)``.
    """
    n_p = p_pts.shape[0]
    n_q = q_pts.shape[0]
    dim = p_pts.shape[1]
    v = [0.0] * dim
    if n_p == 0 or n_q == 0:
        return False, math.nan, -1, -1
    b_max = q_logb[0]
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
                return True, p_obj[ip], ip, iq
    return False, math.nan, -1, -1
