"""Posterior mode search.

The mode is found in the product parameterization ``(p, q)`` — see
``posterior.log_posterior_pq`` — where the feasible region is a product
of probability simplices.  The search has two phases, run from a
smoothed-frequency start plus randomized restarts (best final objective
wins):

1. Multiplicative (entropic mirror) ascent: rows are updated as
   ``x * exp(t * g)`` and renormalized, with a nonmonotone Armijo line
   search.  Multiplicative steps respect the simplex geometry, so cells
   whose optimal value is many orders of magnitude below 1 are reached
   in a number of steps logarithmic in their size, where additive
   projected steps crawl.
2. Newton polish in per-row log coordinates: the exact Hessian of the
   objective is pulled back through the softmax map and one
   equality-free Newton system is solved per round.  This converges
   quadratically near the mode, including modes with cells pinned at
   the interior floor, which additive methods approach only
   geometrically.

Stationarity is measured by a weighted complementarity residual: per
row, ``x * (g - sum(x * g))`` — the gradient of the objective in
softmax coordinates — with floored cells contributing only when their
reduced gradient points back into the simplex.  This measure stays
meaningful at near-boundary modes, where the raw Euclidean projected
gradient is dominated by steep but unusable directions.  Iterates are
kept strictly inside the simplices by flooring and renormalizing rows,
so boundary modes are approximated at the floor, never attained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._seeding import KEY_MODE_RESTART, child_rng
from .errors import ConfigurationError
from .posterior import PosteriorModel

_STEP_RULES = ("backtracking", "fixed")


@dataclass(frozen=True)
class SolverOptions:
    """Shared knobs for the mode search and the bound solver.

    ``max_iterations`` caps ascent iterations (mode search) or
    alternation rounds (bound solver).  ``gradient_tolerance`` is the
    projected-gradient residual target (mode search) or the objective-
    change stopping tolerance (bound solver).  ``restarts`` counts total
    starts including the deterministic one.  ``interior_floor`` keeps
    iterates strictly inside the simplices.
    """

    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    step_rule: str = "backtracking"
    initial_step: float = 1.0
    restarts: int = 5
    seed: int = 0
    interior_floor: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        if self.gradient_tolerance <= 0:
            raise ConfigurationError("gradient_tolerance must be positive")
        if self.step_rule not in _STEP_RULES:
            raise ConfigurationError(f"step_rule must be one of {_STEP_RULES}")
        if self.initial_step <= 0:
            raise ConfigurationError("initial_step must be positive")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be at least 1")
        if not 0 < self.interior_floor < 1e-3:
            raise ConfigurationError("interior_floor must lie in (0, 1e-3)")


@dataclass(frozen=True)
class ModeResult:
    """Outcome of the posterior mode search."""

    d_star: np.ndarray
    p_tilde_star: np.ndarray
    log_post_star: float
    converged: bool
    iterations: int
    kkt_residual: float
    restarts_used: int = 1

    @property
    def p_star(self) -> np.ndarray:
        """Real-system probability table ``d* * p_tilde*`` at the mode."""
        return self.d_star * self.p_tilde_star


def project_rows_to_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``x`` onto the simplex."""
    arr = np.asarray(x, dtype=float)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    rows, m = arr.shape
    u = np.sort(arr, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, m + 1, dtype=float)
    cond = u - css / k > 0.0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(rows), rho] / (rho + 1.0)
    out = np.maximum(arr - theta[:, None], 0.0)
    return out[0] if squeeze else out


def _floor_rows(x: np.ndarray, floor: float) -> np.ndarray:
    out = np.maximum(x, floor)
    return out / out.sum(axis=1, keepdims=True)


def _objective_and_grad(model: PosteriorModel, p: np.ndarray, q: np.ndarray):
    """Log posterior (product form) and its gradient on the open interior."""
    data = model.data
    terms = model.terms
    n = data.real_counts
    nt = data.sim_counts
    inv_m = 1.0 / model.m

    logp = np.log(p)
    logq = np.log(q)
    val = float(np.sum(n * logp) + np.sum(nt * logq))

    d = p / q
    vd = (d - 1.0).reshape(-1)
    vq = (q - inv_m).reshape(-1)
    rd_vd = terms.rd_inv @ vd
    rp_vq = terms.rp_inv @ vq
    val -= terms.lambda_d * float(vd @ rd_vd)
    val -= terms.lambda_p * float(vq @ rp_vq)

    rd_vd = rd_vd.reshape(p.shape)
    rp_vq = rp_vq.reshape(p.shape)
    grad_p = n / p - 2.0 * terms.lambda_d * rd_vd / q
    grad_q = nt / q - 2.0 * terms.lambda_p * rp_vq + 2.0 * terms.lambda_d * rd_vd * p / (q * q)
    return val, grad_p, grad_q


# Residual below which an ascent that can make no further progress counts as
# converged: objective values carry O(eps * |value|) rounding noise, so no line
# search can certify gains past roughly sqrt(noise * curvature), which lands
# near 1e-6 on typical count scales; 1e-4 gives that estimate two orders of
# headroom while still rejecting genuinely unfinished runs.
STALL_RESIDUAL = 1e-4

# How many multiples of the interior floor still count as "pinned at the
# floor" for the stationarity test (flooring renormalizes rows, so pinned
# cells sit a hair away from the floor itself).
_FLOOR_BAND = 2.0


def _kkt_residual(p, q, gp, gq, floor):
    """Weighted complementarity residual over both simplex blocks.

    Per row, ``x * (g - sum(x * g))`` is the gradient of the objective in
    softmax coordinates; it vanishes exactly at stationary points of the
    row simplex.  Cells pinned at the interior floor only violate
    stationarity when their reduced gradient is positive, i.e. when the
    objective wants them back inside the simplex.
    """
    band = _FLOOR_BAND * floor

    def block(x, g):
        mu = np.sum(x * g, axis=1, keepdims=True)
        r = x * (g - mu)
        viol = np.where(x > band, np.abs(r), np.maximum(r, 0.0))
        return float(np.max(viol))

    return max(block(p, gp), block(q, gq))


def _softmax_rows(y: np.ndarray) -> np.ndarray:
    z = y - y.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _mirror_step(x, g, t, floor):
    """One multiplicative ascent step on every row, floored and renormalized."""
    ex = g - g.max(axis=1, keepdims=True)
    new = x * np.exp(t * ex)
    new /= new.sum(axis=1, keepdims=True)
    return _floor_rows(new, floor)


def _ascend(model, p, q, opts: SolverOptions, budget: int):
    """Mirror-ascent phase; returns ``(p, q, val, gp, gq, iterations, hit_tol)``."""
    floor = opts.interior_floor
    val, gp, gq = _objective_and_grad(model, p, q)
    if opts.step_rule == "fixed":
        step = opts.initial_step
    else:
        gmax = max(np.max(np.abs(gp)), np.max(np.abs(gq)), 0.0)
        step = min(opts.initial_step, 1.0 / (1.0 + gmax))
    history = [val]
    it = 0
    for it in range(1, budget + 1):
        if _kkt_residual(p, q, gp, gq, floor) <= opts.gradient_tolerance:
            return p, q, val, gp, gq, it - 1, True
        if opts.step_rule == "fixed":
            p = _mirror_step(p, gp, step, floor)
            q = _mirror_step(q, gq, step, floor)
            val, gp, gq = _objective_and_grad(model, p, q)
            continue
        # Nonmonotone Armijo: compare against the best recent value so the
        # multiplicative steps can traverse shallow curved valleys without
        # collapsing the step size.
        reference = max(history[-10:])
        accepted = False
        for _ in range(60):
            cand_p = _mirror_step(p, gp, step, floor)
            cand_q = _mirror_step(q, gq, step, floor)
            cand_val = _objective_and_grad(model, cand_p, cand_q)[0]
            gain_ref = float(np.sum(gp * (cand_p - p)) + np.sum(gq * (cand_q - q)))
            if gain_ref >= 0.0 and cand_val >= reference + 1e-4 * gain_ref:
                accepted = True
                break
            step *= 0.5
            if step < 1e-16:
                break
        if not accepted:
            return p, q, val, gp, gq, it, False
        p, q = cand_p, cand_q
        val, gp, gq = _objective_and_grad(model, p, q)
        history.append(val)
        step = min(step * 1.5, 1e6)
        # Accepted steps whose combined gain sits below rounding noise mean
        # the phase is wandering at the objective's noise floor; hand off.
        if len(history) > 6 and val - history[-7] <= 1e-12 * (1.0 + abs(val)):
            return p, q, val, gp, gq, it, False
    return p, q, val, gp, gq, it, False


# Mirror iterations to run between Newton polish attempts.  The mirror phase
# only needs to reach the basin of the mode; the polish finishes the job, so
# long uninterrupted mirror runs just burn budget on first-order creep.
_BURST = 25


def _solve_from_start(model, p, q, opts: SolverOptions):
    """Alternate mirror-ascent bursts with Newton polish until stationary.

    Stops when the residual meets the tolerance, the iteration budget is
    exhausted, or a full burst-plus-polish cycle fails to improve the
    objective beyond rounding noise (stationary to working precision).
    """
    if opts.step_rule == "fixed":
        return _ascend(model, p, q, opts, opts.max_iterations)
    remaining = opts.max_iterations
    total = 0
    prev_cycle_val = -np.inf
    while True:
        p, q, val, gp, gq, used, hit_tol = _ascend(model, p, q, opts, min(remaining, _BURST))
        remaining -= used
        total += used
        if hit_tol:
            return p, q, val, gp, gq, total, True
        p, q, val, gp, gq, rounds = _newton_polish(model, p, q, val, gp, gq, opts)
        total += rounds
        if _kkt_residual(p, q, gp, gq, opts.interior_floor) <= opts.gradient_tolerance:
            return p, q, val, gp, gq, total, True
        if remaining <= 0:
            return p, q, val, gp, gq, total, False
        if val <= prev_cycle_val + 1e-12 * (1.0 + abs(prev_cycle_val)):
            return p, q, val, gp, gq, total, False
        prev_cycle_val = val


def _hessian_product_coords(model, p, q):
    """Exact Hessian of the objective in the stacked ``(p, q)`` cell basis."""
    terms = model.terms
    n = model.data.real_counts.astype(float).reshape(-1)
    nt = model.data.sim_counts.astype(float).reshape(-1)
    pf = p.reshape(-1)
    qf = q.reshape(-1)
    pen_d = 2.0 * terms.lambda_d * terms.rd_inv
    pen_p = 2.0 * terms.lambda_p * terms.rp_inv
    v = pen_d @ (pf / qf - 1.0)
    inv_q = 1.0 / qf
    p_q2 = pf / qf**2
    h_pp = -np.diag(n / pf**2) - (pen_d * inv_q[:, None]) * inv_q[None, :]
    h_pq = np.diag(v / qf**2) + (pen_d * inv_q[:, None]) * p_q2[None, :]
    h_qq = (
        -np.diag(nt / qf**2)
        - pen_p
        - (pen_d * p_q2[:, None]) * p_q2[None, :]
        - np.diag(2.0 * v * pf / qf**3)
    )
    return np.block([[h_pp, h_pq], [h_pq.T, h_qq]])


def _softmax_pullback(x, g):
    """Jacobian and gradient-contracted curvature of the row softmax map."""
    s, m = x.shape
    jac = np.zeros((s * m, s * m))
    curv = np.zeros((s * m, s * m))
    for j in range(s):
        row = x[j]
        grow = g[j]
        mu = float(row @ grow)
        sl = slice(j * m, (j + 1) * m)
        jac[sl, sl] = np.diag(row) - np.outer(row, row)
        curv[sl, sl] = np.diag(row * (grow - mu)) - np.outer(row, row) * (
            grow[:, None] + grow[None, :] - 2.0 * mu
        )
    return jac, curv


def _newton_polish(model, p, q, val, gp, gq, opts: SolverOptions, max_rounds=30):
    """Newton refinement in per-row log coordinates.

    Log coordinates make the row-sum constraints implicit (through the
    softmax map) and let a single step move a cell across many orders of
    magnitude, so modes with cells pinned near the interior floor are
    reached instead of approached geometrically.  Falls back to the
    incoming iterate whenever no ascent direction exists or the line
    search cannot certify a gain.
    """
    floor = opts.interior_floor
    s, m = p.shape
    n_cells = s * m
    rounds = 0
    no_gain_rounds = 0
    for rounds in range(1, max_rounds + 1):
        if _kkt_residual(p, q, gp, gq, floor) <= opts.gradient_tolerance:
            return p, q, val, gp, gq, rounds - 1
        hess = _hessian_product_coords(model, p, q)
        jac_p, curv_p = _softmax_pullback(p, gp)
        jac_q, curv_q = _softmax_pullback(q, gq)
        jac = np.block(
            [[jac_p, np.zeros((n_cells, n_cells))], [np.zeros((n_cells, n_cells)), jac_q]]
        )
        hess_y = jac @ hess @ jac
        hess_y[:n_cells, :n_cells] += curv_p
        hess_y[n_cells:, n_cells:] += curv_q
        grad_y = np.concatenate(
            [
                (p * (gp - np.sum(p * gp, axis=1, keepdims=True))).reshape(-1),
                (q * (gq - np.sum(q * gq, axis=1, keepdims=True))).reshape(-1),
            ]
        )
        # Per-row constant shifts are null directions of the softmax map;
        # pin them with a gauge term so the system is invertible.  The
        # gradient is orthogonal to them, so the solution is unaffected.
        scale = 1.0 + float(np.max(np.abs(np.diag(hess_y))))
        gauge = np.zeros_like(hess_y)
        for blk in range(2 * s):
            gauge[blk * m : (blk + 1) * m, blk * m : (blk + 1) * m] = 1.0 / m
        direction = None
        damping = 0.0
        for _ in range(6):
            system = hess_y - damping * np.eye(2 * n_cells) - scale * gauge
            try:
                cand = np.linalg.solve(system, -grad_y)
            except np.linalg.LinAlgError:
                cand = None
            if cand is not None and np.all(np.isfinite(cand)) and float(grad_y @ cand) > 0.0:
                direction = cand
                break
            damping = 1e-6 * scale if damping == 0.0 else damping * 100.0
        if direction is None:
            return p, q, val, gp, gq, rounds
        # Cap the log-space step so the exponential stays representable.
        largest = float(np.max(np.abs(direction)))
        if largest > 50.0:
            direction *= 50.0 / largest
        slope = float(grad_y @ direction)
        y_p = np.log(p)
        y_q = np.log(q)
        alpha = 1.0
        accepted = False
        for _ in range(40):
            cand_p = _floor_rows(
                _softmax_rows(y_p + alpha * direction[:n_cells].reshape(s, m)), floor
            )
            cand_q = _floor_rows(
                _softmax_rows(y_q + alpha * direction[n_cells:].reshape(s, m)), floor
            )
            cand_val = _objective_and_grad(model, cand_p, cand_q)[0]
            if cand_val >= val + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
            if alpha < 1e-12:
                break
        if not accepted:
            return p, q, val, gp, gq, rounds
        p, q = cand_p, cand_q
        prev_val = val
        val, gp, gq = _objective_and_grad(model, p, q)
        # Two consecutive rounds whose gains sit below rounding noise mean
        # the polish is at its own noise floor; further rounds cannot help.
        if val - prev_val <= 1e-12 * (1.0 + abs(prev_val)):
            no_gain_rounds += 1
            if no_gain_rounds >= 2:
                return p, q, val, gp, gq, rounds
        else:
            no_gain_rounds = 0
    return p, q, val, gp, gq, rounds


def _smoothed_start(model: PosteriorModel):
    n = model.data.real_counts.astype(float)
    nt = model.data.sim_counts.astype(float)
    m = model.m
    p0 = (n + 1.0) / (n.sum(axis=1, keepdims=True) + m)
    q0 = (nt + 1.0) / (nt.sum(axis=1, keepdims=True) + m)
    return p0, q0


def find_posterior_mode(model: PosteriorModel, options: SolverOptions | None = None) -> ModeResult:
    """Maximize the posterior over ``(d, q)`` states; returns the best local optimum found."""
    opts = options or SolverOptions()
    p0, q0 = _smoothed_start(model)
    starts = [(p0, q0)]
    for ridx in range(1, opts.restarts):
        rng = child_rng(opts.seed, KEY_MODE_RESTART, ridx)
        rp = rng.dirichlet(np.ones(model.m), size=model.s)
        rq = rng.dirichlet(np.ones(model.m), size=model.s)
        starts.append((0.7 * p0 + 0.3 * rp, 0.7 * q0 + 0.3 * rq))

    best = None
    for sidx, (sp, sq) in enumerate(starts):
        sp = _floor_rows(np.asarray(sp, dtype=float), opts.interior_floor)
        sq = _floor_rows(np.asarray(sq, dtype=float), opts.interior_floor)
        p, q, val, gp, gq, iters, hit_tol = _solve_from_start(model, sp, sq, opts)
        resid = _kkt_residual(p, q, gp, gq, opts.interior_floor)
        if opts.step_rule == "backtracking" and not hit_tol:
            # The burst/polish loop only stops early when no certifiable
            # ascent step remains, so a small residual at that point means
            # stationary to working precision; a large one means genuinely
            # unfinished.
            conv = resid <= max(opts.gradient_tolerance, STALL_RESIDUAL)
        else:
            conv = hit_tol or resid <= opts.gradient_tolerance
        if best is None or val > best[2]:
            best = (p, q, val, conv, iters, resid, sidx)

    p, q, _, conv, iters, resid, _ = best
    d_star = p / q
    q_star = q
    log_post_star = model.log_posterior(d_star, q_star)
    if not np.isfinite(log_post_star):
        raise ConfigurationError("mode search left the posterior support; check the inputs")
    return ModeResult(
        d_star=d_star,
        p_tilde_star=q_star,
        log_post_star=float(log_post_star),
        converged=bool(conv),
        iterations=int(iters),
        kkt_residual=float(resid),
        restarts_used=len(starts),
    )
