"""Log-barrier interior-point engine for linear objectives over level sets.

Solves the block subproblem shared by both alternation steps of the
bound solver:

    minimize    c' x
    subject to  phi(x) >= r,   A x = b,   x > 0

where ``phi(x) = -(x - center)' M (x - center) + sum_a w_a log x_a`` is
concave (``M`` PSD, ``w >= 0``), so the feasible set is convex.  The
level-set constraint and the positivity constraints enter through log
barriers; each barrier weight ``mu`` is handled by an equality-
constrained Newton method with fraction-to-boundary and Armijo line
searches.

The cold-start schedule is geometric, ``mu_k = 0.2^k`` over 8 rounds.
Re-solves inside an alternation loop pass ``warm=True`` to continue
path-following directly at the terminal barrier weight, which keeps the
final accuracy (the duality-gap proxy depends only on the terminal
``mu``) at a fraction of the Newton steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MU_SCHEDULE = tuple(0.2**k for k in range(10))
GAP_TOL = 1e-8
_ARMIJO = 1e-4
_FRACTION_TO_BOUNDARY = 0.995


@dataclass
class BarrierResult:
    x: np.ndarray
    status: str  # "optimal" | "max_iter"
    newton_steps: int
    slack: float
    eq_residual: float


def _phi(x, center, M, w, w_mask):
    v = x - center
    val = -float(v @ M @ v)
    if w_mask is not None:
        with np.errstate(divide="ignore"):  # boundary probes yield -inf cleanly
            val += float(np.sum(w[w_mask] * np.log(x[w_mask])))
    return val


def _grad_phi(x, center, M, w):
    return -2.0 * (M @ (x - center)) + w / x


def minimize_linear_over_levelset(
    c: np.ndarray,
    x0: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    M: np.ndarray,
    center: np.ndarray,
    w: np.ndarray,
    r: float,
    *,
    warm: bool = False,
    newton_tol: float = 1e-10,
    newton_max: int = 60,
) -> BarrierResult:
    """Minimize ``c'x`` over ``{phi(x) >= r, Ax = b, x > 0}`` from interior ``x0``."""
    c = np.asarray(c, dtype=float)
    x = np.array(x0, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    center = np.asarray(center, dtype=float)
    w = np.asarray(w, dtype=float)
    dim = x.size
    n_eq = A.shape[0]
    w_mask = w > 0
    if not np.any(w_mask):
        w_mask = None

    slack0 = _phi(x, center, M, w, w_mask) - r
    if slack0 <= 0.0 or np.any(x <= 0.0):
        raise ValueError("barrier engine requires a strictly interior starting point")

    mu_values = (MU_SCHEDULE[-1],) if warm else MU_SCHEDULE
    total_steps = 0
    status = "optimal"
    kkt = np.zeros((dim + n_eq, dim + n_eq))
    kkt[dim:, dim:] = -1e-12 * np.eye(n_eq)
    rhs = np.zeros(dim + n_eq)

    for mu in mu_values:
        for _ in range(newton_max):
            sigma = _phi(x, center, M, w, w_mask) - r
            gphi = _grad_phi(x, center, M, w)
            g = c - (mu / sigma) * gphi - mu / x
            hess = (mu / sigma**2) * np.outer(gphi, gphi)
            hess += (mu / sigma) * (2.0 * M + np.diag(w / (x * x)))
            hess += np.diag(mu / (x * x))
            kkt[:dim, :dim] = hess
            kkt[:dim, dim:] = A.T
            kkt[dim:, :dim] = A
            rhs[:dim] = -g
            rhs[dim:] = b - A @ x
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                kkt[:dim, :dim] += 1e-9 * (1.0 + np.abs(hess).max()) * np.eye(dim)
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    status = "max_iter"
                    break
            dx = sol[:dim]
            if not np.all(np.isfinite(dx)):
                status = "max_iter"
                break
            decrement = -float(g @ dx)
            if decrement <= newton_tol * (1.0 + abs(float(c @ x))):
                break

            neg = dx < 0.0
            alpha = 1.0
            if np.any(neg):
                alpha = min(1.0, _FRACTION_TO_BOUNDARY * float(np.min(-x[neg] / dx[neg])))
            for _ in range(60):
                cand = x + alpha * dx
                if np.all(cand > 0.0) and _phi(cand, center, M, w, w_mask) - r > 0.0:
                    break
                alpha *= 0.5
            else:
                status = "max_iter"
                break

            def f_mu(xx):
                sg = _phi(xx, center, M, w, w_mask) - r
                return float(c @ xx) - mu * np.log(sg) - mu * float(np.sum(np.log(xx)))

            f_cur = f_mu(x)
            g_dx = float(g @ dx)
            accepted = False
            for _ in range(60):
                cand = x + alpha * dx
                if (
                    np.all(cand > 0.0)
                    and _phi(cand, center, M, w, w_mask) - r > 0.0
                    and f_mu(cand) <= f_cur + _ARMIJO * alpha * g_dx
                ):
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            x = x + alpha * dx
            total_steps += 1
        else:
            status = "max_iter"
        if status == "max_iter":
            break
        if mu * (dim + 1) < GAP_TOL:
            break

    if n_eq:
        # The regularized KKT system lets a small equality drift
        # accumulate (epsilon times the duals); project it out exactly,
        # keeping the correction only if strict interiority survives.
        resid = b - A @ x
        if float(np.max(np.abs(resid))) > 0.0:
            try:
                corr = A.T @ np.linalg.solve(A @ A.T + 1e-14 * np.eye(n_eq), resid)
            except np.linalg.LinAlgError:
                corr = None
            if corr is not None:
                cand = x + corr
                if np.all(cand > 0.0) and _phi(cand, center, M, w, w_mask) - r > 0.0:
                    x = cand

    slack = _phi(x, center, M, w, w_mask) - r
    eq_res = float(np.max(np.abs(A @ x - b))) if n_eq else 0.0
    return BarrierResult(x=x, status=status, newton_steps=total_steps, slack=slack, eq_residual=eq_res)
