"""Confidence bounds by optimization over posterior level sets.

A query functional is a linear form ``zeta = sum_{j,i} z[j,i] d[j,i]
q[j,i]`` — the expectation of a discrete payoff under the reweighted
outcome distribution.  Its credible bounds are the extrema of ``zeta``
over the level set ``{log posterior >= log_c}``, with ``log_c`` pinned a
fixed amount below the posterior maximum by ``threshold_from_spec``.

In the product parameterization ``p = d * q`` the likelihood separates,
and for either table held fixed the level set in the other table is
convex with a linear objective.  ``solve_bound`` therefore alternates
two convex programs — the discrepancy step and the simulated-probability
step — each solved by the log-barrier engine in ``_interior``; a
perturbed restart guards against the (mildly) nonconvex joint geometry.
``brute_force_bound`` scans an explicit simplex grid for an
implementation-independent answer on tiny problems, and
``convexity_probe`` measures empirically how convex the joint level set
is by testing midpoints of feasible pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _iter_product

import numpy as np

from ._interior import MU_SCHEDULE, minimize_linear_over_levelset
from ._kernels import get_backend
from ._seeding import KEY_MODE_RESTART, KEY_PERTURB, KEY_PROBE, child_rng
from .errors import ConfigurationError, InfeasibleRegionError
from .mode import ModeResult, SolverOptions, find_posterior_mode, project_rows_to_simplex
from .posterior import PosteriorModel
from .prior import GaussianPriorSpec
from .stats import normal_quantile

#: Infeasibility declared when log_c exceeds the posterior maximum by more.
INFEASIBILITY_TOL = 1e-9
#: Below this slack the level set is numerically the mode singleton.
_DEGENERATE_SLACK = 1e-10

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QueryFunctional:
    """Coefficient table ``z`` of the linear functional ``sum z * d * q``."""

    z: np.ndarray
    description: str = ""

    def __post_init__(self):
        arr = np.asarray(self.z, dtype=float)
        if arr.ndim != 2:
            raise ConfigurationError("functional coefficients must form an s x m table")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("functional coefficients must be finite")
        object.__setattr__(self, "z", arr)

    @classmethod
    def indicator(cls, s: int, m: int, design: int, outcome: int) -> "QueryFunctional":
        """Probability of category ``outcome`` at design ``design``."""
        z = np.zeros((s, m))
        z[design, outcome] = 1.0
        return cls(z, description=f"P[outcome {outcome} at design {design}]")

    @classmethod
    def bin_values(cls, s: int, m: int, design: int, values) -> "QueryFunctional":
        """Expectation of per-category ``values`` at one design point."""
        vals = np.asarray(values, dtype=float)
        if vals.shape != (m,):
            raise ConfigurationError(f"need {m} category values, got shape {vals.shape}")
        z = np.zeros((s, m))
        z[design] = vals
        return cls(z, description=f"E[category values at design {design}]")


@dataclass(frozen=True)
class ThresholdSpec:
    """Level-set threshold: either a confidence level ``q`` or a radius ``ell``.

    The two are linked by ``ell = Phi^-1(q)``; the threshold drops the
    log posterior by ``ell^2 / 2`` below its maximum.  ``q`` and ``1-q``
    give the same set.
    """

    q: float | None = None
    ell: float | None = None

    def __post_init__(self):
        if (self.q is None) == (self.ell is None):
            raise ConfigurationError("specify exactly one of q (confidence) or ell (radius)")
        if self.q is not None and not 0.0 < self.q < 1.0:
            raise ConfigurationError(f"q must lie in (0, 1), got {self.q!r}")
        if self.ell is not None and self.ell < 0.0:
            raise ConfigurationError(f"ell must be nonnegative, got {self.ell!r}")

    @property
    def effective_ell(self) -> float:
        if self.ell is not None:
            return float(self.ell)
        return abs(normal_quantile(self.q))


def threshold_from_spec(spec: ThresholdSpec, log_post_star: float) -> float:
    """Log-density cutoff ``log_post_star - ell^2 / 2``."""
    ell = spec.effective_ell
    return float(log_post_star) - 0.5 * ell * ell


@dataclass(frozen=True)
class DirectionOutcome:
    """One optimized direction (min or max) of a bound computation."""

    value: float
    status: str
    iterations: int
    newton_steps: int
    feasibility_residual: float
    d: np.ndarray | None = None
    p_tilde: np.ndarray | None = None


@dataclass(frozen=True)
class BoundResult:
    """Two-sided credible bounds for one query functional."""

    lower: float
    upper: float
    log_c: float
    mode_value: float
    status_lower: str
    status_upper: str
    iterations_lower: int
    iterations_upper: int
    feasibility_residual: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
            "log_c": self.log_c,
            "mode_value": self.mode_value,
            "status_lower": self.status_lower,
            "status_upper": self.status_upper,
            "iterations_lower": self.iterations_lower,
            "iterations_upper": self.iterations_upper,
            "feasibility_residual": self.feasibility_residual,
        }


# ---------------------------------------------------------------------------
# Alternating solver
# ---------------------------------------------------------------------------


class _Blocks:
    """Precomputed pieces of the separated log posterior."""

    def __init__(self, model: PosteriorModel):
        self.s, self.m = model.s, model.m
        self.n = model.data.real_counts.reshape(-1).astype(float)
        self.nt = model.data.sim_counts.reshape(-1).astype(float)
        self.md = model.terms.lambda_d * model.terms.rd_inv
        self.mp = model.terms.lambda_p * model.terms.rp_inv
        self.center_d = np.ones(self.s * self.m)
        self.center_q = np.full(self.s * self.m, 1.0 / self.m)
        self.w_d = self.n
        self.w_q = self.n + self.nt

    def phi_d(self, d: np.ndarray) -> float:
        v = d - 1.0
        val = -float(v @ self.md @ v)
        mask = self.w_d > 0
        if np.any(mask):
            val += float(np.sum(self.w_d[mask] * np.log(d[mask])))
        return val

    def psi_q(self, q: np.ndarray) -> float:
        v = q - self.center_q
        val = -float(v @ self.mp @ v)
        mask = self.w_q > 0
        if np.any(mask):
            val += float(np.sum(self.w_q[mask] * np.log(q[mask])))
        return val

    def log_post(self, d: np.ndarray, q: np.ndarray) -> float:
        return self.phi_d(d) + self.psi_q(q)

    def eq_rows_d(self, q: np.ndarray) -> np.ndarray:
        a = np.zeros((self.s, self.s * self.m))
        for j in range(self.s):
            a[j, j * self.m : (j + 1) * self.m] = q[j * self.m : (j + 1) * self.m]
        return a

    def eq_rows_q(self, d: np.ndarray) -> np.ndarray:
        a = np.zeros((2 * self.s, self.s * self.m))
        for j in range(self.s):
            a[j, j * self.m : (j + 1) * self.m] = 1.0
            a[self.s + j, j * self.m : (j + 1) * self.m] = d[j * self.m : (j + 1) * self.m]
        return a


def _alternate(blocks: _Blocks, z_flat, zsign, log_c, d0, q0, opts: SolverOptions):
    """Run the two-block alternation from ``(d0, q0)``; returns the final state."""
    d = np.array(d0, dtype=float)
    q = np.array(q0, dtype=float)
    s = blocks.s
    ones_s = np.ones(s)
    ones_2s = np.ones(2 * s)
    zeta = float(np.sum(z_flat * d * q))
    # Successive objective values jitter at the accuracy of the terminal
    # barrier weight, so demanding less than that would never terminate.
    dim = d.size
    tol = max(opts.gradient_tolerance, 8.0 * MU_SCHEDULE[-1] * (dim + 1))
    newton_total = 0
    status = STATUS_MAX_ITER
    rounds = 0
    for rounds in range(1, opts.max_iterations + 1):
        warm = rounds > 1
        try:
            res_d = minimize_linear_over_levelset(
                zsign * z_flat * q,
                d,
                blocks.eq_rows_d(q),
                ones_s,
                blocks.md,
                blocks.center_d,
                blocks.w_d,
                log_c - blocks.psi_q(q),
                warm=warm,
            )
            d = res_d.x
            res_q = minimize_linear_over_levelset(
                zsign * z_flat * d,
                q,
                blocks.eq_rows_q(d),
                ones_2s,
                blocks.mp,
                blocks.center_q,
                blocks.w_q,
                log_c - blocks.phi_d(d),
                warm=warm,
            )
            q = res_q.x
        except ValueError:
            # The iterate sits numerically on the level boundary; no
            # strictly interior start exists, so keep the current state
            # (d may already hold this round's update — still feasible).
            zeta = float(np.sum(z_flat * d * q))
            if rounds > 1:
                status = STATUS_OPTIMAL
            break
        newton_total += res_d.newton_steps + res_q.newton_steps
        new_zeta = float(np.sum(z_flat * d * q))
        if abs(new_zeta - zeta) <= tol * (1.0 + abs(zeta)):
            zeta = new_zeta
            status = STATUS_OPTIMAL
            break
        zeta = new_zeta
    return d, q, zeta, status, rounds, newton_total


def _feasibility_residual(blocks: _Blocks, d, q, log_c) -> float:
    s, m = blocks.s, blocks.m
    qt = q.reshape(s, m)
    dt = d.reshape(s, m)
    res = max(0.0, log_c - blocks.log_post(d, q))
    res = max(res, float(np.max(np.abs(qt.sum(axis=1) - 1.0))))
    res = max(res, float(np.max(np.abs((dt * qt).sum(axis=1) - 1.0))))
    res = max(res, max(0.0, -float(d.min())), max(0.0, -float(q.min())))
    return res


def _perturbed_start(model, blocks, mode: ModeResult, log_c, opts, tag: int):
    """A feasible start away from the mode, or None if blending fails."""
    rng = child_rng(opts.seed, KEY_PERTURB, tag)
    p_star = mode.p_star
    q_star = mode.p_tilde_star
    rp = rng.dirichlet(np.ones(model.m), size=model.s)
    rq = rng.dirichlet(np.ones(model.m), size=model.s)
    theta = 0.5
    for _ in range(12):
        p_c = (1.0 - theta) * p_star + theta * rp
        q_c = (1.0 - theta) * q_star + theta * rq
        p_c = np.maximum(p_c, opts.interior_floor)
        p_c /= p_c.sum(axis=1, keepdims=True)
        q_c = np.maximum(q_c, opts.interior_floor)
        q_c /= q_c.sum(axis=1, keepdims=True)
        d_c = (p_c / q_c).reshape(-1)
        q_flat = q_c.reshape(-1)
        if blocks.log_post(d_c, q_flat) > log_c + _DEGENERATE_SLACK:
            return d_c, q_flat
        theta *= 0.5
    return None


def solve_bound(
    model: PosteriorModel,
    functional: QueryFunctional,
    log_c: float,
    direction: str,
    options: SolverOptions | None = None,
    mode_result: ModeResult | None = None,
) -> DirectionOutcome:
    """Optimize the functional in one direction over the level set."""
    if direction not in ("min", "max"):
        raise ConfigurationError("direction must be 'min' or 'max'")
    opts = options or SolverOptions()
    if functional.z.shape != (model.s, model.m):
        raise ConfigurationError(
            f"functional shape {functional.z.shape} does not match model {(model.s, model.m)}"
        )
    mode = mode_result or find_posterior_mode(model, opts)
    slack0 = mode.log_post_star - log_c
    if slack0 < -INFEASIBILITY_TOL:
        return DirectionOutcome(
            value=math.nan,
            status=STATUS_INFEASIBLE,
            iterations=0,
            newton_steps=0,
            feasibility_residual=-slack0,
        )
    blocks = _Blocks(model)
    z_flat = functional.z.reshape(-1)
    d0 = (mode.p_star / mode.p_tilde_star).reshape(-1)
    q0 = mode.p_tilde_star.reshape(-1)
    mode_zeta = float(np.sum(z_flat * d0 * q0))
    if slack0 <= _DEGENERATE_SLACK:
        return DirectionOutcome(
            value=mode_zeta,
            status=STATUS_OPTIMAL,
            iterations=0,
            newton_steps=0,
            feasibility_residual=_feasibility_residual(blocks, d0, q0, log_c),
            d=d0.reshape(model.s, model.m),
            p_tilde=q0.reshape(model.s, model.m),
        )
    zsign = 1.0 if direction == "min" else -1.0

    candidates = [(d0, q0)]
    pert = _perturbed_start(model, blocks, mode, log_c, opts, 0 if direction == "min" else 1)
    if pert is not None:
        candidates.append(pert)

    best = None
    for d_init, q_init in candidates:
        d, q, zeta, status, rounds, nsteps = _alternate(
            blocks, z_flat, zsign, log_c, d_init, q_init, opts
        )
        better = best is None or (zsign * zeta < zsign * best[2])
        if better:
            best = (d, q, zeta, status, rounds, nsteps)
    d, q, zeta, status, rounds, nsteps = best
    return DirectionOutcome(
        value=zeta,
        status=status,
        iterations=rounds,
        newton_steps=nsteps,
        feasibility_residual=_feasibility_residual(blocks, d, q, log_c),
        d=d.reshape(model.s, model.m),
        p_tilde=q.reshape(model.s, model.m),
    )


def bound_interval(
    model: PosteriorModel,
    functional: QueryFunctional,
    threshold: ThresholdSpec,
    options: SolverOptions | None = None,
    mode_result: ModeResult | None = None,
) -> BoundResult:
    """Two-sided bounds: mode, threshold, then both directions."""
    opts = options or SolverOptions()
    mode = mode_result or find_posterior_mode(model, opts)
    log_c = threshold_from_spec(threshold, mode.log_post_star)
    lo = solve_bound(model, functional, log_c, "min", opts, mode)
    hi = solve_bound(model, functional, log_c, "max", opts, mode)
    mode_value = float(np.sum(functional.z * mode.p_star))
    return BoundResult(
        lower=lo.value,
        upper=hi.value,
        log_c=log_c,
        mode_value=mode_value,
        status_lower=lo.status,
        status_upper=hi.status,
        iterations_lower=lo.iterations,
        iterations_upper=hi.iterations,
        feasibility_residual=max(lo.feasibility_residual, hi.feasibility_residual),
    )


# ---------------------------------------------------------------------------
# Fixed simulated-probability variant
# ---------------------------------------------------------------------------


def _fixed_sim_mode(pi_flat, n_flat, md, s, m, opts: SolverOptions):
    """Maximize ``sum n log d - (d-1)' Md (d-1)`` over ``{d >= 0, sum d*pi = 1}``.

    Works in ``u = d * pi`` coordinates, where the feasible set is the
    product of simplices, via projected gradient ascent.
    """

    def value_grad(u):
        d = u / pi_flat
        v = d - 1.0
        mdv = md @ v
        mask = n_flat > 0
        val = -float(v @ mdv)
        if np.any(mask):
            val += float(np.sum(n_flat[mask] * np.log(u[mask] / pi_flat[mask])))
        grad = n_flat / u - 2.0 * mdv / pi_flat
        return val, grad

    def ascend(u):
        val, g = value_grad(u)
        step = min(1.0, 1.0 / (1.0 + np.max(np.abs(g))))
        for _ in range(opts.max_iterations):
            t_ref = 1.0 / (1.0 + np.max(np.abs(g)))
            ref = project_rows_to_simplex((u + t_ref * g).reshape(s, m))
            ref = np.maximum(ref, opts.interior_floor)
            ref /= ref.sum(axis=1, keepdims=True)
            resid = float(np.max(np.abs(ref.reshape(-1) - u))) / t_ref
            if resid <= opts.gradient_tolerance:
                break
            accepted = False
            for _ in range(60):
                cand = project_rows_to_simplex((u + step * g).reshape(s, m))
                cand = np.maximum(cand, opts.interior_floor)
                cand /= cand.sum(axis=1, keepdims=True)
                cand = cand.reshape(-1)
                cval, cg = value_grad(cand)
                gain = float(g @ (cand - u))
                if cval >= val + 1e-4 * gain and cval >= val - 1e-15 * (1 + abs(val)):
                    u, val, g = cand, cval, cg
                    accepted = True
                    break
                step *= 0.5
                if step < 1e-16:
                    break
            if not accepted:
                break
            step = min(step * 1.5, 1e6)
        return u, val

    u0 = pi_flat.copy()
    best_u, best_val = ascend(u0)
    for ridx in range(1, opts.restarts):
        rng = child_rng(opts.seed, KEY_MODE_RESTART, ridx)
        ru = rng.dirichlet(np.ones(m), size=s).reshape(-1)
        u, val = ascend(0.7 * u0 + 0.3 * ru)
        if val > best_val:
            best_u, best_val = u, val
    return best_u / pi_flat, best_val


def solve_bound_fixed_sim(
    pi_tilde,
    real_counts,
    functional: QueryFunctional,
    threshold: ThresholdSpec,
    prior: GaussianPriorSpec,
    design_coords=None,
    options: SolverOptions | None = None,
) -> BoundResult:
    """Bounds when the simulated distribution is known exactly.

    Only the discrepancy table is uncertain: the level set is
    ``{sum n log d - lambda_d (d-1)' Rd^-1 (d-1) >= log_c}`` intersected
    with ``{d >= 0, sum_i d[j,i] pi_tilde[j,i] = 1}``.  The probability-
    side penalty is constant and cancels from both sides of the
    threshold.  Requires strictly positive ``pi_tilde`` cells.
    """
    opts = options or SolverOptions()
    pi = np.asarray(pi_tilde, dtype=float)
    n = np.asarray(real_counts, dtype=float)
    if pi.ndim == 1:
        pi = pi[None, :]
    if n.ndim == 1:
        n = n[None, :]
    if pi.shape != n.shape:
        raise ConfigurationError("pi_tilde and real_counts must share a shape")
    s, m = pi.shape
    if np.any(pi <= 0.0):
        raise ConfigurationError("fixed simulated probabilities must be strictly positive")
    if np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-9):
        raise ConfigurationError("pi_tilde rows must sum to 1")
    if functional.z.shape != (s, m):
        raise ConfigurationError("functional shape does not match the tables")
    if design_coords is None:
        if s > 1 and prior.R_d is None:
            raise ConfigurationError(
                "design_coords are required for kernel-built correlation with s > 1"
            )
        coords = np.arange(s, dtype=float)
    else:
        coords = np.asarray(design_coords, dtype=float).reshape(-1)
    terms = prior.build_terms(coords, m)
    md = terms.lambda_d * terms.rd_inv

    pi_flat = pi.reshape(-1)
    n_flat = n.reshape(-1)
    z_flat = functional.z.reshape(-1)

    d_star, phi_star = _fixed_sim_mode(pi_flat, n_flat, md, s, m, opts)
    log_c = threshold_from_spec(threshold, phi_star)
    mode_value = float(np.sum(z_flat * d_star * pi_flat))

    def phi_d(d):
        v = d - 1.0
        val = -float(v @ md @ v)
        mask = n_flat > 0
        if np.any(mask):
            val += float(np.sum(n_flat[mask] * np.log(d[mask])))
        return val

    a_eq = np.zeros((s, s * m))
    for j in range(s):
        a_eq[j, j * m : (j + 1) * m] = pi_flat[j * m : (j + 1) * m]
    ones_s = np.ones(s)

    slack0 = phi_star - log_c
    outcomes = {}
    for direction in ("min", "max"):
        if slack0 <= _DEGENERATE_SLACK:
            outcomes[direction] = (mode_value, STATUS_OPTIMAL, 0)
            continue
        zsign = 1.0 if direction == "min" else -1.0
        res = minimize_linear_over_levelset(
            zsign * z_flat * pi_flat,
            d_star.copy(),
            a_eq,
            ones_s,
            md,
            np.ones(s * m),
            n_flat,
            log_c,
        )
        value = float(np.sum(z_flat * res.x * pi_flat))
        # One perturbed restart from a blended feasible point.
        rng = child_rng(opts.seed, KEY_PERTURB, 10 if direction == "min" else 11)
        ru = rng.dirichlet(np.ones(m), size=s).reshape(-1)
        theta = 0.5
        for _ in range(12):
            u_c = (1.0 - theta) * (d_star * pi_flat) + theta * ru
            u_c = np.maximum(u_c, opts.interior_floor)
            u_c = (u_c.reshape(s, m) / u_c.reshape(s, m).sum(axis=1, keepdims=True)).reshape(-1)
            d_c = u_c / pi_flat
            if phi_d(d_c) > log_c + _DEGENERATE_SLACK:
                res2 = minimize_linear_over_levelset(
                    zsign * z_flat * pi_flat,
                    d_c,
                    a_eq,
                    ones_s,
                    md,
                    np.ones(s * m),
                    n_flat,
                    log_c,
                )
                value2 = float(np.sum(z_flat * res2.x * pi_flat))
                if zsign * value2 < zsign * value:
                    value, res = value2, res2
                break
            theta *= 0.5
        outcomes[direction] = (value, res.status, res.newton_steps)

    resid = max(0.0, -slack0)
    return BoundResult(
        lower=outcomes["min"][0],
        upper=outcomes["max"][0],
        log_c=log_c,
        mode_value=mode_value,
        status_lower=outcomes["min"][1],
        status_upper=outcomes["max"][1],
        iterations_lower=outcomes["min"][2],
        iterations_upper=outcomes["max"][2],
        feasibility_residual=resid,
    )


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def simplex_grid(m: int, grid_step: float) -> np.ndarray:
    """All probability vectors with coordinates on a ``grid_step`` lattice."""
    k_total = round(1.0 / grid_step)
    if abs(k_total * grid_step - 1.0) > 1e-9:
        raise ConfigurationError("grid_step must divide 1 exactly")
    combos = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            combos.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], k_total, m)
    return np.asarray(combos, dtype=float) / float(k_total)


def _grid_block(per_design, s):
    """Joint values over the s-fold product grid by summing per-design parts."""
    total = per_design[0]
    for j in range(1, s):
        total = np.add.outer(total, per_design[j]).reshape(-1)
    return total


def brute_force_bound(
    model: PosteriorModel,
    functional: QueryFunctional,
    log_c: float,
    direction: str,
    grid_step: float = 0.002,
    max_grid_points: int = 2_000_000,
    backend: str | None = None,
) -> float:
    """Exhaustive grid extremum of the functional over the level set.

    Independent of the optimization path: enumerates both probability
    tables on a simplex lattice, prunes with separable posterior parts,
    and checks the exact posterior on surviving pairs.  Only practical
    for tiny problems; guarded by ``max_grid_points`` per table.
    """
    if direction not in ("min", "max"):
        raise ConfigurationError("direction must be 'min' or 'max'")
    s, m = model.s, model.m
    if s * m > 6:
        raise ConfigurationError("brute force supports at most s*m = 6 cells")
    base = simplex_grid(m, grid_step)
    g = base.shape[0]
    joint = g**s
    if joint > max_grid_points:
        raise ConfigurationError(
            f"joint grid of {joint} points exceeds the cap of {max_grid_points}"
        )

    n = model.data.real_counts.astype(float)
    nt = model.data.sim_counts.astype(float)
    z = functional.z

    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(base > 0.0, np.log(np.where(base > 0.0, base, 1.0)), -np.inf)

    def row_part(counts_row):
        contrib = np.where(counts_row[None, :] > 0.0, counts_row[None, :] * logs, 0.0)
        return contrib.sum(axis=1)

    la_parts = [row_part(n[j]) for j in range(s)]
    lb_parts = [row_part(nt[j]) for j in range(s)]
    zeta_parts = [base @ z[j] for j in range(s)]

    log_a = _grid_block(la_parts, s)
    log_b_counts = _grid_block(lb_parts, s)
    zeta = _grid_block(zeta_parts, s)

    if s == 1:
        pts = base
    else:
        idx = np.array(list(_iter_product(range(g), repeat=s)), dtype=np.int64)
        pts = np.concatenate([base[idx[:, j]] for j in range(s)], axis=1)

    mp = model.terms.lambda_p * model.terms.rp_inv
    vq = pts - 1.0 / m
    pen_p = np.einsum("ga,ab,gb->g", vq, mp, vq)
    log_b = log_b_counts - pen_p

    keep_p = np.isfinite(log_a)
    p_pts = np.ascontiguousarray(pts[keep_p])
    p_loga = log_a[keep_p]
    p_zeta = zeta[keep_p]
    keep_q = np.isfinite(log_b)
    q_pts = np.ascontiguousarray(pts[keep_q])
    q_logb = log_b[keep_q]

    sign = -1.0 if direction == "max" else 1.0
    order_p = np.argsort(sign * p_zeta, kind="stable")
    order_q = np.argsort(-q_logb, kind="stable")
    p_pts = np.ascontiguousarray(p_pts[order_p])
    p_loga = np.ascontiguousarray(p_loga[order_p])
    p_zeta = np.ascontiguousarray(p_zeta[order_p])
    q_pts = np.ascontiguousarray(q_pts[order_q])
    q_logb = np.ascontiguousarray(q_logb[order_q])

    md = np.ascontiguousarray(model.terms.lambda_d * model.terms.rd_inv)
    kern = get_backend(backend)
    found, value, _, _ = kern.grid_scan(p_pts, p_zeta, p_loga, q_pts, q_logb, md, float(log_c))
    if not found:
        raise InfeasibleRegionError(
            "no grid state reaches the requested posterior level; the level set "
            "is empty at this resolution"
        )
    return float(value)


# ---------------------------------------------------------------------------
# Convexity probe
# ---------------------------------------------------------------------------


def convexity_probe(
    model: PosteriorModel,
    log_c: float,
    n_pairs: int,
    seed: int,
    n_draws: int = 4000,
    burn_in: int = 1000,
    step_scale: float = 0.1,
    backend: str | None = None,
) -> float:
    """Fraction of feasible-pair midpoints that stay inside the level set.

    Draws posterior samples, keeps those above ``log_c``, picks random
    distinct pairs, and checks the midpoint state (in the product
    parameterization, where the constraint region is convex and only
    the level set itself can fail).
    """
    from .sampler import mh_sample

    if n_pairs < 0:
        raise ConfigurationError("n_pairs must be nonnegative")
    if n_pairs == 0:
        return 1.0
    chain = mh_sample(model, n_draws, seed, burn_in=burn_in, step_scale=step_scale, backend=backend)
    feasible = np.nonzero(chain.log_posts >= log_c)[0]
    pool = feasible.size
    if pool < 2:
        raise InfeasibleRegionError(
            "fewer than two posterior draws reach the requested level; "
            "lower log_c or lengthen the chain"
        )
    rng = child_rng(seed, KEY_PROBE)
    ii = rng.integers(0, pool, size=n_pairs)
    kk = rng.integers(1, pool, size=n_pairs)
    jj = (ii + kk) % pool
    hits = 0
    for a, b in zip(feasible[ii], feasible[jj]):
        mid_p = 0.5 * (chain.draws_p[a] + chain.draws_p[b])
        mid_q = 0.5 * (chain.draws_p_tilde[a] + chain.draws_p_tilde[b])
        if model.log_posterior_pq(mid_p, mid_q) >= log_c:
            hits += 1
    return hits / n_pairs
