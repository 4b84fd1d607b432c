"""Random-walk Metropolis sampling of the posterior.

This is the sampling-based baseline against which the optimization
bounds are compared.  States live in the product parameterization
``(p, q)`` with ``p = d * q``; the target density is the unnormalized
posterior with respect to Lebesgue measure on the product of simplices.
Proposals act row-wise through additive-log-ratio coordinates, so the
chain explores the open interior of the simplices (the boundary carries
zero posterior mass).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import get_backend
from .errors import ConfigurationError
from .mode import SolverOptions, find_posterior_mode
from .posterior import PosteriorModel
from .stats import quantile_type7


@dataclass(frozen=True)
class Chain:
    """Stored posterior draws plus sampling metadata.

    ``draws_p[k]`` and ``draws_p_tilde[k]`` are the ``s x m`` tables of
    the k-th retained state; the discrepancy table of a draw is their
    cell-wise ratio.  ``log_posts`` holds the unnormalized log posterior
    of each retained state.
    """

    draws_p: np.ndarray
    draws_p_tilde: np.ndarray
    log_posts: np.ndarray
    acceptance_rate: float
    seed: int
    burn_in: int
    step_scale_initial: float
    step_scale_final: float

    def __len__(self) -> int:
        return self.draws_p.shape[0]

    def draw(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(d, p_tilde)`` of the k-th retained state."""
        p = self.draws_p[k]
        q = self.draws_p_tilde[k]
        return p / q, q

    def functional_values(self, z) -> np.ndarray:
        """``sum z * p`` per draw for an ``s x m`` coefficient table."""
        zarr = np.asarray(z, dtype=float)
        return np.einsum("kji,ji->k", self.draws_p, zarr)


def mh_sample(
    model: PosteriorModel,
    n_draws: int,
    seed: int,
    burn_in: int = 1000,
    step_scale: float = 0.1,
    initial_state: tuple | None = None,
    adapt: bool = True,
    backend: str | None = None,
) -> Chain:
    """Run the random-walk Metropolis kernel and return the retained draws.

    ``initial_state`` is an optional ``(d, p_tilde)`` pair; by default
    the chain starts at the posterior mode.  During burn-in the proposal
    scale adapts toward 25% acceptance, then freezes.
    """
    if n_draws < 1:
        raise ConfigurationError("n_draws must be at least 1")
    if burn_in < 0:
        raise ConfigurationError("burn_in must be nonnegative")
    if step_scale <= 0:
        raise ConfigurationError("step_scale must be positive")
    kern = get_backend(backend)

    if initial_state is None:
        mode = find_posterior_mode(model, SolverOptions(restarts=2, seed=seed))
        p0 = mode.p_star
        q0 = mode.p_tilde_star
    else:
        d0, q0 = initial_state
        d0 = np.asarray(d0, dtype=float)
        q0 = np.asarray(q0, dtype=float)
        p0 = d0 * q0
    if np.any(p0 <= 0.0) or np.any(q0 <= 0.0):
        raise ConfigurationError("the chain must start strictly inside the simplices")
    if not np.isfinite(model.log_posterior_pq(p0, q0)):
        raise ConfigurationError("the chain's starting state has zero posterior density")

    s, m = model.s, model.m
    dim = s * m
    out_p = np.empty((n_draws, dim), dtype=np.float64)
    out_q = np.empty((n_draws, dim), dtype=np.float64)
    out_lp = np.empty(n_draws, dtype=np.float64)
    acc_rate, final_step = kern.mh_chain(
        int(n_draws),
        int(burn_in),
        float(step_scale),
        bool(adapt),
        int(seed),
        np.ascontiguousarray(model.data.real_counts.reshape(-1), dtype=np.float64),
        np.ascontiguousarray(model.data.sim_counts.reshape(-1), dtype=np.float64),
        float(model.terms.lambda_d),
        float(model.terms.lambda_p),
        np.ascontiguousarray(model.terms.rd_inv),
        np.ascontiguousarray(model.terms.rp_inv),
        np.ascontiguousarray(p0.reshape(-1), dtype=np.float64),
        np.ascontiguousarray(q0.reshape(-1), dtype=np.float64),
        int(s),
        int(m),
        out_p,
        out_q,
        out_lp,
    )
    return Chain(
        draws_p=out_p.reshape(n_draws, s, m),
        draws_p_tilde=out_q.reshape(n_draws, s, m),
        log_posts=out_lp,
        acceptance_rate=float(acc_rate),
        seed=int(seed),
        burn_in=int(burn_in),
        step_scale_initial=float(step_scale),
        step_scale_final=float(final_step),
    )


def posterior_quantile(chain: Chain, z, level: float) -> float:
    """Quantile of the functional ``sum z * p`` over the chain's draws."""
    return quantile_type7(chain.functional_values(z), level)


def effective_sample_size(values) -> float:
    """Autocorrelation-based effective sample size (initial positive sequence)."""
    x = np.asarray(values, dtype=float).reshape(-1)
    n = x.size
    if n < 2:
        return float(n)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var <= 0.0:
        return 1.0  # a constant series carries one draw's worth of information
    max_lag = n - 1
    tau = 1.0
    t = 0
    prev_pair = np.inf
    while 2 * t + 1 <= max_lag:
        rho_even = float(xc[: n - 2 * t] @ xc[2 * t:]) / (n * var) if 2 * t <= max_lag else 0.0
        lag_odd = 2 * t + 1
        rho_odd = float(xc[: n - lag_odd] @ xc[lag_odd:]) / (n * var)
        pair = rho_even + rho_odd
        if t == 0:
            pair = 1.0 + rho_odd  # lag-0 autocorrelation is exactly 1
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        if t == 0:
            tau = 2.0 * pair - 1.0
        else:
            tau += 2.0 * pair
        prev_pair = pair
        t += 1
    ess = n / max(tau, 1.0 / n)
    return float(min(max(ess, 1.0), float(n)))


def chain_to_csv(chain: Chain, path) -> None:
    """Write one row per retained draw: flattened state plus log posterior."""
    import csv

    n, s, m = chain.draws_p.shape
    header = ["draw_index"]
    header += [f"p_{j}_{i}" for j in range(s) for i in range(m)]
    header += [f"p_tilde_{j}_{i}" for j in range(s) for i in range(m)]
    header += ["log_post"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        flat_p = chain.draws_p.reshape(n, -1)
        flat_q = chain.draws_p_tilde.reshape(n, -1)
        for k in range(n):
            row = [k]
            row += [repr(float(v)) for v in flat_p[k]]
            row += [repr(float(v)) for v in flat_q[k]]
            row.append(repr(float(chain.log_posts[k])))
            writer.writerow(row)
