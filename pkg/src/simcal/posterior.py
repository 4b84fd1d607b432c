"""Posterior density over discrepancy and simulated-probability tables.

Up to an additive normalizing constant, the log posterior for count data
``(n, ñ)`` at a state ``(d, q)`` — discrepancy table ``d``, simulated
probability table ``q`` — is

    sum_{j,i} n[j,i]  log(d[j,i] q[j,i])
  + sum_{j,i} ñ[j,i]  log(q[j,i])
  + log prior(d, q)

with the convention ``0 * log(anything) = 0`` and value ``-inf`` whenever
a cell with positive count has nonpositive probability or the state
leaves the constraint region.

Two parameterizations are supported.  The native one is ``(d, q)``.  The
product form substitutes ``p = d * q`` cell-wise, turning the likelihood
into ``sum n log p + sum ñ log q`` where both blocks range over products
of probability simplices; optimizers and the sampler work there because
the constraint region becomes a product of simplices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import CONSTRAINT_TOL, ProblemData, validate_discrepancy, validate_distribution
from .errors import ConfigurationError
from .prior import GaussianPriorSpec, PriorTerms

_NEG_INF = float("-inf")


def _counts_log_sum(counts: np.ndarray, values: np.ndarray) -> float:
    """``sum counts * log(values)`` over cells with positive count."""
    mask = counts > 0
    if not np.any(mask):
        return 0.0
    vals = values[mask]
    if np.any(vals <= 0.0):
        return _NEG_INF
    return float(np.sum(counts[mask] * np.log(vals)))


def log_likelihood(d, p_tilde, data: ProblemData) -> float:
    """Log likelihood of the counts at state ``(d, p_tilde)``."""
    darr = np.asarray(d, dtype=float)
    qarr = np.asarray(p_tilde, dtype=float)
    if darr.shape != (data.s, data.m) or qarr.shape != (data.s, data.m):
        raise ConfigurationError(
            f"state tables must have shape {(data.s, data.m)}, got {darr.shape} and {qarr.shape}"
        )
    real_part = _counts_log_sum(data.real_counts, darr * qarr)
    if real_part == _NEG_INF:
        return _NEG_INF
    sim_part = _counts_log_sum(data.sim_counts, qarr)
    if sim_part == _NEG_INF:
        return _NEG_INF
    return real_part + sim_part


def _state_is_valid(darr: np.ndarray, qarr: np.ndarray, tol: float = CONSTRAINT_TOL) -> bool:
    return validate_distribution(qarr, tol) and validate_discrepancy(darr, qarr, tol)


def log_prior(
    d,
    p_tilde,
    prior: GaussianPriorSpec,
    design_coords=None,
) -> float:
    """Log prior density at ``(d, p_tilde)``; ``-inf`` off the constraint region.

    ``design_coords`` is required when the correlation matrices come from
    the separable kernel (it fixes the design distances); it may be
    omitted when the prior carries explicit matrices.
    """
    darr = np.asarray(d, dtype=float)
    qarr = np.asarray(p_tilde, dtype=float)
    if darr.shape != qarr.shape or darr.ndim != 2:
        raise ConfigurationError("d and p_tilde must be 2-d tables of equal shape")
    s, m = darr.shape
    if design_coords is None:
        if prior.R_d is None or prior.R_p is None:
            raise ConfigurationError(
                "design_coords are required when prior correlation is kernel-built"
            )
        coords = np.arange(s, dtype=float)
    else:
        coords = np.asarray(design_coords, dtype=float).reshape(-1)
    terms = prior.build_terms(coords, m)
    return _log_prior_terms(darr, qarr, terms)


def _log_prior_terms(darr: np.ndarray, qarr: np.ndarray, terms: PriorTerms) -> float:
    if not _state_is_valid(darr, qarr):
        return _NEG_INF
    return -terms.penalty_p(qarr.reshape(-1)) - terms.penalty_d(darr.reshape(-1))


@dataclass(frozen=True)
class PosteriorModel:
    """Bundle of count data and prior, with cached penalty matrices."""

    data: ProblemData
    prior: GaussianPriorSpec
    terms: PriorTerms = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = self.prior.build_terms(self.data.design_coords, self.data.m)
        object.__setattr__(self, "terms", terms)

    @property
    def s(self) -> int:
        return self.data.s

    @property
    def m(self) -> int:
        return self.data.m

    def log_likelihood(self, d, p_tilde) -> float:
        return log_likelihood(d, p_tilde, self.data)

    def log_prior(self, d, p_tilde) -> float:
        darr = np.asarray(d, dtype=float)
        qarr = np.asarray(p_tilde, dtype=float)
        return _log_prior_terms(darr, qarr, self.terms)

    def log_posterior(self, d, p_tilde) -> float:
        prior_part = self.log_prior(d, p_tilde)
        if prior_part == _NEG_INF:
            return _NEG_INF
        like_part = self.log_likelihood(d, p_tilde)
        if like_part == _NEG_INF:
            return _NEG_INF
        return like_part + prior_part

    # ----- product parameterization ------------------------------------

    def discrepancy_from_product(self, p, p_tilde) -> np.ndarray:
        """Cell-wise ratio ``p / p_tilde`` with the 0/0 cell convention.

        Cells where both entries vanish contribute no information and no
        penalty; they are assigned the prior-mean ratio 1.  A zero
        ``p_tilde`` cell with positive ``p`` has no finite ratio and
        raises.
        """
        parr = np.asarray(p, dtype=float)
        qarr = np.asarray(p_tilde, dtype=float)
        bad = (qarr <= 0.0) & (parr > 0.0)
        if np.any(bad):
            raise ConfigurationError("p assigns mass to a cell where p_tilde vanishes")
        d = np.ones_like(parr)
        mask = qarr > 0.0
        d[mask] = np.clip(parr[mask], 0.0, None) / qarr[mask]
        return d

    def log_posterior_pq(self, p, p_tilde) -> float:
        """Log posterior in the product parameterization ``p = d * p_tilde``."""
        parr = np.asarray(p, dtype=float)
        qarr = np.asarray(p_tilde, dtype=float)
        if parr.shape != (self.s, self.m) or qarr.shape != (self.s, self.m):
            raise ConfigurationError(
                f"state tables must have shape {(self.s, self.m)}"
            )
        if not (validate_distribution(parr) and validate_distribution(qarr)):
            return _NEG_INF
        real_part = _counts_log_sum(self.data.real_counts, parr)
        if real_part == _NEG_INF:
            return _NEG_INF
        sim_part = _counts_log_sum(self.data.sim_counts, qarr)
        if sim_part == _NEG_INF:
            return _NEG_INF
        if np.any((qarr <= 0.0) & (parr > 0.0)):
            return _NEG_INF
        d = np.ones_like(parr)
        mask = qarr > 0.0
        d[mask] = np.clip(parr[mask], 0.0, None) / qarr[mask]
        penalty = self.terms.penalty_p(qarr.reshape(-1)) + self.terms.penalty_d(d.reshape(-1))
        return real_part + sim_part - penalty


def log_posterior(model: PosteriorModel, d, p_tilde) -> float:
    """Unnormalized log posterior density at ``(d, p_tilde)``."""
    return model.log_posterior(d, p_tilde)


def functional_value(z, d, p_tilde) -> float:
    """Linear functional ``sum_{j,i} z[j,i] d[j,i] p_tilde[j,i]``."""
    zarr = np.asarray(z, dtype=float)
    return float(np.sum(zarr * np.asarray(d, dtype=float) * np.asarray(p_tilde, dtype=float)))


def is_finite_log(x: float) -> bool:
    return x > _NEG_INF and not math.isnan(x)
