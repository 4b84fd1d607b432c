"""Gaussian prior specification and correlation structure.

The prior on the discrepancy table ``d`` and the simulated probability
table ``q`` is log-quadratic:

    log prior(d, q) = -lambda_p (q - 1/m)' Rp^-1 (q - 1/m)
                      -lambda_d (d - 1)'   Rd^-1 (d - 1)

on the constraint region (valid probability rows, valid discrepancy
rows), and -inf outside it.  Tables are flattened design-major: cell
``(j, i)`` maps to index ``j * m + i``.

Correlation matrices either come from a separable kernel

    R[(j,i),(k,l)] = rho_design^|x_j - x_k| * rho_outcome^|i - l|

(i.e. a Kronecker product of two AR(1)-style factors) or are supplied
explicitly.  A diagonal jitter is added once at construction; inverses
of kernel-built matrices are computed exactly through the Kronecker
eigendecomposition, which stays accurate even for strong correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


def _ar1_correlation(coords: np.ndarray, rho: float) -> np.ndarray:
    dist = np.abs(coords[:, None] - coords[None, :])
    if rho == 0.0:
        return np.where(dist == 0.0, 1.0, 0.0)
    return np.power(rho, dist)


def build_prior_correlation(
    design_coords,
    m: int,
    rho_design: float,
    rho_outcome: float,
    jitter: float = 0.0,
) -> np.ndarray:
    """Dense separable correlation matrix over flattened ``(design, outcome)`` cells."""
    coords = np.asarray(design_coords, dtype=float).reshape(-1)
    if coords.size < 1:
        raise ConfigurationError("need at least one design coordinate")
    if m < 2:
        raise ConfigurationError("need at least two outcome categories")
    for name, rho in (("rho_design", rho_design), ("rho_outcome", rho_outcome)):
        if not 0.0 <= rho < 1.0:
            raise ConfigurationError(f"{name} must lie in [0, 1), got {rho!r}")
    if jitter < 0.0:
        raise ConfigurationError("jitter must be nonnegative")
    r_x = _ar1_correlation(coords, rho_design)
    r_y = _ar1_correlation(np.arange(m, dtype=float), rho_outcome)
    out = np.kron(r_x, r_y)
    if jitter:
        out = out + jitter * np.eye(out.shape[0])
    return out


@dataclass(frozen=True)
class GaussianPriorSpec:
    """Log-quadratic prior parameters.

    ``lambda_d`` / ``lambda_p`` are nonnegative scale weights for the
    discrepancy and probability penalty terms.  Correlation comes from
    the separable kernel with decay rates ``rho_design`` (in design
    coordinates) and ``rho_outcome`` (in category index) unless explicit
    matrices ``R_d`` / ``R_p`` are supplied.
    """

    lambda_d: float
    lambda_p: float
    rho_design: float = 0.75
    rho_outcome: float = 0.75
    jitter: float = 1e-8
    R_d: np.ndarray | None = None
    R_p: np.ndarray | None = None

    def __post_init__(self):
        if self.lambda_d < 0 or self.lambda_p < 0:
            raise ConfigurationError("prior scale weights must be nonnegative")
        for name, rho in (("rho_design", self.rho_design), ("rho_outcome", self.rho_outcome)):
            if not 0.0 <= rho < 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1), got {rho!r}")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be nonnegative")
        for name in ("R_d", "R_p"):
            mat = getattr(self, name)
            if mat is not None:
                arr = np.asarray(mat, dtype=float)
                if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                    raise ConfigurationError(f"{name} must be a square matrix")
                if not np.allclose(arr, arr.T, atol=1e-12):
                    raise ConfigurationError(f"{name} must be symmetric")
                object.__setattr__(self, name, arr)

    def build_terms(self, design_coords, m: int) -> "PriorTerms":
        """Materialize the penalty matrices for a concrete design layout."""
        coords = np.asarray(design_coords, dtype=float).reshape(-1)
        dim = coords.size * m
        rd_inv = self._inverse_for(self.R_d, coords, m, dim, "R_d")
        rp_inv = self._inverse_for(self.R_p, coords, m, dim, "R_p")
        return PriorTerms(
            lambda_d=float(self.lambda_d),
            lambda_p=float(self.lambda_p),
            rd_inv=rd_inv,
            rp_inv=rp_inv,
            s=coords.size,
            m=m,
        )

    def _inverse_for(
        self, explicit: np.ndarray | None, coords: np.ndarray, m: int, dim: int, name: str
    ) -> np.ndarray:
        if explicit is not None:
            if explicit.shape != (dim, dim):
                raise ConfigurationError(
                    f"{name} has shape {explicit.shape}, expected {(dim, dim)}"
                )
            mat = explicit + self.jitter * np.eye(dim)
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError as exc:
                raise ConfigurationError(f"{name} (plus jitter) is not positive definite") from exc
            inv = np.linalg.solve(mat, np.eye(dim))
            return 0.5 * (inv + inv.T)
        return _kernel_inverse(coords, m, self.rho_design, self.rho_outcome, self.jitter)


def _kernel_inverse(
    coords: np.ndarray, m: int, rho_design: float, rho_outcome: float, jitter: float
) -> np.ndarray:
    """Exact inverse of ``kron(Rx, Ry) + jitter*I`` via the Kronecker eigenbasis."""
    r_x = _ar1_correlation(coords, rho_design)
    r_y = _ar1_correlation(np.arange(m, dtype=float), rho_outcome)
    ex, ux = np.linalg.eigh(r_x)
    ey, uy = np.linalg.eigh(r_y)
    evals = np.kron(ex, ey) + jitter
    if np.min(evals) <= 0.0:
        raise ConfigurationError(
            "prior correlation is numerically singular; increase the jitter"
        )
    u = np.kron(ux, uy)
    inv = (u / evals) @ u.T
    return 0.5 * (inv + inv.T)


@dataclass(frozen=True)
class PriorTerms:
    """Dense penalty matrices for one problem layout.

    ``rd_inv`` / ``rp_inv`` are the inverted correlation matrices (jitter
    included); the penalty weights are kept separate so that callers can
    form ``lambda * R^-1`` products lazily.
    """

    lambda_d: float
    lambda_p: float
    rd_inv: np.ndarray
    rp_inv: np.ndarray
    s: int
    m: int

    @property
    def dim(self) -> int:
        return self.s * self.m

    def penalty_d(self, d_flat: np.ndarray) -> float:
        """``lambda_d * (d - 1)' Rd^-1 (d - 1)`` for a flattened table."""
        v = d_flat - 1.0
        return float(self.lambda_d * (v @ self.rd_inv @ v))

    def penalty_p(self, q_flat: np.ndarray) -> float:
        """``lambda_p * (q - 1/m)' Rp^-1 (q - 1/m)`` for a flattened table."""
        v = q_flat - 1.0 / self.m
        return float(self.lambda_p * (v @ self.rp_inv @ v))

    def grad_penalty_d(self, d_flat: np.ndarray) -> np.ndarray:
        return 2.0 * self.lambda_d * (self.rd_inv @ (d_flat - 1.0))

    def grad_penalty_p(self, q_flat: np.ndarray) -> np.ndarray:
        return 2.0 * self.lambda_p * (self.rp_inv @ (q_flat - 1.0 / self.m))
