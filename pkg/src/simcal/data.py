"""Core domain types: count data, probability tables, discrepancy tables.

Conventions used throughout the package:

* ``s`` design points indexed by ``j``, ``m`` discrete outcome categories
  indexed by ``i``.
* ``real_counts[j, i]`` — observations of the real system at design ``j``
  falling in category ``i``; row totals ``n_j``.
* ``sim_counts[j, i]`` — simulation replications at design ``j`` falling
  in category ``i``; row totals ``ñ_j``.
* A probability table ``p`` has nonnegative rows summing to one.
* A discrepancy table ``d`` is the cell-wise ratio between the real and
  simulated category probabilities; against a companion probability
  table ``q`` it must satisfy ``d >= 0`` and ``sum_i d[j, i] q[j, i] = 1``
  for every row, so that ``d * q`` is again a probability table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataFormatError

#: Absolute tolerance for simplex / mixture identities.
CONSTRAINT_TOL = 1e-9


def _as_float_table(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ConfigurationError(
            f"{name} needs at least 1 design point and 2 outcome categories, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return arr


def validate_distribution(p, tol: float = CONSTRAINT_TOL) -> bool:
    """True when every row of ``p`` is a probability vector within ``tol``."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        return False
    if np.any(arr < -tol):
        return False
    return bool(np.all(np.abs(arr.sum(axis=1) - 1.0) <= tol))


def validate_discrepancy(d, p, tol: float = CONSTRAINT_TOL) -> bool:
    """True when ``d`` is a valid discrepancy table against companion ``p``.

    Requires ``d >= 0`` cell-wise and ``sum_i d[j,i] p[j,i] == 1`` per row
    (within ``tol``), i.e. the reweighted table ``d * p`` is again a
    probability table.
    """
    darr = np.asarray(d, dtype=float)
    parr = np.asarray(p, dtype=float)
    if darr.shape != parr.shape:
        return False
    if darr.ndim == 1:
        darr = darr[None, :]
        parr = parr[None, :]
    if not np.all(np.isfinite(darr)):
        return False
    if np.any(darr < -tol):
        return False
    return bool(np.all(np.abs((darr * parr).sum(axis=1) - 1.0) <= tol))


@dataclass(frozen=True)
class ProblemData:
    """Count data for one calibration problem.

    ``design_coords`` holds one scalar coordinate per design point (used
    by the prior correlation kernel); ``real_counts`` and ``sim_counts``
    are ``s x m`` integer tables.
    """

    design_coords: np.ndarray
    real_counts: np.ndarray
    sim_counts: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.design_coords, dtype=float).reshape(-1)
        real = np.asarray(self.real_counts)
        sim = np.asarray(self.sim_counts)
        for name, arr in (("real_counts", real), ("sim_counts", sim)):
            if arr.ndim != 2:
                raise DataFormatError(f"{name} must be 2-d, got shape {arr.shape}")
            if not np.issubdtype(arr.dtype, np.integer):
                if not np.all(np.equal(np.mod(arr, 1), 0)):
                    raise DataFormatError(f"{name} must contain integers")
            if np.any(np.asarray(arr, dtype=np.int64) < 0):
                raise DataFormatError(f"{name} must be nonnegative")
        real = np.asarray(real, dtype=np.int64)
        sim = np.asarray(sim, dtype=np.int64)
        if real.shape != sim.shape:
            raise DataFormatError(
                f"real_counts {real.shape} and sim_counts {sim.shape} must share a shape"
            )
        if real.shape[0] != coords.size:
            raise DataFormatError(
                f"{coords.size} design coordinates for {real.shape[0]} count rows"
            )
        if real.shape[1] < 2:
            raise DataFormatError("need at least 2 outcome categories")
        if not np.all(np.isfinite(coords)):
            raise DataFormatError("design coordinates must be finite")
        if np.unique(coords).size != coords.size:
            raise DataFormatError("design coordinates must be distinct")
        object.__setattr__(self, "design_coords", coords)
        object.__setattr__(self, "real_counts", real)
        object.__setattr__(self, "sim_counts", sim)

    @property
    def s(self) -> int:
        """Number of design points."""
        return self.real_counts.shape[0]

    @property
    def m(self) -> int:
        """Number of outcome categories."""
        return self.real_counts.shape[1]

    @property
    def real_totals(self) -> np.ndarray:
        """Row totals ``n_j`` of the real-system counts."""
        return self.real_counts.sum(axis=1)

    @property
    def sim_totals(self) -> np.ndarray:
        """Row totals ``ñ_j`` of the simulation counts."""
        return self.sim_counts.sum(axis=1)


@dataclass(frozen=True)
class ProbTable:
    """An ``s x m`` table whose rows are probability vectors."""

    values: np.ndarray
    tol: float = field(default=CONSTRAINT_TOL, compare=False)

    def __post_init__(self):
        arr = _as_float_table(self.values, "ProbTable.values")
        if not validate_distribution(arr, self.tol):
            raise ConfigurationError(
                "ProbTable rows must be nonnegative and sum to 1 within tolerance"
            )
        object.__setattr__(self, "values", arr)

    @property
    def s(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DiscrepancyTable:
    """An ``s x m`` table of nonnegative likelihood-ratio factors.

    When a ``companion`` probability table is supplied the mixture
    identity ``sum_i d[j,i] companion[j,i] = 1`` is enforced per row.
    """

    values: np.ndarray
    companion: ProbTable | None = None
    tol: float = field(default=CONSTRAINT_TOL, compare=False)

    def __post_init__(self):
        arr = _as_float_table(self.values, "DiscrepancyTable.values")
        if np.any(arr < -self.tol):
            raise ConfigurationError("discrepancy factors must be nonnegative")
        if self.companion is not None:
            if not validate_discrepancy(arr, self.companion.values, self.tol):
                raise ConfigurationError(
                    "discrepancy table is inconsistent with its companion probabilities"
                )
        object.__setattr__(self, "values", arr)

    @property
    def s(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]
