"""Call-center simulators and synthetic dataset generation.

Two discrete-event systems share one kernel: the *model* (what an
analyst would simulate) and the *true system* (the same queue plus
server-break behavior the model omits).  Each replication simulates one
day; the day's outcome is the mean customer waiting time inside the
measurement window, discretized into bins.  Replications are
independent — replication ``r`` uses dedicated RNG streams, so results
are reproducible and independent of ``reps``.

``sample_multinomial_dataset`` covers the complementary setting where
both distributions are known analytically and only sampling noise is
studied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import get_backend
from ._seeding import KEY_DATASET, child_rng, child_seed
from .data import ProblemData
from .errors import ConfigurationError


def lognormal_rate_params(mean: float, var: float) -> tuple[float, float]:
    """Parameters of ``LogNormal(mu, sigma)`` with the given mean and variance."""
    if mean <= 0.0:
        raise ConfigurationError("rate mean must be positive")
    if var < 0.0:
        raise ConfigurationError("rate variance must be nonnegative")
    if var == 0.0:
        return math.log(mean), 0.0
    sigma2 = math.log(1.0 + var / (mean * mean))
    mu = math.log(mean * mean / math.sqrt(var + mean * mean))
    return mu, math.sqrt(sigma2)


@dataclass(frozen=True)
class CallCenterConfig:
    """One day of a multi-server queue with abandonment.

    The arrival rate is drawn once per day from a lognormal law with the
    given mean and variance (``arrival_rate_var = 0`` pins it exactly);
    interarrival and service times are exponential.  Waiting customers
    abandon after an exponential patience time (``math.inf`` disables
    abandonment).  The day's outcome is the mean wait of customers who
    began service during ``[warmup, warmup + horizon)``, discretized by
    ``bins`` into ``len(bins) + 1`` categories.
    """

    servers: int
    arrival_rate_mean: float = 1.8
    arrival_rate_var: float = 0.4
    service_mean: float = 3.5
    abandon_mean: float = 5.0
    horizon: float = 60.0
    warmup: float = 60.0
    bins: tuple[float, ...] = (1.0, 2.0, 3.0)

    def __post_init__(self):
        if not isinstance(self.servers, (int, np.integer)) or self.servers < 1:
            raise ConfigurationError(f"servers must be a positive integer, got {self.servers!r}")
        if self.arrival_rate_mean <= 0.0:
            raise ConfigurationError("arrival_rate_mean must be positive")
        if self.arrival_rate_var < 0.0:
            raise ConfigurationError("arrival_rate_var must be nonnegative")
        if self.service_mean <= 0.0:
            raise ConfigurationError("service_mean must be positive")
        if not (self.abandon_mean > 0.0):  # also rejects NaN
            raise ConfigurationError("abandon_mean must be positive (math.inf disables)")
        if self.horizon <= 0.0:
            raise ConfigurationError("horizon must be positive")
        if self.warmup < 0.0:
            raise ConfigurationError("warmup must be nonnegative")
        bins = tuple(float(b) for b in self.bins)
        if len(bins) < 1:
            raise ConfigurationError("need at least one bin edge")
        if any(not math.isfinite(b) or b <= 0.0 for b in bins):
            raise ConfigurationError("bin edges must be positive and finite")
        if any(bins[i] >= bins[i + 1] for i in range(len(bins) - 1)):
            raise ConfigurationError("bin edges must be strictly increasing")
        object.__setattr__(self, "bins", bins)

    @property
    def m(self) -> int:
        """Number of outcome categories."""
        return len(self.bins) + 1

    @property
    def rate_params(self) -> tuple[float, float]:
        return lognormal_rate_params(self.arrival_rate_mean, self.arrival_rate_var)


@dataclass(frozen=True)
class TrueModelConfig(CallCenterConfig):
    """The call center as it actually operates: servers take breaks.

    A break process ticks at exponential intervals.  At each tick, if at
    least ``break_trigger_idle`` servers are idle, the most idle-rich
    staffing is trimmed: ``idle - stop_trigger_idle`` of them stop for
    the day, and the remaining idle servers take an exponential-length
    break.  None of this exists in ``CallCenterConfig`` — the gap
    between the two systems is the model discrepancy under study.
    """

    break_interarrival_mean: float = 5.0
    break_duration_mean: float = 30.0
    break_trigger_idle: int = 5
    stop_trigger_idle: int = 7

    def __post_init__(self):
        super().__post_init__()
        if self.break_interarrival_mean <= 0.0:
            raise ConfigurationError("break_interarrival_mean must be positive")
        if self.break_duration_mean <= 0.0:
            raise ConfigurationError("break_duration_mean must be positive")
        if not isinstance(self.break_trigger_idle, (int, np.integer)) or self.break_trigger_idle < 1:
            raise ConfigurationError("break_trigger_idle must be a positive integer")
        if not isinstance(self.stop_trigger_idle, (int, np.integer)):
            raise ConfigurationError("stop_trigger_idle must be an integer")
        if self.stop_trigger_idle <= self.break_trigger_idle:
            raise ConfigurationError(
                "stop_trigger_idle must exceed break_trigger_idle, otherwise a "
                "break tick could stop more servers than are idle"
            )


def _run_reps(config: CallCenterConfig, reps: int, seed: int, breaks_on: bool, backend=None):
    """Raw per-replication totals: (sum of waits, number served)."""
    if reps < 1:
        raise ConfigurationError("reps must be a positive integer")
    kern = get_backend(backend)
    mu, sigma = config.rate_params
    if breaks_on:
        if not isinstance(config, TrueModelConfig):
            raise ConfigurationError("break simulation needs a TrueModelConfig")
        break_args = (
            config.break_interarrival_mean,
            config.break_duration_mean,
            config.break_trigger_idle,
            config.stop_trigger_idle,
        )
    else:
        # Inert values: the break stream is separate, so these never matter.
        break_args = (1.0, 1.0, 10**9, 10**9 + 1)
    sum_wait = np.zeros(reps, dtype=np.float64)
    n_served = np.zeros(reps, dtype=np.int64)
    kern.call_center_reps(
        reps,
        int(seed),
        int(config.servers),
        float(config.arrival_rate_mean),
        float(mu),
        float(sigma),
        float(config.service_mean),
        float(config.abandon_mean),
        float(config.warmup),
        float(config.horizon),
        1 if breaks_on else 0,
        float(break_args[0]),
        float(break_args[1]),
        int(break_args[2]),
        int(break_args[3]),
        sum_wait,
        n_served,
    )
    return sum_wait, n_served


def replication_mean_waits(
    config: CallCenterConfig, reps: int, seed: int, backend=None
) -> np.ndarray:
    """Per-day mean waiting times (a day serving nobody scores 0)."""
    breaks_on = isinstance(config, TrueModelConfig)
    sum_wait, n_served = _run_reps(config, reps, seed, breaks_on, backend)
    with np.errstate(invalid="ignore"):
        means = np.where(n_served > 0, sum_wait / np.maximum(n_served, 1), 0.0)
    return means


def bin_outcomes(mean_waits: np.ndarray, bins) -> np.ndarray:
    """Category counts for per-day outcomes; category k is [bins[k-1], bins[k])."""
    edges = np.asarray(bins, dtype=float)
    idx = np.digitize(np.asarray(mean_waits, dtype=float), edges)
    return np.bincount(idx, minlength=edges.size + 1).astype(np.int64)


def simulate_call_center(
    config: CallCenterConfig, reps: int, seed: int, backend=None
) -> np.ndarray:
    """Outcome counts from the model (no breaks), shape ``(m,)``."""
    sum_wait, n_served = _run_reps(config, reps, seed, False, backend)
    with np.errstate(invalid="ignore"):
        means = np.where(n_served > 0, sum_wait / np.maximum(n_served, 1), 0.0)
    return bin_outcomes(means, config.bins)


def simulate_true_system(
    config: TrueModelConfig, reps: int, seed: int, backend=None
) -> np.ndarray:
    """Outcome counts from the real system (breaks active), shape ``(m,)``."""
    if not isinstance(config, TrueModelConfig):
        raise ConfigurationError("simulate_true_system requires a TrueModelConfig")
    sum_wait, n_served = _run_reps(config, reps, seed, True, backend)
    with np.errstate(invalid="ignore"):
        means = np.where(n_served > 0, sum_wait / np.maximum(n_served, 1), 0.0)
    return bin_outcomes(means, config.bins)


def pooled_mean_wait(config: CallCenterConfig, reps: int, seed: int, backend=None) -> float:
    """All-replication estimator: total wait over total served."""
    breaks_on = isinstance(config, TrueModelConfig)
    sum_wait, n_served = _run_reps(config, reps, seed, breaks_on, backend)
    total_served = int(n_served.sum())
    if total_served == 0:
        raise ConfigurationError("no customers were served; widen the horizon")
    return float(sum_wait.sum() / total_served)


def mm1_theoretical_wait(arrival_rate: float, service_mean: float) -> float:
    """Stationary mean queueing delay of the single-server Markov queue."""
    if arrival_rate <= 0.0 or service_mean <= 0.0:
        raise ConfigurationError("rates must be positive")
    rho = arrival_rate * service_mean
    if rho >= 1.0:
        raise ConfigurationError(f"utilization {rho:.3f} is unstable (needs < 1)")
    return arrival_rate * service_mean * service_mean / (1.0 - rho)


# ---------------------------------------------------------------------------
# Multinomial synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticScheme:
    """Known pair of distributions from which count data are drawn.

    ``pi`` is the real system's outcome law, ``pi_tilde`` the model's;
    both are ``(s, m)`` row-stochastic tables over the same designs.
    ``n_real`` / ``n_sim`` give per-design sample sizes (scalars apply
    to every design; a zero means the design is unobserved on that side).
    """

    design_coords: np.ndarray
    pi: np.ndarray
    pi_tilde: np.ndarray
    n_real: np.ndarray
    n_sim: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.design_coords, dtype=float).reshape(-1)
        pi = np.asarray(self.pi, dtype=float)
        pt = np.asarray(self.pi_tilde, dtype=float)
        if pi.ndim != 2 or pi.shape != pt.shape:
            raise ConfigurationError("pi and pi_tilde must be equal-shape (s, m) tables")
        s, m = pi.shape
        if coords.size != s:
            raise ConfigurationError("one design coordinate per table row is required")
        for name, tbl in (("pi", pi), ("pi_tilde", pt)):
            if np.any(tbl < 0.0) or np.any(np.abs(tbl.sum(axis=1) - 1.0) > 1e-9):
                raise ConfigurationError(f"{name} rows must be distributions")
        n_real = np.broadcast_to(np.asarray(self.n_real, dtype=np.int64), (s,)).copy()
        n_sim = np.broadcast_to(np.asarray(self.n_sim, dtype=np.int64), (s,)).copy()
        if np.any(n_real < 0) or np.any(n_sim < 0):
            raise ConfigurationError("sample sizes must be nonnegative")
        object.__setattr__(self, "design_coords", coords)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "pi_tilde", pt)
        object.__setattr__(self, "n_real", n_real)
        object.__setattr__(self, "n_sim", n_sim)

    @property
    def s(self) -> int:
        return self.pi.shape[0]

    @property
    def m(self) -> int:
        return self.pi.shape[1]

    def true_discrepancy(self) -> np.ndarray:
        """Cell-wise ratio pi / pi_tilde (1 where both vanish)."""
        num = self.pi
        den = self.pi_tilde
        out = np.ones_like(num)
        pos = den > 0.0
        out[pos] = num[pos] / den[pos]
        return out

    def functional_truth(self, z: np.ndarray) -> float:
        """The estimand sum z * pi the bounds are trying to cover."""
        return float(np.sum(np.asarray(z, dtype=float) * self.pi))


def sample_multinomial_dataset(scheme: SyntheticScheme, seed: int) -> ProblemData:
    """Draw one dataset (real and simulated counts) from the scheme."""
    s, m = scheme.s, scheme.m
    real = np.zeros((s, m), dtype=np.int64)
    sim = np.zeros((s, m), dtype=np.int64)
    for j in range(s):
        rng = child_rng(seed, KEY_DATASET, j)
        if scheme.n_real[j] > 0:
            real[j] = rng.multinomial(int(scheme.n_real[j]), scheme.pi[j])
        if scheme.n_sim[j] > 0:
            sim[j] = rng.multinomial(int(scheme.n_sim[j]), scheme.pi_tilde[j])
    return ProblemData(
        design_coords=scheme.design_coords, real_counts=real, sim_counts=sim
    )


def simulator_dataset(
    template: CallCenterConfig,
    true_template: TrueModelConfig,
    design_servers,
    real_servers,
    sim_reps: int,
    real_reps: int,
    seed: int,
    backend=None,
) -> ProblemData:
    """End-to-end dataset: simulated counts everywhere, real counts where observed.

    ``design_servers`` lists the staffing levels forming the design grid;
    ``real_servers`` is the subset where the true system was observed.
    Designs outside it get all-zero real rows, which the posterior
    treats as unobserved.
    """
    designs = [int(v) for v in design_servers]
    observed = {int(v) for v in real_servers}
    if not set(observed) <= set(designs):
        raise ConfigurationError("real_servers must be a subset of design_servers")
    m = template.m
    if true_template.bins != template.bins:
        raise ConfigurationError("both configurations must share bin edges")
    real = np.zeros((len(designs), m), dtype=np.int64)
    sim = np.zeros((len(designs), m), dtype=np.int64)
    for jj, servers in enumerate(designs):
        cfg = _with_servers(template, servers)
        sim[jj] = simulate_call_center(cfg, sim_reps, child_seed(seed, KEY_DATASET, jj, 0), backend)
        if servers in observed:
            tcfg = _with_servers(true_template, servers)
            real[jj] = simulate_true_system(
                tcfg, real_reps, child_seed(seed, KEY_DATASET, jj, 1), backend
            )
    return ProblemData(
        design_coords=np.asarray(designs, dtype=float), real_counts=real, sim_counts=sim
    )


def _with_servers(config: CallCenterConfig, servers: int):
    """Copy of a config at a different staffing level."""
    from dataclasses import replace

    return replace(config, servers=int(servers))
