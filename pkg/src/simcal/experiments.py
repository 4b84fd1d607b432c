"""Experiment drivers: calibration runs and statistical verification.

Every driver is deterministic given its seed: replication ``r`` derives
its own seed, so results do not depend on execution order or worker
count.  Reports separate reproducible content from a ``meta`` block
(timings, backend) that may vary between runs.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from ._kernels import default_backend_name
from ._seeding import KEY_CHAIN, KEY_DATASET, KEY_REPLICATION, child_rng, child_seed
from .bounds import (
    QueryFunctional,
    ThresholdSpec,
    bound_interval,
    threshold_from_spec,
)
from .data import ProblemData
from .errors import ConfigurationError
from .mode import SolverOptions, find_posterior_mode
from .posterior import PosteriorModel
from .prior import GaussianPriorSpec
from .sampler import effective_sample_size, mh_sample, posterior_quantile
from .sim import SyntheticScheme, sample_multinomial_dataset
from .stats import normal_cdf

_TERMINAL = ("optimal",)


@dataclass(frozen=True)
class IntervalRecord:
    """One two-sided bound with enough context to audit it."""

    lower: float
    upper: float
    mode_value: float
    status_lower: str
    status_upper: str
    description: str = ""

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def ok(self) -> bool:
        return self.status_lower in _TERMINAL and self.status_upper in _TERMINAL

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
            "mode_value": self.mode_value,
            "status_lower": self.status_lower,
            "status_upper": self.status_upper,
            "description": self.description,
        }


def _meta(t0: float) -> dict:
    return {
        "wall_seconds": round(time.perf_counter() - t0, 3),
        "backend": default_backend_name(),
        "version": __version__,
    }


def _bound_on_data(args) -> IntervalRecord:
    """Worker: bound one functional on one prepared dataset."""
    data, z, threshold, prior, opts, solver_seed = args
    model = PosteriorModel(data, prior)
    fn = QueryFunctional(z)
    res = bound_interval(model, fn, threshold, replace(opts, seed=int(solver_seed)))
    return IntervalRecord(
        lower=res.lower,
        upper=res.upper,
        mode_value=res.mode_value,
        status_lower=res.status_lower,
        status_upper=res.status_upper,
    )


def _run_parallel(tasks, threads: int) -> list[IntervalRecord]:
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_bound_on_data, tasks))
    return [_bound_on_data(t) for t in tasks]


def _count_failures(records) -> int:
    return sum(1 for rec in records if not rec.ok)


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationReport:
    intervals: tuple[IntervalRecord, ...]
    log_post_star: float
    log_c: float
    mode_p: list
    mode_p_tilde: list
    meta: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(rec.ok for rec in self.intervals)

    def to_dict(self) -> dict:
        return {
            "intervals": [rec.to_dict() for rec in self.intervals],
            "log_post_star": self.log_post_star,
            "log_c": self.log_c,
            "mode_p": self.mode_p,
            "mode_p_tilde": self.mode_p_tilde,
            "meta": dict(self.meta),
        }


def calibrate(
    data: ProblemData,
    prior: GaussianPriorSpec,
    functionals,
    threshold: ThresholdSpec,
    options: SolverOptions | None = None,
) -> CalibrationReport:
    """Bound every functional over one shared level set.

    The posterior maximum is located once and reused, so adding
    functionals costs only their direction solves.
    """
    if not functionals:
        raise ConfigurationError("need at least one functional to calibrate")
    t0 = time.perf_counter()
    opts = options or SolverOptions()
    model = PosteriorModel(data, prior)
    mode = find_posterior_mode(model, opts)
    log_c = threshold_from_spec(threshold, mode.log_post_star)
    records = []
    for fn in functionals:
        res = bound_interval(model, fn, threshold, opts, mode_result=mode)
        records.append(
            IntervalRecord(
                lower=res.lower,
                upper=res.upper,
                mode_value=res.mode_value,
                status_lower=res.status_lower,
                status_upper=res.status_upper,
                description=fn.description,
            )
        )
    return CalibrationReport(
        intervals=tuple(records),
        log_post_star=mode.log_post_star,
        log_c=log_c,
        mode_p=mode.p_star.tolist(),
        mode_p_tilde=mode.p_tilde_star.tolist(),
        meta=_meta(t0),
    )


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    truth: float
    n_reps: int
    coverage: float
    mean_width: float
    median_width: float
    lowers: list
    uppers: list
    failures: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "truth": self.truth,
            "n_reps": self.n_reps,
            "coverage": self.coverage,
            "mean_width": self.mean_width,
            "median_width": self.median_width,
            "lowers": list(self.lowers),
            "uppers": list(self.uppers),
            "failures": self.failures,
            "meta": dict(self.meta),
        }


def coverage_experiment(
    scheme: SyntheticScheme,
    z,
    threshold: ThresholdSpec,
    prior: GaussianPriorSpec,
    n_reps: int,
    seed: int,
    options: SolverOptions | None = None,
    threads: int = 1,
) -> CoverageReport:
    """Repeatedly sample data from known distributions and bound the truth.

    The reported coverage is the fraction of replications whose interval
    contains the known functional value of the real system.
    """
    if n_reps < 1:
        raise ConfigurationError("n_reps must be positive")
    t0 = time.perf_counter()
    opts = options or SolverOptions()
    z = np.asarray(z, dtype=float)
    truth = scheme.functional_truth(z)
    tasks = []
    for r in range(n_reps):
        rep_seed = child_seed(seed, KEY_REPLICATION, r)
        data = sample_multinomial_dataset(scheme, rep_seed)
        tasks.append((data, z, threshold, prior, opts, rep_seed))
    records = _run_parallel(tasks, threads)
    lowers = [rec.lower for rec in records]
    uppers = [rec.upper for rec in records]
    hits = sum(1 for rec in records if rec.contains(truth))
    widths = np.array([rec.width for rec in records])
    return CoverageReport(
        truth=truth,
        n_reps=n_reps,
        coverage=hits / n_reps,
        mean_width=float(widths.mean()),
        median_width=float(np.median(widths)),
        lowers=lowers,
        uppers=uppers,
        failures=_count_failures(records),
        meta=_meta(t0),
    )


# ---------------------------------------------------------------------------
# Width decay across sample sizes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    sizes: list
    median_widths: list
    slope: float
    lowers: dict
    uppers: dict
    truth: float
    failures: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "median_widths": list(self.median_widths),
            "slope": self.slope,
            "lowers": {str(k): list(v) for k, v in self.lowers.items()},
            "uppers": {str(k): list(v) for k, v in self.uppers.items()},
            "truth": self.truth,
            "failures": self.failures,
            "meta": dict(self.meta),
        }


def _nested_datasets(scheme: SyntheticScheme, sizes, rep_seed: int) -> dict:
    """One dataset per ladder size, sharing draws: size n counts the first
    n observations of one categorical sequence per (design, source)."""
    n_max = max(sizes)
    s, m = scheme.s, scheme.m
    seq_real = {}
    seq_sim = {}
    for j in range(s):
        if scheme.n_real[j] > 0:
            rng = child_rng(rep_seed, KEY_DATASET, j, 0)
            seq_real[j] = rng.choice(m, size=n_max, p=scheme.pi[j])
        if scheme.n_sim[j] > 0:
            rng = child_rng(rep_seed, KEY_DATASET, j, 1)
            seq_sim[j] = rng.choice(m, size=n_max, p=scheme.pi_tilde[j])
    out = {}
    for n in sizes:
        real = np.zeros((s, m), dtype=np.int64)
        sim = np.zeros((s, m), dtype=np.int64)
        for j in range(s):
            if j in seq_real:
                real[j] = np.bincount(seq_real[j][:n], minlength=m)
            if j in seq_sim:
                sim[j] = np.bincount(seq_sim[j][:n], minlength=m)
        out[n] = ProblemData(
            design_coords=scheme.design_coords, real_counts=real, sim_counts=sim
        )
    return out


def consistency_experiment(
    scheme: SyntheticScheme,
    z,
    threshold: ThresholdSpec,
    prior: GaussianPriorSpec,
    sizes,
    reps_per_size: int,
    seed: int,
    options: SolverOptions | None = None,
    threads: int = 1,
    nested: bool = True,
) -> ConsistencyReport:
    """Interval width as a function of the per-design sample size.

    Observed designs get ``n`` real and ``n`` simulated observations at
    ladder size ``n`` (zero rows in the scheme stay unobserved).  With
    ``nested=True`` (default) replication ``r`` draws one observation
    sequence and each ladder size counts a prefix of it, so intervals at
    growing sizes describe accumulating data.  The returned ``slope`` is
    the least-squares slope of log median width against log size;
    root-n concentration shows up as a slope near -1/2.
    """
    sizes = [int(n) for n in sizes]
    if len(sizes) < 2:
        raise ConfigurationError("need at least two ladder sizes")
    if any(n < 1 for n in sizes):
        raise ConfigurationError("ladder sizes must be positive")
    if reps_per_size < 1:
        raise ConfigurationError("reps_per_size must be positive")
    t0 = time.perf_counter()
    opts = options or SolverOptions()
    z = np.asarray(z, dtype=float)
    truth = scheme.functional_truth(z)
    tasks = {n: [] for n in sizes}
    for r in range(reps_per_size):
        rep_seed = child_seed(seed, KEY_REPLICATION, r)
        if nested:
            data_by_size = _nested_datasets(scheme, sizes, rep_seed)
        else:
            data_by_size = {
                n: sample_multinomial_dataset(
                    _scheme_at_size(scheme, n), child_seed(rep_seed, KEY_DATASET, n)
                )
                for n in sizes
            }
        for n in sizes:
            tasks[n].append((data_by_size[n], z, threshold, prior, opts, rep_seed))
    lowers: dict[int, list] = {}
    uppers: dict[int, list] = {}
    failures = 0
    for n in sizes:
        records = _run_parallel(tasks[n], threads)
        lowers[n] = [rec.lower for rec in records]
        uppers[n] = [rec.upper for rec in records]
        failures += _count_failures(records)
    med = [float(np.median(np.array(uppers[n]) - np.array(lowers[n]))) for n in sizes]
    slope = float(np.polyfit(np.log(sizes), np.log(med), 1)[0])
    return ConsistencyReport(
        sizes=sizes,
        median_widths=med,
        slope=slope,
        lowers=lowers,
        uppers=uppers,
        truth=truth,
        failures=failures,
        meta=_meta(t0),
    )


def _scheme_at_size(scheme: SyntheticScheme, n: int) -> SyntheticScheme:
    return SyntheticScheme(
        design_coords=scheme.design_coords,
        pi=scheme.pi,
        pi_tilde=scheme.pi_tilde,
        n_real=np.where(scheme.n_real > 0, n, 0),
        n_sim=np.where(scheme.n_sim > 0, n, 0),
    )


def containment_fraction(lowers_a, uppers_a, lowers_b, uppers_b, tol: float = 1e-9) -> float:
    """Fraction of aligned replications where interval b nests inside a."""
    la, ua = np.asarray(lowers_a), np.asarray(uppers_a)
    lb, ub = np.asarray(lowers_b), np.asarray(uppers_b)
    if not (la.shape == ua.shape == lb.shape == ub.shape):
        raise ConfigurationError("interval arrays must be aligned")
    inside = (lb >= la - tol) & (ub <= ua + tol)
    return float(np.mean(inside))


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankingReport:
    truth_low: float
    truth_high: float
    n_reps: int
    fraction_ordered: float
    failures: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "truth_low": self.truth_low,
            "truth_high": self.truth_high,
            "n_reps": self.n_reps,
            "fraction_ordered": self.fraction_ordered,
            "failures": self.failures,
            "meta": dict(self.meta),
        }


def ranking_experiment(
    scheme: SyntheticScheme,
    z_low,
    z_high,
    threshold: ThresholdSpec,
    prior: GaussianPriorSpec,
    n_reps: int,
    seed: int,
    options: SolverOptions | None = None,
    threads: int = 1,
) -> RankingReport:
    """How often two alternatives' intervals separate in the right order.

    ``z_low`` must have the smaller true value.  A replication counts as
    correctly ordered when the upper bound for ``z_low`` falls strictly
    below the lower bound for ``z_high`` — both intervals from the same
    dataset.
    """
    if n_reps < 1:
        raise ConfigurationError("n_reps must be positive")
    t0 = time.perf_counter()
    opts = options or SolverOptions()
    z_low = np.asarray(z_low, dtype=float)
    z_high = np.asarray(z_high, dtype=float)
    t_low = scheme.functional_truth(z_low)
    t_high = scheme.functional_truth(z_high)
    if not t_low < t_high:
        raise ConfigurationError(
            f"z_low must have the smaller true value (got {t_low} vs {t_high})"
        )
    tasks_low = []
    tasks_high = []
    for r in range(n_reps):
        rep_seed = child_seed(seed, KEY_REPLICATION, r)
        data = sample_multinomial_dataset(scheme, rep_seed)
        tasks_low.append((data, z_low, threshold, prior, opts, rep_seed))
        tasks_high.append((data, z_high, threshold, prior, opts, rep_seed))
    rows_low = _run_parallel(tasks_low, threads)
    rows_high = _run_parallel(tasks_high, threads)
    ordered = sum(1 for a, b in zip(rows_low, rows_high) if a.upper < b.lower)
    return RankingReport(
        truth_low=t_low,
        truth_high=t_high,
        n_reps=n_reps,
        fraction_ordered=ordered / n_reps,
        failures=_count_failures(rows_low) + _count_failures(rows_high),
        meta=_meta(t0),
    )


# ---------------------------------------------------------------------------
# Plugin estimate and sampler comparison
# ---------------------------------------------------------------------------


def plugin_estimate(data: ProblemData, z) -> float:
    """Empirical value sum z * (real frequencies); unobserved rows contribute 0."""
    z = np.asarray(z, dtype=float)
    if z.shape != (data.s, data.m):
        raise ConfigurationError("functional shape does not match the data")
    totals = data.real_totals.astype(float)
    value = 0.0
    for j in range(data.s):
        if totals[j] > 0:
            value += float(z[j] @ (data.real_counts[j] / totals[j]))
    return value


@dataclass(frozen=True)
class SamplerComparison:
    interval_lower: float
    interval_upper: float
    chain_lower: float
    chain_upper: float
    chain_ess: float
    acceptance_rate: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "interval_lower": self.interval_lower,
            "interval_upper": self.interval_upper,
            "chain_lower": self.chain_lower,
            "chain_upper": self.chain_upper,
            "chain_ess": self.chain_ess,
            "acceptance_rate": self.acceptance_rate,
            "meta": dict(self.meta),
        }


def compare_with_sampler(
    data: ProblemData,
    prior: GaussianPriorSpec,
    functional: QueryFunctional,
    threshold: ThresholdSpec,
    seed: int,
    n_draws: int = 4000,
    burn_in: int = 1000,
    step_scale: float = 0.1,
    options: SolverOptions | None = None,
    backend=None,
) -> SamplerComparison:
    """Level-set bounds next to central posterior quantiles from sampling.

    The two summaries answer related but different questions, so they
    need not coincide; the sampler serves as an independent baseline.
    """
    t0 = time.perf_counter()
    opts = options or SolverOptions()
    model = PosteriorModel(data, prior)
    res = bound_interval(model, functional, threshold, opts)
    chain = mh_sample(
        model,
        n_draws,
        child_seed(seed, KEY_CHAIN),
        burn_in=burn_in,
        step_scale=step_scale,
        backend=backend,
    )
    if threshold.q is not None:
        q_hi = max(threshold.q, 1.0 - threshold.q)
    else:
        q_hi = normal_cdf(threshold.effective_ell)
    q_lo = 1.0 - q_hi
    vals = chain.functional_values(functional.z)
    return SamplerComparison(
        interval_lower=res.lower,
        interval_upper=res.upper,
        chain_lower=posterior_quantile(chain, functional.z, q_lo),
        chain_upper=posterior_quantile(chain, functional.z, q_hi),
        chain_ess=float(effective_sample_size(vals)),
        acceptance_rate=chain.acceptance_rate,
        meta=_meta(t0),
    )
