"""Calibration bounds for inexact stochastic simulation models.

A simulation model of a real system predicts the distribution of a
discrete outcome at each design point; the real system follows a
different, unknown distribution.  This package represents the mismatch
as per-outcome discrepancy ratios, scores joint states of (discrepancy,
model distribution) against both data sources plus smoothing penalties,
and turns level sets of that score into confidence intervals for linear
functionals of the real outcome distributions.  It ships a deterministic
interior-point bound solver, a random-walk sampler baseline, discrete-
event call-center simulators for generating test beds, and repeated-
sampling experiment drivers, all behind one CLI.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundResult,
    DirectionOutcome,
    QueryFunctional,
    ThresholdSpec,
    bound_interval,
    brute_force_bound,
    convexity_probe,
    simplex_grid,
    solve_bound,
    solve_bound_fixed_sim,
    threshold_from_spec,
)
from .config import RunConfig
from .data import ProblemData
from .errors import (
    ConfigurationError,
    DataFormatError,
    InfeasibleRegionError,
    SimcalError,
)
from .experiments import (
    CalibrationReport,
    ConsistencyReport,
    CoverageReport,
    IntervalRecord,
    RankingReport,
    SamplerComparison,
    calibrate,
    compare_with_sampler,
    consistency_experiment,
    containment_fraction,
    coverage_experiment,
    plugin_estimate,
    ranking_experiment,
)
from .io import (
    load_problem_npz,
    read_counts_csv,
    save_problem_npz,
    write_coords_csv,
    write_counts_csv,
)
from .mode import ModeResult, SolverOptions, find_posterior_mode
from .posterior import PosteriorModel
from .prior import GaussianPriorSpec
from .sampler import Chain, chain_to_csv, effective_sample_size, mh_sample, posterior_quantile
from .sim import (
    CallCenterConfig,
    SyntheticScheme,
    TrueModelConfig,
    bin_outcomes,
    lognormal_rate_params,
    mm1_theoretical_wait,
    pooled_mean_wait,
    replication_mean_waits,
    sample_multinomial_dataset,
    simulate_call_center,
    simulate_true_system,
    simulator_dataset,
)

__all__ = [
    "__version__",
    "BoundResult",
    "CalibrationReport",
    "CallCenterConfig",
    "Chain",
    "ConfigurationError",
    "ConsistencyReport",
    "CoverageReport",
    "DataFormatError",
    "DirectionOutcome",
    "GaussianPriorSpec",
    "InfeasibleRegionError",
    "IntervalRecord",
    "ModeResult",
    "PosteriorModel",
    "ProblemData",
    "QueryFunctional",
    "RankingReport",
    "RunConfig",
    "SamplerComparison",
    "SimcalError",
    "SolverOptions",
    "SyntheticScheme",
    "ThresholdSpec",
    "TrueModelConfig",
    "bin_outcomes",
    "bound_interval",
    "brute_force_bound",
    "calibrate",
    "chain_to_csv",
    "compare_with_sampler",
    "consistency_experiment",
    "containment_fraction",
    "convexity_probe",
    "coverage_experiment",
    "effective_sample_size",
    "find_posterior_mode",
    "lognormal_rate_params",
    "load_problem_npz",
    "mh_sample",
    "mm1_theoretical_wait",
    "plugin_estimate",
    "pooled_mean_wait",
    "posterior_quantile",
    "ranking_experiment",
    "read_counts_csv",
    "replication_mean_waits",
    "sample_multinomial_dataset",
    "save_problem_npz",
    "simplex_grid",
    "simulate_call_center",
    "simulate_true_system",
    "simulator_dataset",
    "solve_bound",
    "solve_bound_fixed_sim",
    "threshold_from_spec",
    "write_coords_csv",
    "write_counts_csv",
]
