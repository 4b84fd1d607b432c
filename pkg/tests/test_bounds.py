"""Level-set bounds: frozen oracles, brute-force agreement, guards."""

import math

import numpy as np
import pytest

from simcal.bounds import (
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
from simcal.data import ProblemData
from simcal.errors import ConfigurationError, InfeasibleRegionError
from simcal.mode import SolverOptions, find_posterior_mode
from simcal.posterior import PosteriorModel
from simcal.prior import GaussianPriorSpec


def small_model():
    """1 design x 2 outcomes with identity prior; fully scannable."""
    data = ProblemData(
        design_coords=np.array([0.0]),
        real_counts=np.array([[3, 1]]),
        sim_counts=np.array([[50, 50]]),
    )
    prior = GaussianPriorSpec(
        lambda_d=0.25, lambda_p=0.01, R_d=np.eye(2), R_p=np.eye(2), jitter=0.0
    )
    return PosteriorModel(data, prior)


class TestThreshold:
    def test_frozen_value_at_975(self):
        # ell = Phi^-1(0.975); the drop below the maximum is ell^2 / 2.
        got = threshold_from_spec(ThresholdSpec(q=0.975), 0.0)
        assert got == pytest.approx(-1.9207294103470627, abs=1e-6)

    def test_level_and_radius_agree(self):
        a = threshold_from_spec(ThresholdSpec(q=0.975), -3.0)
        b = threshold_from_spec(ThresholdSpec(ell=1.959963984540054), -3.0)
        assert a == pytest.approx(b, abs=1e-12)

    def test_tail_symmetry(self):
        lo = ThresholdSpec(q=0.025).effective_ell
        hi = ThresholdSpec(q=0.975).effective_ell
        assert lo == pytest.approx(hi, rel=1e-12)

    def test_zero_radius_keeps_maximum(self):
        assert threshold_from_spec(ThresholdSpec(ell=0.0), -7.5) == -7.5

    def test_exactly_one_spec_field(self):
        with pytest.raises(ConfigurationError):
            ThresholdSpec()
        with pytest.raises(ConfigurationError):
            ThresholdSpec(q=0.9, ell=1.0)
        with pytest.raises(ConfigurationError):
            ThresholdSpec(q=1.0)
        with pytest.raises(ConfigurationError):
            ThresholdSpec(ell=-0.1)


class TestQueryFunctional:
    def test_indicator(self):
        f = QueryFunctional.indicator(2, 3, design=1, outcome=2)
        assert f.z.shape == (2, 3)
        assert f.z[1, 2] == 1.0
        assert f.z.sum() == 1.0

    def test_bin_values(self):
        f = QueryFunctional.bin_values(2, 3, 0, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(f.z[0], [0.0, 0.5, 1.0])
        np.testing.assert_allclose(f.z[1], 0.0)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            QueryFunctional(np.ones(3))
        with pytest.raises(ConfigurationError):
            QueryFunctional(np.array([[np.inf, 0.0]]))
        with pytest.raises(ConfigurationError):
            QueryFunctional.bin_values(1, 3, 0, [1.0, 2.0])


class TestSmallInstanceAgainstBruteForce:
    """The optimizer must match an exhaustive grid scan on a tiny model."""

    @pytest.mark.parametrize("direction", ["min", "max"])
    def test_matches_grid(self, direction):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        opts = SolverOptions(seed=0)
        mode = find_posterior_mode(model, opts)
        log_c = threshold_from_spec(ThresholdSpec(ell=1.0), mode.log_post_star)
        out = solve_bound(model, z, log_c, direction, opts, mode)
        ref = brute_force_bound(model, z, log_c, direction, grid_step=0.002)
        assert out.status == "optimal"
        assert out.value == pytest.approx(ref, abs=5e-3)
        assert out.feasibility_residual < 1e-8

    def test_interval_brackets_mode(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        res = bound_interval(model, z, ThresholdSpec(q=0.975), SolverOptions(seed=0))
        assert res.lower <= res.mode_value <= res.upper
        assert res.width > 0.0
        d = res.to_dict()
        assert set(d) >= {"lower", "upper", "width", "log_c", "mode_value"}

    def test_wider_level_widens_interval(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        narrow = bound_interval(model, z, ThresholdSpec(ell=0.5), SolverOptions(seed=0))
        wide = bound_interval(model, z, ThresholdSpec(ell=2.0), SolverOptions(seed=0))
        assert wide.lower <= narrow.lower + 1e-9
        assert wide.upper >= narrow.upper - 1e-9
        assert wide.width > narrow.width

    def test_determinism(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        a = bound_interval(model, z, ThresholdSpec(q=0.975), SolverOptions(seed=5))
        b = bound_interval(model, z, ThresholdSpec(q=0.975), SolverOptions(seed=5))
        assert a.lower == b.lower and a.upper == b.upper


class TestDegenerateCases:
    def test_zero_radius_collapses_to_mode(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        opts = SolverOptions(seed=0)
        res = bound_interval(model, z, ThresholdSpec(ell=0.0), opts)
        assert res.lower == pytest.approx(res.mode_value, abs=1e-9)
        assert res.upper == pytest.approx(res.mode_value, abs=1e-9)

    def test_constant_functional_collapses(self):
        # sum z d q is pinned by the constraint sum d q = 1 when z is
        # constant within each design row.
        model = small_model()
        z = QueryFunctional(np.array([[0.7, 0.7]]))
        res = bound_interval(model, z, ThresholdSpec(q=0.975), SolverOptions(seed=0))
        assert res.width <= 1e-9
        assert res.lower == pytest.approx(0.7, abs=1e-9)

    def test_infeasible_level(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        opts = SolverOptions(seed=0)
        mode = find_posterior_mode(model, opts)
        out = solve_bound(model, z, mode.log_post_star + 1.0, "min", opts, mode)
        assert out.status == "infeasible"
        assert math.isnan(out.value)

    def test_direction_validation(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        with pytest.raises(ConfigurationError):
            solve_bound(model, z, -10.0, "up")

    def test_shape_mismatch(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0, 0.0]]))
        with pytest.raises(ConfigurationError):
            solve_bound(model, z, -10.0, "min")


class TestMultiDesign:
    def test_correlated_prior_interval(self):
        data = ProblemData(
            design_coords=np.array([0.0, 1.0]),
            real_counts=np.array([[12, 30, 8], [20, 15, 15]]),
            sim_counts=np.array([[40, 35, 25], [30, 40, 30]]),
        )
        prior = GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01)
        model = PosteriorModel(data, prior)
        z = QueryFunctional.bin_values(2, 3, 0, [0.0, 0.5, 1.0])
        res = bound_interval(model, z, ThresholdSpec(q=0.975), SolverOptions(seed=3))
        assert res.status_lower == "optimal" and res.status_upper == "optimal"
        assert res.lower < res.mode_value < res.upper
        assert 0.0 <= res.lower and res.upper <= 1.0  # payoffs lie in [0, 1]
        assert res.feasibility_residual < 1e-8


class TestFixedSimVariant:
    def test_against_dense_grid(self):
        pi = np.array([0.2, 0.3, 0.5])
        n = np.array([2.0, 3.0, 5.0])
        z = QueryFunctional(np.array([[0.0, 1.0, 2.0]]))
        prior = GaussianPriorSpec(
            lambda_d=0.25, lambda_p=0.01, R_d=np.eye(3), R_p=np.eye(3), jitter=0.0
        )
        res = solve_bound_fixed_sim(pi, n, z, ThresholdSpec(ell=1.96), prior)

        # Oracle: scan u = d * pi over a fine simplex lattice.
        base = simplex_grid(3, 0.002)
        d = base / pi
        v = d - 1.0
        phi = -0.25 * np.einsum("ga,ga->g", v, v)
        logs = np.where(base > 0, np.log(np.where(base > 0, base, 1.0)), -np.inf)
        phi = phi + logs @ n - float(n @ np.log(pi))
        zeta = base @ z.z[0]
        feas = phi >= res.log_c
        assert feas.sum() > 0
        assert res.lower == pytest.approx(zeta[feas].min(), abs=1e-2)
        assert res.upper == pytest.approx(zeta[feas].max(), abs=1e-2)

    def test_mode_at_empirical_match(self):
        # When real frequencies equal the simulated distribution the mode
        # of the discrepancy is the constant table 1.
        pi = np.array([0.2, 0.3, 0.5])
        n = np.array([2.0, 3.0, 5.0])
        z = QueryFunctional(np.array([[0.0, 1.0, 2.0]]))
        prior = GaussianPriorSpec(
            lambda_d=0.25, lambda_p=0.01, R_d=np.eye(3), R_p=np.eye(3), jitter=0.0
        )
        res = solve_bound_fixed_sim(pi, n, z, ThresholdSpec(ell=1.96), prior)
        assert res.mode_value == pytest.approx(float(z.z[0] @ pi), abs=1e-6)
        assert res.lower < res.mode_value < res.upper

    def test_rejects_zero_cells(self):
        prior = GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01)
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        with pytest.raises(ConfigurationError):
            solve_bound_fixed_sim(
                np.array([1.0, 0.0]), np.array([1.0, 1.0]), z, ThresholdSpec(ell=1.0), prior
            )

    def test_rejects_shape_mismatch(self):
        prior = GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01)
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        with pytest.raises(ConfigurationError):
            solve_bound_fixed_sim(
                np.array([0.5, 0.5]), np.array([1.0, 1.0, 1.0]), z, ThresholdSpec(ell=1.0), prior
            )


class TestSimplexGrid:
    def test_counts_and_sums(self):
        g = simplex_grid(3, 0.1)
        # C(10 + 2, 2) = 66 compositions of 10 into 3 parts.
        assert g.shape == (66, 3)
        np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-12)
        assert np.unique(g, axis=0).shape[0] == g.shape[0]

    def test_step_must_divide_one(self):
        with pytest.raises(ConfigurationError):
            simplex_grid(2, 0.003)


class TestBruteForceGuards:
    def test_size_guard(self):
        data = ProblemData(
            design_coords=np.arange(4, dtype=float),
            real_counts=np.ones((4, 2), dtype=int),
            sim_counts=np.ones((4, 2), dtype=int),
        )
        model = PosteriorModel(data, GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01))
        z = QueryFunctional(np.zeros((4, 2)))
        with pytest.raises(ConfigurationError):
            brute_force_bound(model, z, -10.0, "min")

    def test_cap_guard(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        with pytest.raises(ConfigurationError):
            brute_force_bound(model, z, -10.0, "min", grid_step=0.002, max_grid_points=10)

    def test_empty_level_set(self):
        model = small_model()
        z = QueryFunctional(np.array([[1.0, 0.0]]))
        with pytest.raises(InfeasibleRegionError):
            brute_force_bound(model, z, 1e6, "min", grid_step=0.01)


class TestConvexityProbe:
    def test_zero_pairs_is_unit(self):
        model = small_model()
        assert convexity_probe(model, -1e9, 0, seed=1) == 1.0

    def test_negative_pairs_rejected(self):
        model = small_model()
        with pytest.raises(ConfigurationError):
            convexity_probe(model, -1e9, -1, seed=1)

    def test_unreachable_level(self):
        model = small_model()
        with pytest.raises(InfeasibleRegionError):
            convexity_probe(model, 1e9, 10, seed=1, n_draws=200, burn_in=100)

    def test_probe_fraction_in_unit_interval(self):
        model = small_model()
        mode = find_posterior_mode(model, SolverOptions(seed=0))
        log_c = threshold_from_spec(ThresholdSpec(q=0.975), mode.log_post_star)
        frac = convexity_probe(model, log_c, 50, seed=2, n_draws=600, burn_in=200)
        assert 0.0 <= frac <= 1.0
        assert frac >= 0.9  # near-product posteriors are close to convex
