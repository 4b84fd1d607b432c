import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcal.data import (
    DiscrepancyTable,
    ProbTable,
    ProblemData,
    validate_discrepancy,
    validate_distribution,
)
from simcal.errors import ConfigurationError, DataFormatError


class TestValidateDistribution:
    def test_valid_rows(self):
        assert validate_distribution(np.array([[0.3, 0.7], [0.5, 0.5]]))

    def test_row_sum_violation(self):
        assert not validate_distribution(np.array([[0.3, 0.6]]))

    def test_negative_entry(self):
        assert not validate_distribution(np.array([[-0.1, 1.1]]))

    def test_within_tolerance(self):
        assert validate_distribution(np.array([[0.5, 0.5 + 5e-10]]))
        assert not validate_distribution(np.array([[0.5, 0.5 + 5e-9]]))

    def test_one_dimensional_input(self):
        assert validate_distribution(np.array([0.25, 0.75]))

    @given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_normalized_positive_rows_always_pass(self, m, seed):
        rng = np.random.default_rng(seed)
        row = rng.random(m) + 1e-3
        row = row / row.sum()
        assert validate_distribution(row[None, :])


class TestValidateDiscrepancy:
    def test_valid_pair(self):
        q = np.array([[0.5, 0.5]])
        d = np.array([[1.5, 0.5]])
        assert validate_discrepancy(d, q)

    def test_mixture_violation(self):
        q = np.array([[0.5, 0.5]])
        d = np.array([[1.5, 0.6]])
        assert not validate_discrepancy(d, q)

    def test_negative_factor(self):
        q = np.array([[0.5, 0.5]])
        d = np.array([[2.1, -0.1]])
        assert not validate_discrepancy(d, q)

    def test_degenerate_ratio_allowed_on_null_cell(self):
        # A zero-probability cell may carry any nonnegative factor.
        q = np.array([[1.0, 0.0]])
        d = np.array([[1.0, 7.0]])
        assert validate_discrepancy(d, q)

    @given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_ratio_construction_always_valid(self, m, seed):
        rng = np.random.default_rng(seed)
        q = rng.random(m) + 1e-3
        q = q / q.sum()
        p = rng.random(m) + 1e-3
        p = p / p.sum()
        d = p / q
        assert validate_discrepancy(d[None, :], q[None, :])


class TestProblemData:
    def test_roundtrip_and_totals(self):
        data = ProblemData(
            design_coords=[6.0, 7.0],
            real_counts=[[3, 1, 0], [2, 2, 2]],
            sim_counts=[[10, 5, 5], [5, 10, 5]],
        )
        assert data.s == 2
        assert data.m == 3
        assert data.real_totals.tolist() == [4, 6]
        assert data.sim_totals.tolist() == [20, 20]

    def test_negative_counts_rejected(self):
        with pytest.raises(DataFormatError):
            ProblemData([0.0], [[-1, 2]], [[1, 1]])

    def test_fractional_counts_rejected(self):
        with pytest.raises(DataFormatError):
            ProblemData([0.0], [[1.5, 2.0]], [[1, 1]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataFormatError):
            ProblemData([0.0], [[1, 2]], [[1, 1, 1]])

    def test_duplicate_coords_rejected(self):
        with pytest.raises(DataFormatError):
            ProblemData([1.0, 1.0], [[1, 2], [1, 2]], [[1, 1], [1, 1]])

    def test_zero_rows_allowed(self):
        # Designs without real observations are a core use case.
        data = ProblemData([5.0, 6.0], [[0, 0], [3, 4]], [[10, 10], [10, 10]])
        assert data.real_totals.tolist() == [0, 7]


class TestTables:
    def test_prob_table_accepts_valid(self):
        t = ProbTable(np.array([[0.2, 0.8]]))
        assert t.s == 1 and t.m == 2

    def test_prob_table_rejects_invalid(self):
        with pytest.raises(ConfigurationError):
            ProbTable(np.array([[0.2, 0.7]]))

    def test_discrepancy_table_against_companion(self):
        q = ProbTable(np.array([[0.5, 0.5]]))
        DiscrepancyTable(np.array([[2.0, 0.0]]), companion=q)
        with pytest.raises(ConfigurationError):
            DiscrepancyTable(np.array([[2.0, 0.5]]), companion=q)

    def test_discrepancy_table_rejects_negative(self):
        with pytest.raises(ConfigurationError):
            DiscrepancyTable(np.array([[-0.5, 1.5]]))
