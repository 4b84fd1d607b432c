"""Round trips and validation for the CSV and npz dataset formats."""

import numpy as np
import pytest

from simcal.data import ProblemData
from simcal.errors import DataFormatError
from simcal.io import (
    load_problem_npz,
    read_counts_csv,
    save_problem_npz,
    write_coords_csv,
    write_counts_csv,
)


@pytest.fixture
def sample_data():
    return ProblemData(
        design_coords=np.array([0.0, 2.5, 7.0]),
        real_counts=np.array([[3, 1, 0], [0, 0, 0], [5, 2, 9]]),
        sim_counts=np.array([[50, 30, 20], [10, 20, 5], [7, 7, 7]]),
    )


def test_csv_roundtrip(tmp_path, sample_data):
    counts = tmp_path / "counts.csv"
    coords = tmp_path / "coords.csv"
    write_counts_csv(counts, sample_data)
    write_coords_csv(coords, sample_data)
    back = read_counts_csv(counts, coords)
    assert np.array_equal(back.real_counts, sample_data.real_counts)
    assert np.array_equal(back.sim_counts, sample_data.sim_counts)
    assert np.array_equal(back.design_coords, sample_data.design_coords)


def test_csv_writes_zero_cells_explicitly(tmp_path, sample_data):
    counts = tmp_path / "counts.csv"
    write_counts_csv(counts, sample_data)
    lines = counts.read_text().strip().splitlines()
    # header + one row per (source, design, outcome) cell
    assert len(lines) == 1 + 2 * sample_data.s * sample_data.m
    assert lines[0] == "design_id,outcome_id,count,source"


def test_csv_without_coords_defaults_to_ids(tmp_path, sample_data):
    counts = tmp_path / "counts.csv"
    write_counts_csv(counts, sample_data)
    back = read_counts_csv(counts)
    assert np.array_equal(back.design_coords, np.array([0.0, 1.0, 2.0]))


def test_csv_missing_cells_default_to_zero(tmp_path):
    path = tmp_path / "sparse.csv"
    path.write_text(
        "design_id,outcome_id,count,source\n"
        "0,1,4,real\n"
        "0,0,9,sim\n"
        "0,1,6,sim\n"
    )
    data = read_counts_csv(path)
    assert np.array_equal(data.real_counts, [[0, 4]])
    assert np.array_equal(data.sim_counts, [[9, 6]])


def test_csv_blank_lines_skipped(tmp_path):
    path = tmp_path / "blank.csv"
    path.write_text(
        "design_id,outcome_id,count,source\n\n0,0,1,real\n0,1,4,real\n\n0,0,2,sim\n0,1,3,sim\n"
    )
    data = read_counts_csv(path)
    assert np.array_equal(data.real_counts, [[1, 4]])
    assert np.array_equal(data.sim_counts, [[2, 3]])


@pytest.mark.parametrize(
    "body,fragment",
    [
        ("design,outcome,count,source\n0,0,1,real\n", "expected header"),
        ("design_id,outcome_id,count,source\n0,0,1\n", "expected 4 fields"),
        ("design_id,outcome_id,count,source\n0,0,one,real\n", "invalid literal"),
        ("design_id,outcome_id,count,source\n0,0,1,survey\n", "source must be one of"),
        ("design_id,outcome_id,count,source\n-1,0,1,real\n", "nonnegative"),
        ("design_id,outcome_id,count,source\n0,0,-3,real\n", "counts must be nonnegative"),
        (
            "design_id,outcome_id,count,source\n0,0,3,real\n0,0,4,real\n",
            "duplicate cell",
        ),
        ("design_id,outcome_id,count,source\n", "no data rows"),
        (
            "design_id,outcome_id,count,source\n0,0,1,real\n2,0,1,real\n",
            "contiguous from 0",
        ),
    ],
)
def test_csv_rejects_malformed(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataFormatError, match=fragment.replace("(", "\\(")):
        read_counts_csv(path)


def test_csv_error_reports_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("design_id,outcome_id,count,source\n0,0,1,real\n0,0,x,real\n")
    with pytest.raises(DataFormatError, match=":3:"):
        read_counts_csv(path)


def test_coords_duplicate_rejected(tmp_path, sample_data):
    counts = tmp_path / "counts.csv"
    write_counts_csv(counts, sample_data)
    coords = tmp_path / "coords.csv"
    coords.write_text("design_id,coord\n0,1.0\n0,2.0\n1,3.0\n2,4.0\n")
    with pytest.raises(DataFormatError, match="duplicate design id"):
        read_counts_csv(counts, coords)


def test_coords_must_cover_all_designs(tmp_path, sample_data):
    counts = tmp_path / "counts.csv"
    write_counts_csv(counts, sample_data)
    coords = tmp_path / "coords.csv"
    coords.write_text("design_id,coord\n0,1.0\n1,3.0\n")
    with pytest.raises(DataFormatError):
        read_counts_csv(counts, coords)


def test_coords_bad_header(tmp_path, sample_data):
    counts = tmp_path / "counts.csv"
    write_counts_csv(counts, sample_data)
    coords = tmp_path / "coords.csv"
    coords.write_text("id,x\n0,1.0\n1,2.0\n2,3.0\n")
    with pytest.raises(DataFormatError, match="design_id,coord"):
        read_counts_csv(counts, coords)


def test_npz_roundtrip(tmp_path, sample_data):
    path = tmp_path / "prob.npz"
    save_problem_npz(path, sample_data)
    back = load_problem_npz(path)
    assert np.array_equal(back.real_counts, sample_data.real_counts)
    assert np.array_equal(back.sim_counts, sample_data.sim_counts)
    assert np.array_equal(back.design_coords, sample_data.design_coords)


def test_npz_missing_arrays(tmp_path):
    path = tmp_path / "partial.npz"
    np.savez(path, real_counts=np.array([[1, 2]]))
    with pytest.raises(DataFormatError, match="missing arrays"):
        load_problem_npz(path)
