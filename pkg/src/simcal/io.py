"""Reading and writing count datasets.

The interchange format is a long-form CSV with one row per (design,
outcome, source) cell::

    design_id,outcome_id,count,source
    0,0,413,sim
    0,1,66,sim
    0,0,333,real

``source`` is ``real`` or ``sim``.  Cells may be omitted (they default
to zero) but may not repeat.  Design coordinates travel in a second
file mapping ``design_id`` to a scalar ``coord``; without one, the
design ids themselves serve as coordinates.  ``.npz`` round-tripping of
whole problems is also provided for programmatic use.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import ProblemData
from .errors import DataFormatError

_SOURCES = ("real", "sim")


def write_counts_csv(path, data: ProblemData) -> None:
    """Write both count tables in long form (all cells, zeros included)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design_id", "outcome_id", "count", "source"])
        for source, table in (("real", data.real_counts), ("sim", data.sim_counts)):
            for j in range(data.s):
                for i in range(data.m):
                    writer.writerow([j, i, int(table[j, i]), source])


def write_coords_csv(path, data: ProblemData) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design_id", "coord"])
        for j, c in enumerate(data.design_coords):
            writer.writerow([j, repr(float(c))])


def read_counts_csv(counts_path, coords_path=None) -> ProblemData:
    """Parse the long-form CSV (plus optional coordinates) into a problem."""
    cells: dict[tuple[str, int, int], int] = {}
    design_ids: set[int] = set()
    max_outcome = -1
    with open(counts_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != [
            "design_id",
            "outcome_id",
            "count",
            "source",
        ]:
            raise DataFormatError(
                f"{counts_path}: expected header design_id,outcome_id,count,source"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) < 4:
                raise DataFormatError(f"{counts_path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                j = int(row[0])
                i = int(row[1])
                count = int(row[2])
            except ValueError as exc:
                raise DataFormatError(f"{counts_path}:{lineno}: {exc}") from None
            source = row[3].strip()
            if source not in _SOURCES:
                raise DataFormatError(
                    f"{counts_path}:{lineno}: source must be one of {_SOURCES}, got {source!r}"
                )
            if j < 0 or i < 0:
                raise DataFormatError(f"{counts_path}:{lineno}: ids must be nonnegative")
            if count < 0:
                raise DataFormatError(f"{counts_path}:{lineno}: counts must be nonnegative")
            key = (source, j, i)
            if key in cells:
                raise DataFormatError(
                    f"{counts_path}:{lineno}: duplicate cell {key} (first value {cells[key]})"
                )
            cells[key] = count
            design_ids.add(j)
            max_outcome = max(max_outcome, i)
    if not cells:
        raise DataFormatError(f"{counts_path}: no data rows")
    ids = sorted(design_ids)
    if ids != list(range(len(ids))):
        raise DataFormatError(
            f"{counts_path}: design ids must be contiguous from 0, got {ids}"
        )
    s = len(ids)
    m = max_outcome + 1
    real = np.zeros((s, m), dtype=np.int64)
    sim = np.zeros((s, m), dtype=np.int64)
    for (source, j, i), count in cells.items():
        (real if source == "real" else sim)[j, i] = count

    if coords_path is not None:
        coords = _read_coords(coords_path, s)
    else:
        coords = np.asarray(ids, dtype=float)
    return ProblemData(design_coords=coords, real_counts=real, sim_counts=sim)


def _read_coords(path, s: int) -> np.ndarray:
    seen: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["design_id", "coord"]:
            raise DataFormatError(f"{path}: expected header design_id,coord")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            try:
                j = int(row[0])
                c = float(row[1])
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if j in seen:
                raise DataFormatError(f"{path}:{lineno}: duplicate design id {j}")
            seen[j] = c
    if sorted(seen) != list(range(s)):
        raise DataFormatError(
            f"{path}: coordinate ids must cover designs 0..{s - 1} exactly"
        )
    return np.array([seen[j] for j in range(s)], dtype=float)


def save_problem_npz(path, data: ProblemData) -> None:
    np.savez(
        path,
        design_coords=data.design_coords,
        real_counts=data.real_counts,
        sim_counts=data.sim_counts,
    )


def load_problem_npz(path) -> ProblemData:
    path = Path(path)
    with np.load(path) as archive:
        missing = {"design_coords", "real_counts", "sim_counts"} - set(archive.files)
        if missing:
            raise DataFormatError(f"{path}: missing arrays {sorted(missing)}")
        return ProblemData(
            design_coords=archive["design_coords"],
            real_counts=archive["real_counts"],
            sim_counts=archive["sim_counts"],
        )
