"""Declarative run configuration.

A run is described by one JSON document with independent blocks; each
command uses the blocks it needs and ignores the rest.  Every block is
validated against its known keys so that typos fail loudly rather than
silently falling back to defaults.

Example::

    {
      "schema_version": 1,
      "data": {"counts_csv": "counts.csv", "coords_csv": "coords.csv"},
      "prior": {"lambda_d": 0.25, "lambda_p": 0.01,
                 "rho_design": 0.75, "rho_outcome": 0.75},
      "threshold": {"q": 0.975},
      "functionals": [{"type": "indicator", "design": 0, "outcome": 3}],
      "solver": {"seed": 0, "restarts": 5}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import QueryFunctional, ThresholdSpec
from .data import ProblemData
from .errors import ConfigurationError
from .io import load_problem_npz, read_counts_csv
from .mode import SolverOptions
from .prior import GaussianPriorSpec
from .sim import CallCenterConfig, TrueModelConfig

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version",
    "data",
    "prior",
    "threshold",
    "functionals",
    "solver",
    "sim",
    "sampler",
    "experiment",
    "output",
}
_PRIOR_KEYS = {"lambda_d", "lambda_p", "rho_design", "rho_outcome", "jitter"}
_THRESHOLD_KEYS = {"q", "ell"}
_SOLVER_KEYS = {
    "max_iterations",
    "gradient_tolerance",
    "step_rule",
    "initial_step",
    "restarts",
    "seed",
    "interior_floor",
}
_DATA_KEYS = {"counts_csv", "coords_csv", "npz"}
_SAMPLER_KEYS = {"n_draws", "burn_in", "step_scale", "seed", "adapt"}
_SIM_KEYS = {"model", "true", "designs", "real_designs", "sim_reps", "real_reps"}


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {sorted(unknown)} in {where}; allowed: {sorted(allowed)}"
        )


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration document plus its base directory for paths."""

    raw: dict
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        if not isinstance(self.raw, dict):
            raise ConfigurationError("configuration root must be a JSON object")
        _check_keys(self.raw, _TOP_KEYS, "configuration root")
        version = self.raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema_version {version!r} (this build reads {SCHEMA_VERSION})"
            )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read configuration: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        return cls(raw=raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "RunConfig":
        return cls(raw=raw, base_dir=Path(base_dir))

    # -- block accessors -------------------------------------------------

    def _block(self, name: str, required: bool) -> dict:
        block = self.raw.get(name)
        if block is None:
            if required:
                raise ConfigurationError(f"configuration needs a '{name}' block")
            return {}
        if not isinstance(block, dict):
            raise ConfigurationError(f"'{name}' must be a JSON object")
        return block

    def build_prior(self) -> GaussianPriorSpec:
        block = self._block("prior", required=True)
        _check_keys(block, _PRIOR_KEYS, "'prior'")
        if "lambda_d" not in block or "lambda_p" not in block:
            raise ConfigurationError("'prior' needs lambda_d and lambda_p")
        return GaussianPriorSpec(**block)

    def build_threshold(self) -> ThresholdSpec:
        block = self._block("threshold", required=True)
        _check_keys(block, _THRESHOLD_KEYS, "'threshold'")
        return ThresholdSpec(**block)

    def build_solver_options(self, seed_override=None) -> SolverOptions:
        block = dict(self._block("solver", required=False))
        _check_keys(block, _SOLVER_KEYS, "'solver'")
        if seed_override is not None:
            block["seed"] = int(seed_override)
        return SolverOptions(**block)

    def build_functionals(self, s: int, m: int) -> list[QueryFunctional]:
        entries = self.raw.get("functionals")
        if not entries:
            raise ConfigurationError("configuration needs a non-empty 'functionals' list")
        if not isinstance(entries, list):
            raise ConfigurationError("'functionals' must be a list")
        out = []
        for k, entry in enumerate(entries):
            where = f"functionals[{k}]"
            if not isinstance(entry, dict) or "type" not in entry:
                raise ConfigurationError(f"{where} must be an object with a 'type'")
            kind = entry["type"]
            if kind == "indicator":
                _check_keys(entry, {"type", "design", "outcome"}, where)
                out.append(
                    QueryFunctional.indicator(
                        s, m, design=int(entry["design"]), outcome=int(entry["outcome"])
                    )
                )
            elif kind == "bin_values":
                _check_keys(entry, {"type", "design", "values"}, where)
                out.append(
                    QueryFunctional.bin_values(
                        s, m, design=int(entry["design"]), values=entry["values"]
                    )
                )
            elif kind == "matrix":
                _check_keys(entry, {"type", "z"}, where)
                z = np.asarray(entry["z"], dtype=float)
                if z.shape != (s, m):
                    raise ConfigurationError(
                        f"{where}: matrix shape {z.shape} does not match data {(s, m)}"
                    )
                out.append(QueryFunctional(z))
            else:
                raise ConfigurationError(
                    f"{where}: unknown type {kind!r} (expected indicator, bin_values, matrix)"
                )
        return out

    def sampler_settings(self, seed_override=None) -> dict:
        block = dict(self._block("sampler", required=False))
        _check_keys(block, _SAMPLER_KEYS, "'sampler'")
        block.setdefault("n_draws", 4000)
        block.setdefault("burn_in", 1000)
        block.setdefault("step_scale", 0.1)
        block.setdefault("seed", 0)
        block.setdefault("adapt", True)
        if seed_override is not None:
            block["seed"] = int(seed_override)
        return block

    def load_data(self) -> ProblemData:
        block = self._block("data", required=True)
        _check_keys(block, _DATA_KEYS, "'data'")
        if "npz" in block:
            if "counts_csv" in block or "coords_csv" in block:
                raise ConfigurationError("'data' takes either npz or csv fields, not both")
            return load_problem_npz(self.base_dir / block["npz"])
        if "counts_csv" not in block:
            raise ConfigurationError("'data' needs counts_csv (or npz)")
        coords = block.get("coords_csv")
        return read_counts_csv(
            self.base_dir / block["counts_csv"],
            self.base_dir / coords if coords else None,
        )

    def build_sim(self) -> dict:
        """Simulation study description: configs plus design lists."""
        block = self._block("sim", required=True)
        _check_keys(block, _SIM_KEYS, "'sim'")
        model_block = dict(block.get("model") or {})
        if "servers" not in model_block:
            raise ConfigurationError("'sim.model' needs at least servers")
        model = CallCenterConfig(**{k: _num(v) for k, v in model_block.items()})
        true_block = dict(block.get("true") or {})
        merged = dict(model_block)
        merged.update(true_block)
        true = TrueModelConfig(**{k: _num(v) for k, v in merged.items()})
        designs = block.get("designs") or [model.servers]
        real_designs = block.get("real_designs", designs)
        return {
            "model": model,
            "true": true,
            "designs": [int(v) for v in designs],
            "real_designs": [int(v) for v in real_designs],
            "sim_reps": int(block.get("sim_reps", 250)),
            "real_reps": int(block.get("real_reps", 250)),
        }

    def experiment_settings(self) -> dict:
        return dict(self._block("experiment", required=False))

    def output_path(self):
        block = self._block("output", required=False)
        if block:
            _check_keys(block, {"path"}, "'output'")
            return self.base_dir / block["path"]
        return None


def _num(v):
    """JSON numbers come back as int/float; tuples need conversion."""
    if isinstance(v, list):
        return tuple(v)
    return v
