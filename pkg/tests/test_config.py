"""Run-configuration parsing, validation, and object builders."""

import json

import numpy as np
import pytest

from simcal.config import SCHEMA_VERSION, RunConfig
from simcal.data import ProblemData
from simcal.errors import ConfigurationError
from simcal.io import save_problem_npz, write_counts_csv
from simcal.sim import CallCenterConfig, TrueModelConfig

BASE = {
    "schema_version": 1,
    "prior": {"lambda_d": 0.25, "lambda_p": 0.01},
    "threshold": {"q": 0.975},
    "functionals": [{"type": "indicator", "design": 0, "outcome": 1}],
}


def cfg_with(extra=None, drop=()):
    raw = {k: v for k, v in BASE.items() if k not in drop}
    if extra:
        raw.update(extra)
    return RunConfig.from_dict(raw)


def test_from_file_and_base_dir(tmp_path):
    data = ProblemData(
        design_coords=np.array([0.0]),
        real_counts=np.array([[3, 1]]),
        sim_counts=np.array([[5, 5]]),
    )
    save_problem_npz(tmp_path / "d.npz", data)
    doc = dict(BASE)
    doc["data"] = {"npz": "d.npz"}
    (tmp_path / "run.json").write_text(json.dumps(doc))
    cfg = RunConfig.from_file(tmp_path / "run.json")
    loaded = cfg.load_data()
    assert np.array_equal(loaded.real_counts, data.real_counts)


def test_from_file_missing(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        RunConfig.from_file(tmp_path / "absent.json")


def test_from_file_invalid_json(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigurationError, match="invalid JSON"):
        RunConfig.from_file(tmp_path / "bad.json")


def test_unknown_top_level_key():
    with pytest.raises(ConfigurationError, match="unknown key"):
        cfg_with({"bogus": 1}).build_prior()


def test_schema_version_mismatch():
    with pytest.raises(ConfigurationError, match="schema_version"):
        cfg_with({"schema_version": 99}).build_prior()


def test_schema_version_defaults_to_current():
    cfg = cfg_with(drop=("schema_version",))
    assert cfg.build_prior().lambda_d == 0.25
    assert SCHEMA_VERSION == 1


def test_prior_builder_and_validation():
    prior = cfg_with({"prior": {"lambda_d": 1.0, "lambda_p": 0.5, "rho_design": 0.2}}).build_prior()
    assert prior.lambda_d == 1.0 and prior.rho_design == 0.2
    with pytest.raises(ConfigurationError, match="lambda_d and lambda_p"):
        cfg_with({"prior": {"lambda_d": 1.0}}).build_prior()
    with pytest.raises(ConfigurationError, match="unknown key"):
        cfg_with({"prior": {"lambda_d": 1.0, "lambda_p": 1.0, "shrink": 2}}).build_prior()
    with pytest.raises(ConfigurationError, match="needs a 'prior'"):
        cfg_with(drop=("prior",)).build_prior()


def test_threshold_builder():
    assert cfg_with().build_threshold().q == 0.975
    spec = cfg_with({"threshold": {"ell": 2.0}}).build_threshold()
    assert spec.ell == 2.0
    with pytest.raises(ConfigurationError, match="unknown key"):
        cfg_with({"threshold": {"level": 0.9}}).build_threshold()


def test_solver_options_and_seed_override():
    cfg = cfg_with({"solver": {"seed": 7, "restarts": 2, "max_iterations": 50}})
    opts = cfg.build_solver_options()
    assert (opts.seed, opts.restarts, opts.max_iterations) == (7, 2, 50)
    assert cfg.build_solver_options(seed_override=99).seed == 99
    # absent block gives defaults
    assert cfg_with().build_solver_options().restarts >= 1
    with pytest.raises(ConfigurationError, match="unknown key"):
        cfg_with({"solver": {"tolerance": 1e-3}}).build_solver_options()


def test_functionals_indicator_and_bin_values():
    cfg = cfg_with(
        {
            "functionals": [
                {"type": "indicator", "design": 1, "outcome": 2},
                {"type": "bin_values", "design": 0, "values": [0.0, 0.5, 1.0]},
                {"type": "matrix", "z": [[1, 0, 0], [0, 0, 0]]},
            ]
        }
    )
    fs = cfg.build_functionals(2, 3)
    assert fs[0].z[1, 2] == 1.0 and fs[0].z.sum() == 1.0
    assert np.array_equal(fs[1].z[0], [0.0, 0.5, 1.0]) and fs[1].z[1].sum() == 0.0
    assert fs[2].z[0, 0] == 1.0


def test_functionals_validation():
    with pytest.raises(ConfigurationError, match="non-empty"):
        cfg_with({"functionals": []}).build_functionals(1, 2)
    with pytest.raises(ConfigurationError, match="must be a list"):
        cfg_with({"functionals": {"type": "indicator"}}).build_functionals(1, 2)
    with pytest.raises(ConfigurationError, match="with a 'type'"):
        cfg_with({"functionals": [{"design": 0}]}).build_functionals(1, 2)
    with pytest.raises(ConfigurationError, match="unknown type"):
        cfg_with({"functionals": [{"type": "moment"}]}).build_functionals(1, 2)
    with pytest.raises(ConfigurationError, match="does not match"):
        cfg_with({"functionals": [{"type": "matrix", "z": [[1, 2, 3]]}]}).build_functionals(1, 2)
    with pytest.raises(ConfigurationError, match="unknown key"):
        cfg_with(
            {"functionals": [{"type": "indicator", "design": 0, "outcome": 0, "w": 2}]}
        ).build_functionals(1, 2)


def test_sampler_settings_defaults_and_override():
    settings = cfg_with().sampler_settings()
    assert settings == {
        "n_draws": 4000,
        "burn_in": 1000,
        "step_scale": 0.1,
        "seed": 0,
        "adapt": True,
    }
    custom = cfg_with({"sampler": {"n_draws": 100, "seed": 5}}).sampler_settings(seed_override=8)
    assert custom["n_draws"] == 100 and custom["seed"] == 8


def test_load_data_csv_and_exclusivity(tmp_path):
    data = ProblemData(
        design_coords=np.array([0.0]),
        real_counts=np.array([[3, 1]]),
        sim_counts=np.array([[5, 5]]),
    )
    write_counts_csv(tmp_path / "c.csv", data)
    doc = dict(BASE)
    doc["data"] = {"counts_csv": "c.csv"}
    cfg = RunConfig.from_dict(doc, base_dir=tmp_path)
    assert np.array_equal(cfg.load_data().sim_counts, data.sim_counts)

    doc_bad = dict(BASE)
    doc_bad["data"] = {"npz": "d.npz", "counts_csv": "c.csv"}
    with pytest.raises(ConfigurationError, match="not both"):
        RunConfig.from_dict(doc_bad, base_dir=tmp_path).load_data()

    doc_none = dict(BASE)
    doc_none["data"] = {}
    with pytest.raises(ConfigurationError, match="counts_csv"):
        RunConfig.from_dict(doc_none, base_dir=tmp_path).load_data()


def test_build_sim_merging_and_defaults():
    cfg = cfg_with(
        {
            "sim": {
                "model": {"servers": 6, "horizon": 30.0, "bins": [1.0, 2.0]},
                "true": {"break_trigger_idle": 4, "stop_trigger_idle": 6},
                "designs": [5, 6, 7],
                "real_designs": [6],
                "sim_reps": 40,
            }
        }
    )
    sim = cfg.build_sim()
    assert isinstance(sim["model"], CallCenterConfig)
    assert isinstance(sim["true"], TrueModelConfig)
    # true config inherits the model block's fields
    assert sim["true"].horizon == 30.0 and sim["true"].bins == (1.0, 2.0)
    assert sim["true"].break_trigger_idle == 4
    assert sim["designs"] == [5, 6, 7] and sim["real_designs"] == [6]
    assert sim["sim_reps"] == 40 and sim["real_reps"] == 250


def test_build_sim_requires_servers():
    with pytest.raises(ConfigurationError, match="servers"):
        cfg_with({"sim": {"model": {"horizon": 10.0}}}).build_sim()


def test_output_path(tmp_path):
    doc = dict(BASE)
    doc["output"] = {"path": "report.json"}
    cfg = RunConfig.from_dict(doc, base_dir=tmp_path)
    assert cfg.output_path() == tmp_path / "report.json"
    assert cfg_with().output_path() is None
