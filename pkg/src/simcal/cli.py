"""Command-line interface.

Every command reads one JSON configuration (see ``config``) and writes
one JSON report, to ``--out`` / the config's output block, or stdout.
Exit status: 0 when every computation reached a terminal status, 1 when
any solver failed to converge, 2 on configuration or data errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import convexity_probe, threshold_from_spec
from .config import RunConfig, _check_keys
from .errors import SimcalError
from .experiments import (
    calibrate,
    compare_with_sampler,
    consistency_experiment,
    coverage_experiment,
)
from .io import save_problem_npz, write_coords_csv, write_counts_csv
from .mode import find_posterior_mode
from .posterior import PosteriorModel
from .sim import SyntheticScheme, simulator_dataset

_SCHEME_KEYS = {"design_coords", "pi", "pi_tilde", "n_real", "n_sim"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simcal",
        description=(
            "Quantify the discrepancy between a stochastic simulation model "
            "and the real system it imitates, with confidence bounds on "
            "outcome functionals."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--out", default=None, help="write the JSON report here")
    common.add_argument(
        "--threads", type=int, default=1, help="worker processes for replication loops"
    )
    sub.add_parser(
        "calibrate", parents=[common], help="bound the configured functionals on a dataset"
    )
    sub.add_parser("mode", parents=[common], help="report the posterior maximum only")
    sub.add_parser(
        "coverage", parents=[common], help="repeated-sampling coverage of a known truth"
    )
    sub.add_parser(
        "consistency", parents=[common], help="interval width across a sample-size ladder"
    )
    sub.add_parser("simulate", parents=[common], help="generate a dataset from the simulators")
    sub.add_parser(
        "compare-sampler", parents=[common], help="level-set bounds next to MCMC quantiles"
    )
    sub.add_parser(
        "convexity-check", parents=[common], help="midpoint feasibility rate of the level set"
    )
    return parser


def _load_or_simulate(cfg: RunConfig, seed: int):
    if cfg.raw.get("data") is not None:
        return cfg.load_data()
    if cfg.raw.get("sim") is not None:
        sim = cfg.build_sim()
        return simulator_dataset(
            sim["model"],
            sim["true"],
            sim["designs"],
            sim["real_designs"],
            sim["sim_reps"],
            sim["real_reps"],
            seed,
        )
    raise SimcalError("configuration needs a 'data' or 'sim' block for this command")


def _scheme_from_config(cfg: RunConfig) -> SyntheticScheme:
    exp = cfg.experiment_settings()
    scheme = exp.get("scheme")
    if not isinstance(scheme, dict):
        raise SimcalError("'experiment.scheme' block is required for this command")
    _check_keys(scheme, _SCHEME_KEYS, "'experiment.scheme'")
    missing = _SCHEME_KEYS - set(scheme)
    if missing:
        raise SimcalError(f"'experiment.scheme' is missing {sorted(missing)}")
    return SyntheticScheme(**scheme)


def _seed_of(cfg: RunConfig, args) -> int:
    if args.seed is not None:
        return int(args.seed)
    solver = cfg.raw.get("solver") or {}
    return int(solver.get("seed", 0))


def _cmd_calibrate(cfg: RunConfig, args) -> tuple[dict, bool]:
    seed = _seed_of(cfg, args)
    data = _load_or_simulate(cfg, seed)
    prior = cfg.build_prior()
    threshold = cfg.build_threshold()
    opts = cfg.build_solver_options(seed_override=args.seed)
    functionals = cfg.build_functionals(data.s, data.m)
    report = calibrate(data, prior, functionals, threshold, opts)
    return report.to_dict(), report.all_ok


def _cmd_mode(cfg: RunConfig, args) -> tuple[dict, bool]:
    seed = _seed_of(cfg, args)
    data = _load_or_simulate(cfg, seed)
    prior = cfg.build_prior()
    opts = cfg.build_solver_options(seed_override=args.seed)
    model = PosteriorModel(data, prior)
    res = find_posterior_mode(model, opts)
    out = {
        "log_post_star": res.log_post_star,
        "p": res.p_star.tolist(),
        "p_tilde": res.p_tilde_star.tolist(),
        "discrepancy": res.d_star.tolist(),
        "converged": bool(res.converged),
        "iterations": res.iterations,
        "kkt_residual": res.kkt_residual,
        "restarts_used": res.restarts_used,
    }
    return out, bool(res.converged)


def _cmd_coverage(cfg: RunConfig, args) -> tuple[dict, bool]:
    scheme = _scheme_from_config(cfg)
    exp = cfg.experiment_settings()
    prior = cfg.build_prior()
    threshold = cfg.build_threshold()
    opts = cfg.build_solver_options(seed_override=args.seed)
    functionals = cfg.build_functionals(scheme.s, scheme.m)
    report = coverage_experiment(
        scheme,
        functionals[0].z,
        threshold,
        prior,
        n_reps=int(exp.get("n_reps", 100)),
        seed=_seed_of(cfg, args),
        options=opts,
        threads=args.threads,
    )
    return report.to_dict(), report.failures == 0


def _cmd_consistency(cfg: RunConfig, args) -> tuple[dict, bool]:
    scheme = _scheme_from_config(cfg)
    exp = cfg.experiment_settings()
    prior = cfg.build_prior()
    threshold = cfg.build_threshold()
    opts = cfg.build_solver_options(seed_override=args.seed)
    functionals = cfg.build_functionals(scheme.s, scheme.m)
    report = consistency_experiment(
        scheme,
        functionals[0].z,
        threshold,
        prior,
        sizes=exp.get("sizes", [20, 200, 2000]),
        reps_per_size=int(exp.get("reps_per_size", 20)),
        seed=_seed_of(cfg, args),
        options=opts,
        threads=args.threads,
        nested=bool(exp.get("nested", True)),
    )
    return report.to_dict(), report.failures == 0


def _cmd_simulate(cfg: RunConfig, args) -> tuple[dict, bool]:
    seed = _seed_of(cfg, args)
    sim = cfg.build_sim()
    data = simulator_dataset(
        sim["model"],
        sim["true"],
        sim["designs"],
        sim["real_designs"],
        sim["sim_reps"],
        sim["real_reps"],
        seed,
    )
    out_path = Path(args.out) if args.out else cfg.output_path()
    written = []
    if out_path is None:
        raise SimcalError("simulate needs --out or an output block to store the dataset")
    out_path = Path(out_path)
    if out_path.suffix == ".npz":
        save_problem_npz(out_path, data)
        written.append(str(out_path))
    else:
        write_counts_csv(out_path, data)
        coords_path = out_path.with_suffix(".coords.csv")
        write_coords_csv(coords_path, data)
        written.extend([str(out_path), str(coords_path)])
    summary = {
        "written": written,
        "designs": data.design_coords.tolist(),
        "real_totals": data.real_totals.tolist(),
        "sim_totals": data.sim_totals.tolist(),
    }
    return summary, True


def _cmd_compare_sampler(cfg: RunConfig, args) -> tuple[dict, bool]:
    seed = _seed_of(cfg, args)
    data = _load_or_simulate(cfg, seed)
    prior = cfg.build_prior()
    threshold = cfg.build_threshold()
    opts = cfg.build_solver_options(seed_override=args.seed)
    functionals = cfg.build_functionals(data.s, data.m)
    sampler = cfg.sampler_settings(seed_override=args.seed)
    report = compare_with_sampler(
        data,
        prior,
        functionals[0],
        threshold,
        seed=int(sampler["seed"]),
        n_draws=int(sampler["n_draws"]),
        burn_in=int(sampler["burn_in"]),
        step_scale=float(sampler["step_scale"]),
        options=opts,
    )
    return report.to_dict(), True


def _cmd_convexity(cfg: RunConfig, args) -> tuple[dict, bool]:
    seed = _seed_of(cfg, args)
    data = _load_or_simulate(cfg, seed)
    prior = cfg.build_prior()
    threshold = cfg.build_threshold()
    opts = cfg.build_solver_options(seed_override=args.seed)
    exp = cfg.experiment_settings()
    sampler = cfg.sampler_settings(seed_override=args.seed)
    model = PosteriorModel(data, prior)
    mode_res = find_posterior_mode(model, opts)
    log_c = threshold_from_spec(threshold, mode_res.log_post_star)
    fraction = convexity_probe(
        model,
        log_c,
        n_pairs=int(exp.get("n_pairs", 200)),
        seed=int(sampler["seed"]),
        n_draws=int(sampler["n_draws"]),
        burn_in=int(sampler["burn_in"]),
        step_scale=float(sampler["step_scale"]),
    )
    out = {
        "log_post_star": mode_res.log_post_star,
        "log_c": log_c,
        "n_pairs": int(exp.get("n_pairs", 200)),
        "midpoint_feasible_fraction": fraction,
    }
    return out, True


_HANDLERS = {
    "calibrate": _cmd_calibrate,
    "mode": _cmd_mode,
    "coverage": _cmd_coverage,
    "consistency": _cmd_consistency,
    "simulate": _cmd_simulate,
    "compare-sampler": _cmd_compare_sampler,
    "convexity-check": _cmd_convexity,
}


class _JSONEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        if args.threads < 1:
            raise SimcalError("--threads must be at least 1")
        report, ok = _HANDLERS[args.command](cfg, args)
    except SimcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True, cls=_JSONEncoder)
    out_path = args.out or (None if args.command == "simulate" else cfg.output_path())
    if out_path and args.command != "simulate":
        Path(out_path).write_text(text + "\n")
        print(f"report written to {out_path}")
    else:
        print(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
