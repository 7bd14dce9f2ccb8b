"""Command-line interface.

Commands: roots, simulate, estimate, limit-sample, experiment, convergence.
JSON configs are schema-validated (unknown keys rejected); CSV holds bulk
numbers.  Exit codes: 0 success, 2 argument/config error, 3 numeric failure
(singular design, overflow, no valid replications).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .estimate import SingularDesignError, estimate_path, estimate_sigma, sufficient_stats
from .io import dump_json, read_path_csv, write_pairs_csv, write_path_csv
from .limits import sample_limit
from .model import ModelParams, char_roots, classify
from .montecarlo import (
    ExperimentConfig,
    NormalReference,
    convergence_study,
    ks_two_sample,
    run_experiment,
)
from .regimes import NoNlrrError, rate_functions
from .simulate import SamplePath, SimConfig, SimulationOverflowError, rescale_time, simulate

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_PARAMS_SCHEMA = {
    "type": "object",
    "properties": {
        "theta1": {"type": "number"},
        "theta2": {"type": "number"},
        "sigma": {"type": "number", "minimum": 0},
        "x0": {"type": "number"},
        "dx0": {"type": "number"},
    },
    "required": ["theta1", "theta2"],
    "additionalProperties": False,
}

_NORMAL_REF_SCHEMA = {
    "type": "object",
    "properties": {
        "mean1": {"type": "number"},
        "var1": {"type": "number", "minimum": 0},
        "mean2": {"type": "number"},
        "var2": {"type": "number", "minimum": 0},
    },
    "required": ["mean1", "var1"],
    "additionalProperties": False,
}

_EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": ["experiment", "convergence"]},
        "params": _PARAMS_SCHEMA,
        "horizons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                     "minItems": 1},
        "n_reps": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "steps_per_unit_time": {"type": "integer", "minimum": 1},
        "normalization": {"enum": ["deterministic_rate", "nlrr", "matrix"]},
        "comparison": {
            "oneOf": [{"enum": ["limit_sampler", "none"]}, _NORMAL_REF_SCHEMA]
        },
        "n_reference": {"type": "integer", "minimum": 1},
        "grid_n": {"type": "integer", "minimum": 2},
        "write_residuals": {"type": "boolean"},
    },
    "required": ["command", "params", "horizons", "n_reps", "seed"],
    "additionalProperties": False,
}


class ConfigError(RuntimeError):
    pass


def _load_config(path: str, expected_command: str) -> dict:
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    errors = sorted(Draft202012Validator(_EXPERIMENT_SCHEMA).iter_errors(raw),
                    key=lambda e: list(e.path))
    if errors:
        msg = "; ".join(f"{'/'.join(str(p) for p in e.path) or '<root>'}: {e.message}"
                        for e in errors)
        raise ConfigError(f"invalid config: {msg}")
    if raw["command"] != expected_command:
        raise ConfigError(f"config command {raw['command']!r}, expected {expected_command!r}")
    return raw


def _experiment_config(raw: dict) -> tuple[ExperimentConfig, bool]:
    params = ModelParams(**raw["params"])
    comparison = raw.get("comparison", "limit_sampler")
    if isinstance(comparison, dict):
        comparison = NormalReference(**comparison)
    cfg = ExperimentConfig(
        params=params,
        horizons=tuple(raw["horizons"]),
        n_reps=raw["n_reps"],
        seed=raw["seed"],
        steps_per_unit_time=raw.get("steps_per_unit_time", 100),
        normalization=raw.get("normalization", "deterministic_rate"),
        comparison=comparison,
        n_reference=raw.get("n_reference", 8000),
        grid_n=raw.get("grid_n", 10_000),
    )
    return cfg, raw.get("write_residuals", False)


def _params_from_args(args) -> ModelParams:
    return ModelParams(theta1=args.theta1, theta2=args.theta2, sigma=args.sigma,
                       x0=args.x0, dx0=args.dx0)


def _roots_info(params: ModelParams, tol: float | None) -> dict:
    roots = char_roots(params)
    regime = classify(roots, tol)
    spec = rate_functions(regime, roots)
    return {
        "p": [roots.p.real, roots.p.imag],
        "q": [roots.q.real, roots.q.imag],
        "regime": regime.tag.value,
        "v1_expr": spec.v1_expr,
        "v2_expr": spec.v2_expr,
        "ld1": spec.label1,
        "ld2": spec.label2,
        "nlrr": spec.nlrr,
        "llr_label": spec.llr_label,
    }


def cmd_roots(args) -> int:
    info = _roots_info(_params_from_args(args), args.tol)
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    params = _params_from_args(args)
    cfg = SimConfig(horizon=args.horizon, n_steps=args.n_steps, scheme=args.scheme,
                    record_noise=args.record_noise, seed=args.seed,
                    replication_index=args.rep)
    path = simulate(params, cfg)
    if args.rescale != 1.0:
        path = rescale_time(path, args.rescale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_file = out / "path.csv"
    meta_file = out / "path.meta.json"
    write_path_csv(path, csv_file)
    dump_json({
        "params": {"theta1": path.params.theta1, "theta2": path.params.theta2,
                   "sigma": path.params.sigma, "x0": path.params.x0,
                   "dx0": path.params.dx0},
        "horizon": path.horizon,
        "n_steps": path.n_steps,
        "scheme": cfg.scheme,
        "seed": cfg.seed,
        "replication_index": cfg.replication_index,
    }, meta_file)
    print(f"simulate: wrote {csv_file} and {meta_file} "
          f"({path.n_steps} steps, scheme={cfg.scheme})")
    return 0


def cmd_estimate(args) -> int:
    meta_file = Path(args.meta) if args.meta else Path(args.path).with_suffix(".meta.json")
    try:
        with open(meta_file) as handle:
            meta = json.load(handle)
        params = ModelParams(**meta["params"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read path metadata {meta_file}: {exc}") from exc
    path = read_path_csv(args.path, params)
    est = estimate_path(path)
    record = {
        "theta1_hat": est.theta1_hat,
        "theta2_hat": est.theta2_hat,
        "det_D": est.det_D,
        "psi": [[est.psi[0, 0], est.psi[0, 1]], [est.psi[1, 0], est.psi[1, 1]]],
        "cond_flag": est.cond_flag,
        "sigma_hat": estimate_sigma(path),
        "T": path.horizon,
        "n": path.n_steps,
        "seed": meta.get("seed"),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "estimate.json"
    dump_json(record, dest)
    print(f"estimate: theta1_hat={est.theta1_hat!r} theta2_hat={est.theta2_hat!r} "
          f"-> {dest}")
    return 0


def cmd_limit_sample(args) -> int:
    params = _params_from_args(args)
    roots = char_roots(params)
    regime = classify(roots, args.tol)
    draws = sample_limit(regime, roots, params, args.n, grid_n=args.grid_n,
                         seed=args.seed, horizon=args.horizon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_file = out / "limit.csv"
    meta_file = out / "limit.meta.json"
    write_pairs_csv(draws.l1, draws.l2, csv_file)
    dump_json({
        "regime": draws.regime.value,
        "p": [roots.p.real, roots.p.imag],
        "q": [roots.q.real, roots.q.imag],
        "grid_n": draws.grid_n,
        "seed": draws.seed,
        "n": int(draws.l1.size),
        "horizon": args.horizon,
    }, meta_file)
    print(f"limit-sample: wrote {csv_file} and {meta_file} ({args.n} draws)")
    return 0


def cmd_experiment(args) -> int:
    raw = _load_config(args.config, "experiment")
    cfg, write_residuals = _experiment_config(raw)
    if args.seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "seed": args.seed})
    report = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "report.json"
    dump_json(report.to_artifact_dict(), dest)
    written = [str(dest)]
    if write_residuals:
        rows = ["rep,T,r1,r2"]
        rows.extend(f"{k},{T!r},{a!r},{b!r}" for k, T, a, b in report.residual_rows())
        res_file = out / "residuals.csv"
        from .io import atomic_write_text

        atomic_write_text(res_file, "\n".join(rows) + "\n")
        written.append(str(res_file))
    print(f"experiment: regime={report.regime} wrote {' '.join(written)} "
          f"(wall {report.wall_time_s:.2f}s)")
    return 0


def cmd_convergence(args) -> int:
    raw = _load_config(args.config, "convergence")
    cfg, _ = _experiment_config(raw)
    if args.seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "seed": args.seed})
    report = convergence_study(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "convergence.json"
    dump_json(report.to_artifact_dict(), dest)
    print(f"convergence: regime={report.regime} stabilized="
          f"{report.stabilized1}/{report.stabilized2} wrote {dest}")
    return 0


def _add_model_args(parser, with_sim: bool = False):
    parser.add_argument("--theta1", type=float, required=True)
    parser.add_argument("--theta2", type=float, required=True)
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--x0", type=float, default=0.0)
    parser.add_argument("--dx0", type=float, default=0.0)
    if with_sim:
        parser.add_argument("--horizon", type=float, required=True)
        parser.add_argument("--n-steps", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="car2",
        description="CAR(2) simulation and drift-MLE laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_roots = sub.add_parser("roots", help="characteristic roots, regime, rates")
    _add_model_args(p_roots)
    p_roots.add_argument("--tol", type=float, default=None)
    p_roots.set_defaults(func=cmd_roots)

    p_sim = sub.add_parser("simulate", help="simulate one path to CSV")
    _add_model_args(p_sim, with_sim=True)
    p_sim.add_argument("--scheme", choices=["exact", "euler"], default="exact")
    p_sim.add_argument("--record-noise", action="store_true")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--rep", type=int, default=0)
    p_sim.add_argument("--rescale", type=float, default=1.0,
                       help="optionally time-rescale the path by this factor")
    p_sim.add_argument("--out", default=".")
    p_sim.set_defaults(func=cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate (theta1, theta2) from a path CSV")
    p_est.add_argument("--path", required=True)
    p_est.add_argument("--meta", default=None,
                       help="metadata JSON (default: <path>.meta.json)")
    p_est.add_argument("--out", default=".")
    p_est.set_defaults(func=cmd_estimate)

    p_lim = sub.add_parser("limit-sample", help="draw from a regime's limit law")
    _add_model_args(p_lim)
    p_lim.add_argument("--n", type=int, required=True)
    p_lim.add_argument("--grid-n", type=int, default=10_000)
    p_lim.add_argument("--seed", type=int, default=0)
    p_lim.add_argument("--tol", type=float, default=None)
    p_lim.add_argument("--horizon", type=float, default=None,
                       help="phase horizon (UnstableOscillation only)")
    p_lim.add_argument("--out", default=".")
    p_lim.set_defaults(func=cmd_limit_sample)

    p_exp = sub.add_parser("experiment", help="replication experiment from a JSON config")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--seed", type=int, default=None, help="override config seed")
    p_exp.add_argument("--out", default=".")
    p_exp.set_defaults(func=cmd_experiment)

    p_conv = sub.add_parser("convergence", help="convergence study from a JSON config")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--seed", type=int, default=None)
    p_conv.add_argument("--out", default=".")
    p_conv.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularDesignError, SimulationOverflowError, NoNlrrError,
            RuntimeError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
