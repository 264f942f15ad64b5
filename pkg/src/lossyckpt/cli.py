"""Command-line front end: model sweeps, compression runs, and resilience simulations.

Subcommands: model, compress, decompress, solve, simulate, nprime.
All rates and times use one consistent unit (seconds in the documented
examples); exit codes: 0 success, 1 runtime failure or divergence,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import compressor, perfmodel, simulate, solvers, sparse
from .errors import ParameterError

SCHEMA_VERSION = 1
TRIAL_CSV_COLUMNS = [
    "trial", "seed", "converged", "truncated", "diverged", "total_time",
    "productive_time", "ckpt_time", "rc_time", "rollback_time",
    "iterations_final", "iterations_executed", "n_failures", "n_checkpoints",
    "n_checkpoints_voided", "n_recoveries", "n_lossy_recoveries",
]

# Default sweep axes: failure rate 0..3.5 per hour, checkpoint time 0..140.
DEFAULT_LAMBDA_GRID = (0.0, 3.5 / 3600.0, 36)
DEFAULT_TCKP_GRID = (0.0, 140.0, 29)


def _parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ParameterError(f"grid {spec!r} must be start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ParameterError(f"grid {spec!r} has non-numeric fields") from None
    if count < 1 or stop < start or start < 0:
        raise ParameterError(f"grid {spec!r} is empty or descending")
    return np.linspace(start, stop, count)


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path == "-" or path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def cmd_model(args) -> int:
    if args.bound:
        missing = [n for n, v in [("--lambda", args.lam), ("--t-it", args.t_it),
                                  ("--tckp-trad", args.tckp_trad),
                                  ("--tckp-lossy", args.tckp_lossy)] if v is None]
        if missing:
            raise ParameterError(f"--bound needs {' '.join(missing)}")
        bound = perfmodel.n_prime_bound(args.lam, args.t_it, args.tckp_trad,
                                        args.tckp_lossy)
        print("inf" if math.isinf(bound) else str(math.floor(bound)))
        return 0
    lam_grid = _parse_grid(args.lambda_grid) if args.lambda_grid \
        else np.linspace(*DEFAULT_LAMBDA_GRID)
    tckp_grid = _parse_grid(args.tckp_grid) if args.tckp_grid \
        else np.linspace(*DEFAULT_TCKP_GRID)
    rows = perfmodel.sweep_overhead_surface(lam_grid, tckp_grid)
    if args.out and args.out != "-":
        with open(args.out, "w", newline="") as fh:
            perfmodel.write_overhead_surface_csv(fh, rows)
    else:
        perfmodel.write_overhead_surface_csv(sys.stdout, rows)
    return 0


def _compressor_config(args) -> compressor.CompressorConfig:
    mode = args.mode.replace("-", "_")
    if mode in ("abs", "absolute"):
        if args.eb_abs is None:
            raise ParameterError("absolute mode needs --eb-abs")
        return compressor.CompressorConfig.absolute(args.eb_abs)
    if mode in ("rel", "value_range_relative"):
        if args.eb_rel is None:
            raise ParameterError("value-range-relative mode needs --eb-rel")
        return compressor.CompressorConfig.value_range_relative(args.eb_rel)
    if mode in ("fixed_psnr", "psnr"):
        if args.psnr is None:
            raise ParameterError("fixed-psnr mode needs --psnr")
        return compressor.CompressorConfig.fixed_psnr(args.psnr)
    raise ParameterError(f"unknown mode {args.mode!r}")


def cmd_compress(args) -> int:
    data = sparse.read_vector(args.input)
    config = _compressor_config(args)
    t0 = time.perf_counter()
    block = compressor.compress(data, config)
    t_comp = time.perf_counter() - t0
    Path(args.output).write_bytes(block.to_bytes())
    t0 = time.perf_counter()
    reconstructed = compressor.decompress(block)
    t_decomp = time.perf_counter() - t0
    if block.value_range == 0.0:
        print(f"warning: {args.input} has zero value range; stored as a constant field",
              file=sys.stderr)
        psnr = math.inf
        mse = nrmse = 0.0
    else:
        stats = compressor.measured_psnr(data, reconstructed)
        psnr, mse, nrmse = stats.psnr_db, stats.mse, stats.nrmse
    payload = {
        "schema_version": SCHEMA_VERSION,
        "mode": config.mode,
        "n": block.n,
        "value_range": block.value_range,
        "eb_abs": block.eb_abs,
        "eb_rel_chosen": block.eb_abs / block.value_range if block.value_range > 0 else None,
        "target_psnr_db": config.target_psnr_db,
        "measured_psnr": psnr,
        "mse": mse,
        "nrmse": nrmse,
        "max_abs_error": float(np.max(np.abs(data - reconstructed))),
        "compressed_bytes": block.nbytes,
        "ratio": block.compression_ratio,
        "escapes": int(len(block.escape_indices)),
        "t_comp": t_comp,
        "t_decomp": t_decomp,
    }
    _write_json(args.stats, payload)
    return 0


def cmd_decompress(args) -> int:
    block = compressor.CompressedBlock.from_bytes(Path(args.input).read_bytes())
    sparse.write_vector(args.output, compressor.decompress(block))
    return 0


def _solver_problem(problem: str):
    kind = problem.partition(":")[0]
    if kind not in ("poisson2d", "poisson1d"):
        raise ParameterError(f"unknown problem {problem!r} (poisson2d:M or poisson1d:N)")
    return simulate._build_problem(problem)


def cmd_solve(args) -> int:
    a, m, b = _solver_problem(args.problem)
    cfg = solvers.SolveConfig(tolerance=args.tolerance, max_iterations=args.max_iterations,
                              restart_len=args.restart_len, ckpt_intvl=args.restart_len)
    state = solvers.solve_to_convergence(solvers.init(args.method, a, m, b, cfg))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": args.method,
        "problem": args.problem,
        "n": a.n_rows,
        "converged": state.converged,
        "iterations": state.iteration,
        "residual_norm": state.residual_norm,
        "relative_residual": state.residual_norm / state.norm_b if state.norm_b else None,
    }
    _write_json(args.json, payload)
    return 0 if state.converged else 1


def cmd_nprime(args) -> int:
    a, m, b = _solver_problem(args.problem)
    cfg = solvers.SolveConfig(tolerance=args.tolerance, max_iterations=args.max_iterations,
                              restart_len=args.restart_len or args.interval,
                              ckpt_intvl=args.interval)
    comp_config = None
    if not args.lossless:
        comp_config = _compressor_config(args)
    points = [int(p) for p in args.inject.split(",") if p]
    if not points:
        raise ParameterError("--inject needs at least one iteration index")
    result = simulate.measure_n_prime(args.method, a, m, b, cfg, comp_config,
                                      points, ckpt_intvl=args.interval)
    values = result.values()
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": args.method,
        "problem": args.problem,
        "ckpt_intvl": args.interval,
        "lossless": args.lossless,
        "baseline_n": result.baseline_n,
        "samples": [asdict(s) for s in result.samples],
        "mean_n_prime": float(np.nanmean(values)) if len(values) else None,
    }
    _write_json(args.json, payload)
    return 0 if all(s.converged for s in result.samples) else 1


def _toml_compressor(section) -> compressor.CompressorConfig:
    mode = section.get("mode", "value_range_relative").replace("-", "_")
    if mode == "absolute":
        return compressor.CompressorConfig.absolute(section["eb_abs"])
    if mode == "value_range_relative":
        return compressor.CompressorConfig.value_range_relative(section["eb_rel"])
    if mode == "fixed_psnr":
        return compressor.CompressorConfig.fixed_psnr(section["psnr"])
    raise ParameterError(f"unknown compressor mode {mode!r}")


def load_sim_config(path, overrides: dict):
    """Build a SimConfig from a TOML experiment file plus CLI overrides."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    problem = doc.get("problem", {})
    solver = doc.get("solver", {})
    ck = doc.get("checkpoint", {})
    fails = doc.get("failures", {})
    simsec = doc.get("sim", {})
    comp = doc.get("compressor")

    def pick(key, *values, default=None):
        for v in values:
            if v is not None:
                return v
        return default

    seed = pick("seed", overrides.get("seed"), doc.get("seed"))
    if seed is None:
        raise ParameterError("config must set a seed (reproducibility is mandatory)")
    kwargs = dict(
        method=pick("method", overrides.get("method"), problem.get("method"),
                    default="synthetic"),
        problem=pick("problem", overrides.get("problem"), problem.get("problem"),
                     default="synthetic:1000"),
        policy=pick("policy", overrides.get("policy"), ck.get("policy"),
                    default="traditional"),
        ckpt_intvl=int(pick("interval", overrides.get("ckpt_intvl"), ck.get("interval"),
                            default=100)),
        t_it=float(pick("t_it", overrides.get("t_it"), simsec.get("t_it"), default=1.0)),
        lam=float(pick("lambda", overrides.get("lam"), fails.get("lambda"), default=0.0)),
        seed=int(seed),
        trials=int(pick("trials", overrides.get("trials"), doc.get("trials"), default=1)),
        max_time=float(simsec.get("max_time", math.inf)),
        tolerance=float(solver.get("tolerance", 1e-8)),
        max_iterations=int(solver.get("max_iterations", 200_000)),
        restart_len=solver.get("restart_len"),
        t_ckpt=ck.get("t_ckpt"),
        t_rc=ck.get("t_rc"),
        t_comp=float(ck.get("t_comp", 0.0)),
        t_decomp=float(ck.get("t_decomp", 0.0)),
        write_bandwidth=ck.get("write_bandwidth"),
        read_bandwidth=ck.get("read_bandwidth"),
        forced_n_prime=pick("forced_n_prime", overrides.get("forced_n_prime"),
                            simsec.get("forced_n_prime")),
        failures_during_ckpt=bool(pick("failures_during_ckpt",
                                       overrides.get("failures_during_ckpt"),
                                       fails.get("during_checkpoints"), default=True)),
    )
    if kwargs["policy"] == "lossy" and kwargs["method"] != "synthetic":
        if comp is None:
            raise ParameterError("real lossy policy needs a [compressor] section")
        kwargs["compressor_config"] = _toml_compressor(comp)
    config = simulate.SimConfig(**kwargs)
    outputs = doc.get("output", {})
    t_ckpt_trad = ck.get("t_ckpt_trad")
    return config, outputs, t_ckpt_trad


def _write_trials_csv(path, trials) -> None:
    lines = [",".join(TRIAL_CSV_COLUMNS)]
    for idx, tr in enumerate(trials):
        lines.append(",".join([
            str(idx), str(tr.seed), str(int(tr.converged)), str(int(tr.truncated)),
            str(int(tr.diverged)), repr(tr.total_time), repr(tr.productive_time),
            repr(tr.ckpt_time), repr(tr.rc_time), repr(tr.rollback_time),
            str(tr.iterations_final), str(tr.iterations_executed), str(tr.n_failures),
            str(tr.n_checkpoints), str(tr.n_checkpoints_voided), str(tr.n_recoveries),
            str(tr.n_lossy_recoveries),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_simulate(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("seed", "trials", "policy", "lam", "t_it", "ckpt_intvl",
                  "forced_n_prime", "method", "problem", "failures_during_ckpt")}
    config, outputs, t_ckpt_trad = load_sim_config(args.config, overrides)
    report = simulate.run_ensemble(config)

    bound = None
    worthwhile = None
    t_lossy = config.t_ckpt
    if t_ckpt_trad is not None and t_lossy is not None and config.lam >= 0:
        bound = perfmodel.n_prime_bound(config.lam, config.t_it, t_ckpt_trad, t_lossy)
        measured = 0.0 if math.isnan(report.mean_n_prime) else report.mean_n_prime
        worthwhile = bool(measured <= bound)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "method": config.method, "problem": config.problem, "policy": config.policy,
            "ckpt_intvl": config.ckpt_intvl, "t_it": config.t_it, "lambda": config.lam,
            "seed": config.seed, "trials": config.trials, "t_ckpt": config.t_ckpt,
            "t_rc": config.t_rc, "forced_n_prime": config.forced_n_prime,
            "failures_during_ckpt": config.failures_during_ckpt,
        },
        "baseline_iterations": report.baseline_iterations,
        "n_trials": report.n_trials,
        "mean_total_time": report.mean_total_time,
        "ci95_total_time": report.ci95_total_time,
        "mean_overhead": report.mean_overhead,
        "ci95_overhead": report.ci95_overhead,
        "mean_n_prime": None if math.isnan(report.mean_n_prime) else report.mean_n_prime,
        "n_prime_bound": bound,
        "worthwhile": worthwhile,
        "all_converged": report.all_converged,
        "any_diverged": report.any_diverged,
        "mean_failures": float(np.mean([t.n_failures for t in report.trials])),
        "mean_checkpoints": float(np.mean([t.n_checkpoints for t in report.trials])),
        "mean_recoveries": float(np.mean([t.n_recoveries for t in report.trials])),
    }
    csv_path = args.out_csv or outputs.get("csv")
    json_path = args.out_json or outputs.get("json")
    if csv_path:
        _write_trials_csv(csv_path, report.trials)
    _write_json(json_path, payload)
    if report.any_diverged or not report.baseline_converged:
        print("warning: divergence detected; report is partial", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossyckpt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="overhead-model sweeps and the lossy decision bound")
    p.add_argument("--bound", action="store_true", help="print the max worthwhile N'")
    p.add_argument("--lambda", dest="lam", type=float, help="failure rate per time unit")
    p.add_argument("--t-it", type=float, help="mean iteration time")
    p.add_argument("--tckp-trad", type=float, help="traditional checkpoint time")
    p.add_argument("--tckp-lossy", type=float, help="lossy checkpoint time")
    p.add_argument("--lambda-grid", help="sweep grid start:stop:count (per time unit)")
    p.add_argument("--tckp-grid", help="sweep grid start:stop:count")
    p.add_argument("--out", default="-", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("compress", help="compress a raw vector file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="compressed block path")
    p.add_argument("--stats", default="-", help="stats JSON path (default stdout)")
    p.add_argument("--mode", default="fixed-psnr",
                   choices=["absolute", "abs", "value-range-relative", "rel", "fixed-psnr"])
    p.add_argument("--eb-abs", type=float)
    p.add_argument("--eb-rel", type=float)
    p.add_argument("--psnr", type=float)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct a raw vector from a block")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("solve", help="run a solver to convergence")
    p.add_argument("--method", required=True, choices=list(solvers.METHOD_NAMES))
    p.add_argument("--problem", required=True, help="poisson2d:M or poisson1d:N")
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--max-iterations", type=int, default=200_000)
    p.add_argument("--restart-len", type=int, default=30)
    p.add_argument("--json", default="-")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run a failure-injection ensemble from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--policy", choices=["traditional", "lossy", "none"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--t-it", dest="t_it", type=float)
    p.add_argument("--ckpt-intvl", dest="ckpt_intvl", type=int)
    p.add_argument("--forced-n-prime", dest="forced_n_prime", type=float)
    p.add_argument("--method")
    p.add_argument("--problem")
    p.add_argument("--failures-during-ckpt", dest="failures_during_ckpt",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="allow failures to strike during checkpoint/recovery")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nprime", help="measure extra iterations per lossy recovery")
    p.add_argument("--method", required=True, choices=list(solvers.METHOD_NAMES))
    p.add_argument("--problem", required=True)
    p.add_argument("--interval", type=int, required=True, help="checkpoint every k iterations")
    p.add_argument("--inject", required=True, help="comma-separated injection iterations")
    p.add_argument("--lossless", action="store_true", help="traditional payloads (N' = 0)")
    p.add_argument("--mode", default="value-range-relative",
                   choices=["absolute", "abs", "value-range-relative", "rel", "fixed-psnr"])
    p.add_argument("--eb-abs", type=float)
    p.add_argument("--eb-rel", type=float)
    p.add_argument("--psnr", type=float)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--max-iterations", type=int, default=200_000)
    p.add_argument("--restart-len", type=int)
    p.add_argument("--json", default="-")
    p.set_defaults(func=cmd_nprime)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: corrupt data, breakdowns
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
