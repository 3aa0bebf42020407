"""Command line interface.

Subcommands: simulate (write a synthetic panel), estimate (fit one
dataset), study (replicated RMSE study), diagnostics (trace
autocorrelations). Exit codes: 0 success, 1 estimation failure, 2 input
error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, io
from .cutpoints import estimate_cuts
from .model import simulate
from .polychoric import UndefinedCorrelationError
from .reconstruction import fit_frobenius, reconstruct
from .stem import StemConfig, run_stem

_EXIT_OK = 0
_EXIT_ESTIMATION = 1
_EXIT_INPUT = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="likertlvm",
        description="Signal/transient/measurement decomposition of longitudinal Likert panels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate a dataset from a config's truth")
    p_sim.add_argument("--config", required=True, help="study config JSON")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--out", default=".", help="output directory")

    p_est = sub.add_parser("estimate", help="estimate loadings from a dataset CSV")
    p_est.add_argument("data", help="long-format dataset CSV")
    p_est.add_argument("--method", choices=["cr", "stem"], default="cr")
    p_est.add_argument("--iterations", type=int, default=300)
    p_est.add_argument("--burn-in", type=int, default=None)
    p_est.add_argument("--gibbs-sweeps", type=int, default=10)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--out", default=".", help="output directory")

    p_study = sub.add_parser("study", help="replicated simulation study with RMSE report")
    p_study.add_argument("--config", required=True, help="study config JSON")
    p_study.add_argument("--replicates", type=int, default=None)
    p_study.add_argument("--seed", type=int, default=None)
    p_study.add_argument("--iterations", type=int, default=None, help="stochastic EM iterations")
    p_study.add_argument("--burn-in", type=int, default=None)
    p_study.add_argument("--gibbs-sweeps", type=int, default=None)
    p_study.add_argument("--threads", type=int, default=None)
    p_study.add_argument("--out", default=".", help="output directory")

    p_diag = sub.add_parser("diagnostics", help="autocorrelations of a trace CSV")
    p_diag.add_argument("traces", help="trace CSV from a stochastic EM run")
    p_diag.add_argument("--max-lag", type=int, default=50)
    p_diag.add_argument("--out", default=".", help="output directory")
    return parser


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    config = harness.load_study_config(args.config, seed=args.seed)
    out = _out_dir(args)
    _, data = simulate(config.params, config.cuts, config.n, config.T, config.seed)
    data_path = out / "data.csv"
    truth_path = out / "truth.json"
    io.write_dataset_csv(data, data_path)
    io.write_params_json(truth_path, config.params, config.cuts)
    print(f"wrote {data_path} and {truth_path}")
    return _EXIT_OK


def _cmd_estimate(args) -> int:
    data = io.read_dataset_csv(args.data)
    if args.method == "stem":
        try:
            stem_settings = StemConfig(
                iterations=args.iterations,
                seed=args.seed,
                burn_in=args.burn_in,
                gibbs_sweeps=args.gibbs_sweeps,
            )
        except ValueError as exc:
            raise io.InputError(str(exc)) from None
    out = _out_dir(args)
    result_path = out / "estimate.json"
    try:
        est = estimate_cuts(data)
        fit = fit_frobenius(
            reconstruct(data, est), data.num_items, data.num_times
        )
        if args.method == "cr":
            io.write_fit_json(
                result_path,
                fit.params.sigma,
                fit.params.tau,
                fit.gamma_sq,
                fit.objective,
            )
            print(f"wrote {result_path}")
            return _EXIT_OK
        config = replace(
            stem_settings, init_params=fit.params, init_cuts=est.as_cutpoints()
        )
        chain = run_stem(data, config)
        params = chain.final_params
        gamma_sq = np.clip(1.0 - params.sigma**2 - params.tau**2, 0.0, None)
        io.write_fit_json(
            result_path,
            params.sigma,
            params.tau,
            gamma_sq,
            chain.objective,
            cuts=chain.final_cuts.cuts,
        )
        traces_path = out / "traces.csv"
        io.write_traces_csv(
            traces_path, chain.sigma_trace, chain.tau_trace, chain.cut_trace
        )
        for line in chain.log:
            print(f"note: {line}", file=sys.stderr)
        print(f"wrote {result_path} and {traces_path}")
        return _EXIT_OK
    except (UndefinedCorrelationError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return _EXIT_ESTIMATION


def _cmd_study(args) -> int:
    config = harness.load_study_config(
        args.config,
        replicates=args.replicates,
        seed=args.seed,
        stem_iterations=args.iterations,
        stem_burn_in=args.burn_in,
        stem_gibbs_sweeps=args.gibbs_sweeps,
        threads=args.threads,
    )
    out = _out_dir(args)
    report = harness.run_study(config)
    rmse_path = out / "rmse.csv"
    io.write_rmse_csv(rmse_path, report.rows())
    print(report.format_table())
    for message in report.failure_messages:
        print(f"note: {message}", file=sys.stderr)
    print(f"wrote {rmse_path}")
    if report.failures == report.replicates:
        print("estimation failed in every replicate", file=sys.stderr)
        return _EXIT_ESTIMATION
    return _EXIT_OK


def _cmd_diagnostics(args) -> int:
    series = io.read_traces_csv(args.traces)
    lengths = {len(v) for v in series.values()}
    if min(lengths) < 10:
        raise io.InputError("traces must cover at least 10 iterations")
    if args.max_lag < 0 or args.max_lag >= min(lengths):
        raise io.InputError("--max-lag must lie in [0, iterations)")
    acf = {
        name: harness.autocorrelation(values, args.max_lag)
        for name, values in series.items()
    }
    out = _out_dir(args)
    acf_path = out / "acf.csv"
    io.write_acf_csv(acf_path, acf)
    print(f"wrote {acf_path}")
    return _EXIT_OK


_HANDLERS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "study": _cmd_study,
    "diagnostics": _cmd_diagnostics,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except io.InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
