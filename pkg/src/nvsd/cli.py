"""Command-line interface: fit, predict, path and bench subcommands.

File conventions: input matrices are CSV with a header row and one
instance per row; targets are a single-column CSV; group structures are a
JSON array of arrays of 1-based variable indices. All output files are
written atomically (temp file + rename) and numbers carry enough digits
to round-trip exactly.

Exit codes: 0 success, 2 malformed input (message names the file and
line), 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .admm import SolverError
from .bench import (
    BenchConfig,
    MethodSpec,
    aggregate_csv_text,
    format_aggregate_table,
    raw_csv_text,
    run_experiment,
)
from .estimators import NVSDRegressor
from .path import fit_path, select_by_validation
from .prox import GroupStructure
from .serialize import atomic_write_text, load_model, model_to_dict, save_model


class InputFormatError(ValueError):
    """Malformed user input; message names the offending file and line."""


def _fmt(value: float) -> str:
    return repr(float(value))


def read_matrix_csv(path: str) -> np.ndarray:
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}:1: missing header row") from None
        width = len(header)
        if width == 0:
            raise InputFormatError(f"{path}:1: empty header row")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise InputFormatError(
                    f"{path}:{lineno}: expected {width} columns, found {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise InputFormatError(
                    f"{path}:{lineno}: non-numeric value"
                ) from None
    return np.asarray(rows, dtype=float).reshape(-1, width)


def read_vector_csv(path: str) -> np.ndarray:
    data = read_matrix_csv(path)
    if data.shape[1] != 1:
        raise InputFormatError(f"{path}:1: expected a single column")
    return data[:, 0]


def read_groups_json(path: str, d: int) -> GroupStructure:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror}") from None
    try:
        return GroupStructure.from_json(text, d)
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: {exc}") from None


def write_predictions_csv(path: str, values: np.ndarray) -> None:
    lines = ["prediction"] + [_fmt(v) for v in values]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_sigma(value: str):
    if value == "auto":
        return "auto"
    try:
        return float(value)
    except ValueError:
        raise InputFormatError(f"--sigma must be a number or 'auto', got {value!r}")


def _add_kernel_flags(parser):
    parser.add_argument(
        "--kernel",
        choices=("linear", "polynomial", "gaussian"),
        default="gaussian",
    )
    parser.add_argument("--sigma", default="auto", help="gaussian width or 'auto'")
    parser.add_argument("--degree", type=int, default=3)
    parser.add_argument("--offset", type=float, default=1.0)


def _add_reg_flags(parser):
    parser.add_argument("--reg", choices=("l", "gl", "en"), default="l")
    parser.add_argument("--groups", help="JSON file with 1-based variable groups")
    parser.add_argument("--mu", type=float, default=0.5, help="elastic-net mix")
    parser.add_argument("--nu", type=float, default=1e-4)


def _add_solver_flags(parser):
    parser.add_argument("--max-iter", type=int, default=2000)
    parser.add_argument("--abs-tol", type=float, default=1e-6)
    parser.add_argument("--rel-tol", type=float, default=1e-4)
    parser.add_argument("--kappa-init", type=float, default=1.0)
    parser.add_argument("--s1-mode", choices=("exact", "descent"), default="exact")


REG_NAMES = {"l": "lasso", "gl": "group_lasso", "en": "elastic_net"}


def _load_problem(args):
    X = read_matrix_csv(args.x)
    y = read_vector_csv(args.y)
    if y.size != X.shape[0]:
        raise InputFormatError(
            f"{args.y}: {y.size} targets for {X.shape[0]} instances in {args.x}"
        )
    groups = None
    if args.reg == "gl":
        if not args.groups:
            raise InputFormatError("--reg gl requires --groups FILE")
        groups = read_groups_json(args.groups, X.shape[1])
    return X, y, groups


def cmd_fit(args) -> int:
    X, y, groups = _load_problem(args)
    model = NVSDRegressor(
        kernel=args.kernel,
        width=_parse_sigma(args.sigma),
        degree=args.degree,
        offset=args.offset,
        regularizer=REG_NAMES[args.reg],
        groups=groups,
        mu=args.mu,
        tau=args.tau,
        nu=args.nu,
        normalize=args.normalize,
        kappa_init=args.kappa_init,
        abs_tol=args.abs_tol,
        rel_tol=args.rel_tol,
        max_iter=args.max_iter,
        s1_mode=args.s1_mode,
    )
    model.fit(X, y)
    save_model(model, args.model_out)
    report = {
        "command": "fit",
        "n": int(X.shape[0]),
        "d": int(X.shape[1]),
        "kernel": model_to_dict(model)["kernel"],
        "regularizer": REG_NAMES[args.reg],
        "tau": args.tau,
        "nu": args.nu,
        "mu": args.mu if args.reg == "en" else None,
        "normalize": bool(args.normalize),
        "support": [int(a) + 1 for a in model.support_],
        "derivative_norms": model.derivative_norms_.tolist(),
        "objective": float(model.objective_),
        "iterations": int(model.n_iter_),
        "converged": bool(model.converged_),
        "fitted_values": model.predict(X).tolist(),
        "diagnostics": model.solve_result_.diagnostics(),
    }
    atomic_write_text(args.report_out, json.dumps(report))
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    X = read_matrix_csv(args.x)
    if X.shape[1] != model.n_features_in_:
        raise InputFormatError(
            f"{args.x}:1: {X.shape[1]} columns, model expects {model.n_features_in_}"
        )
    write_predictions_csv(args.out, model.predict(X))
    return 0


def cmd_path(args) -> int:
    X, y, groups = _load_problem(args)
    tau_grid = None
    if args.taus != "auto":
        try:
            tau_grid = [float(t) for t in args.taus.split(",")]
        except ValueError:
            raise InputFormatError(
                "--taus must be 'auto' or a comma list of numbers"
            ) from None
    path = fit_path(
        X,
        y,
        kernel=args.kernel,
        width=_parse_sigma(args.sigma),
        degree=args.degree,
        offset=args.offset,
        regularizer=REG_NAMES[args.reg],
        groups=groups,
        nu=args.nu,
        tau_grid=tau_grid,
        tau_count=args.tau_count,
        tau_decades=args.tau_decades,
        normalize=args.normalize,
    )
    best_doc = None
    if args.x_val and args.y_val:
        X_val = read_matrix_csv(args.x_val)
        y_val = read_vector_csv(args.y_val)
        best = select_by_validation(path, X_val, y_val)
        best_doc = {
            "best_index": int(path.best_index),
            "validation_mse": path.validation_mse.tolist(),
        }
        if args.model_out:
            save_model(best, args.model_out)
    report = {
        "command": "path",
        "tau_grid": path.tau_grid.tolist(),
        "entries": [
            {
                "tau": e.tau,
                "mu": e.mu,
                "support": [int(a) + 1 for a in e.model.support_],
                "support_size": int(e.model.support_.size),
                "iterations": int(e.iterations),
                "converged": bool(e.converged),
                "objective": float(e.model.objective_),
            }
            for e in path.entries
        ],
    }
    if best_doc:
        report.update(best_doc)
    atomic_write_text(args.out, json.dumps(report))
    return 0


def cmd_bench(args) -> int:
    methods = [MethodSpec.parse(m) for m in args.methods]
    config = BenchConfig(
        val_size=args.val_size,
        test_size=args.test_size,
        tau_count=args.tau_count,
        tau_decades=args.tau_decades,
        nu=args.nu,
        poly_offset=args.offset,
        abs_tol=args.abs_tol,
        rel_tol=args.rel_tol,
        max_iter=args.max_iter,
        balance_mode=args.balance_mode,
        selection=args.selection,
        normalize=args.normalize,
    )
    result = run_experiment(
        args.which,
        methods,
        args.sizes,
        reps=args.reps,
        base_seed=args.seed,
        config=config,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    raw_path = os.path.join(args.out_dir, f"{args.which}_raw.csv")
    agg_path = os.path.join(args.out_dir, f"{args.which}_aggregate.csv")
    diag_path = os.path.join(args.out_dir, f"{args.which}_diagnostics.json")
    atomic_write_text(raw_path, raw_csv_text(result))
    atomic_write_text(agg_path, aggregate_csv_text(result, args.sizes))
    atomic_write_text(diag_path, json.dumps({"cells": result.diagnostics}))
    print(format_aggregate_table(result, args.sizes))
    if not result.ok_rows():
        print("all benchmark cells failed", file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvsd",
        description="Nonlinear variable selection via derivative-based sparsity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a single model")
    p_fit.add_argument("--x", required=True, help="inputs CSV (header row)")
    p_fit.add_argument("--y", required=True, help="targets CSV (single column)")
    _add_kernel_flags(p_fit)
    _add_reg_flags(p_fit)
    p_fit.add_argument("--tau", type=float, required=True)
    p_fit.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="z-score inputs and center targets (default on for file data)",
    )
    _add_solver_flags(p_fit)
    p_fit.add_argument("--model-out", default="model.json")
    p_fit.add_argument("--report-out", default="report.json")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="predict with a saved model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--x", required=True)
    p_pred.add_argument("--out", default="predictions.csv")
    p_pred.set_defaults(func=cmd_predict)

    p_path = sub.add_parser("path", help="fit a regularization path")
    p_path.add_argument("--x", required=True)
    p_path.add_argument("--y", required=True)
    p_path.add_argument("--x-val")
    p_path.add_argument("--y-val")
    _add_kernel_flags(p_path)
    _add_reg_flags(p_path)
    p_path.add_argument("--taus", default="auto", help="'auto' or comma list")
    p_path.add_argument("--tau-count", type=int, default=50)
    p_path.add_argument("--tau-decades", type=float, default=3.0)
    p_path.add_argument(
        "--normalize", action=argparse.BooleanOptionalAction, default=True
    )
    p_path.add_argument("--out", default="path.json")
    p_path.add_argument("--model-out")
    p_path.set_defaults(func=cmd_path)

    p_bench = sub.add_parser("bench", help="run a synthetic benchmark")
    p_bench.add_argument("which", choices=("e1", "e2", "e3"))
    p_bench.add_argument(
        "--methods",
        nargs="+",
        default=["krls", "nvsd-l", "nvsd-gl", "nvsd-en"],
        help="krls / nvsd-l / nvsd-gl / nvsd-en, optionally with '+debias'",
    )
    p_bench.add_argument(
        "--sizes", nargs="+", type=int, default=[30, 50, 70, 90, 110]
    )
    p_bench.add_argument("--reps", type=int, default=10)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out-dir", default=".")
    p_bench.add_argument("--val-size", type=int, default=1000)
    p_bench.add_argument("--test-size", type=int, default=1000)
    p_bench.add_argument("--tau-count", type=int, default=50)
    p_bench.add_argument("--tau-decades", type=float, default=3.0)
    p_bench.add_argument("--nu", type=float, default=1e-4)
    p_bench.add_argument("--offset", type=float, default=1.0)
    p_bench.add_argument("--max-iter", type=int, default=4000)
    p_bench.add_argument("--abs-tol", type=float, default=5e-8)
    p_bench.add_argument("--rel-tol", type=float, default=1e-9)
    p_bench.add_argument(
        "--balance-mode", choices=("raw", "relative"), default="relative"
    )
    p_bench.add_argument(
        "--selection", choices=("refit", "base"), default="refit"
    )
    p_bench.add_argument(
        "--normalize", action=argparse.BooleanOptionalAction, default=False
    )
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, MemoryError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
