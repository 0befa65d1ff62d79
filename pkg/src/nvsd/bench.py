"""Benchmark harness: replication protocol over the synthetic problems.

Each replication draws a fresh train/validation/test split (seeded by
``base_seed + replication``), fits every requested method, selects its
hyperparameters on the validation set and reports test RMSE, Tanimoto
selection error against the known support, and support size. Cells that
raise are recorded with an error status instead of aborting the run.

The kernel is fixed per experiment: third-order polynomial for e1/e2 and
a Gaussian of width 4 for e3.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .admm import SolverConfig
from .datasets import GENERATORS
from .estimators import KRLSRegressor, apply_prediction_operator, debias
from .kernels import KernelSpec, kernel_matrix
from .metrics import rmse, tanimoto_distance
from .operators import assemble_operators, prediction_matrix
from .path import fit_path, select_by_refit_validation, select_by_validation
from .prox import partial_derivative_norms

METHOD_BASES = ("krls", "nvsd-l", "nvsd-gl", "nvsd-en")
RAW_COLUMNS = (
    "experiment",
    "method",
    "train_size",
    "replication",
    "seed",
    "rmse",
    "selection_error",
    "support_size",
    "tau",
    "mu",
    "iterations",
    "status",
)
METRICS = ("rmse", "selection_error", "support_size")
KRLS_NU_GRID = tuple(float(x) for x in np.logspace(-8.0, 2.0, 25))


@dataclass(frozen=True)
class MethodSpec:
    base: str
    debias: bool = False

    def __post_init__(self):
        if self.base not in METHOD_BASES:
            raise ValueError(
                f"unknown method {self.base!r}; expected one of {METHOD_BASES}"
            )

    @classmethod
    def parse(cls, token) -> "MethodSpec":
        if isinstance(token, MethodSpec):
            return token
        name = token.strip().lower()
        deb = name.endswith("+debias")
        if deb:
            name = name[: -len("+debias")]
        return cls(name, deb)

    @property
    def label(self) -> str:
        return self.base + ("+debias" if self.debias else "")


@dataclass(frozen=True)
class BenchConfig:
    val_size: int = 1000
    test_size: int = 1000
    tau_count: int = 50
    tau_decades: float = 3.0
    mu_grid: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    nu: float = 1e-4
    krls_nu_grid: tuple = KRLS_NU_GRID
    poly_offset: float = 1.0
    # tolerances tight enough that converged fits keep the phi-vs-Z-omega
    # derivative-norm agreement within 1e-6 at the raw problem scales
    abs_tol: float = 5e-8
    rel_tol: float = 1e-9
    max_iter: int = 4000
    balance_mode: str = "relative"
    selection: str = "refit"  # "refit" (debiased validation) or "base"
    normalize: bool = False


@dataclass
class ExperimentResult:
    which: str
    rows: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def ok_rows(self) -> list:
        return [r for r in self.rows if r["status"] == "ok"]

    def aggregate(self) -> dict:
        """(method, train_size) -> {metric: (mean, std)} over ok replications."""
        cells: dict = {}
        for row in self.ok_rows():
            cells.setdefault((row["method"], row["train_size"]), []).append(row)
        out = {}
        for key, rows in cells.items():
            out[key] = {
                metric: (
                    float(np.mean([r[metric] for r in rows])),
                    float(np.std([r[metric] for r in rows])),
                )
                for metric in METRICS
            }
        return out


def experiment_kernel(which: str, config: BenchConfig) -> KernelSpec:
    if which in ("e1", "e2"):
        return KernelSpec.polynomial(degree=3, offset=config.poly_offset)
    if which == "e3":
        return KernelSpec.gaussian(4.0)
    raise ValueError(f"unknown experiment {which!r}")


def thread_cap(default: int = 1) -> int:
    raw = os.environ.get("NVSD_THREADS", "")
    try:
        value = int(raw) if raw else default
    except ValueError:
        value = default
    return max(1, value)


def _worker_init():
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1)
    except ImportError:
        pass


def _empty_row(which, method: MethodSpec, size, rep, seed) -> dict:
    return {
        "experiment": which,
        "method": method.label,
        "train_size": size,
        "replication": rep,
        "seed": seed,
        "rmse": None,
        "selection_error": None,
        "support_size": None,
        "tau": None,
        "mu": None,
        "iterations": None,
        "status": "ok",
    }


def _run_krls(method, spec, config, data, row):
    X_tr, y_tr, X_val, y_val, X_te, y_te = data
    n = X_tr.shape[0]
    K = kernel_matrix(spec, X_tr)
    w, V = np.linalg.eigh(K)
    w = np.maximum(w, 0.0)
    vty = V.T @ y_tr
    K_val = kernel_matrix(spec, X_val, X_tr)
    best_nu, best_mse = None, np.inf
    for nu in config.krls_nu_grid:
        alpha = V @ (vty / (w + n * nu))
        resid = K_val @ alpha - y_val
        mse = float(resid @ resid) / y_val.size
        if mse < best_mse:
            best_nu, best_mse = nu, mse
    model = KRLSRegressor(
        kernel=spec.family,
        width=spec.width,
        degree=spec.degree,
        offset=spec.offset,
        nu=best_nu,
        normalize=config.normalize,
    ).fit(X_tr, y_tr)
    row["rmse"] = rmse(model.predict(X_te), y_te)
    row["support_size"] = int(model.support_.size)
    row["iterations"] = 0
    return model.support_, {"selected_nu": best_nu}


def _path_consistency(path) -> dict:
    """Cross-check the solver's derivative norms against Z omega blocks."""
    ops = path.ops
    max_mismatch = 0.0
    zero_exact = True
    converged = 0
    for entry in path.entries:
        if not entry.converged:
            continue
        converged += 1
        model = entry.model
        recomputed = partial_derivative_norms(ops.Z @ model.omega_, ops.n)
        max_mismatch = max(
            max_mismatch,
            float(np.max(np.abs(recomputed - model.derivative_norms_))),
        )
        phi_blocks = model.solve_result_.phi.reshape(ops.d, ops.n)
        mask = np.zeros(ops.d, dtype=bool)
        mask[model.support_] = True
        if not np.all(phi_blocks[~mask] == 0.0):
            zero_exact = False
    return {
        "entries": len(path.entries),
        "converged": converged,
        "max_derivative_norm_mismatch": max_mismatch,
        "zero_blocks_exact": zero_exact,
    }


def _run_nvsd(method, spec, config, data, ops, P_val, P_te, groups, row):
    X_tr, y_tr, X_val, y_val, X_te, y_te = data
    kind = {"nvsd-l": "lasso", "nvsd-gl": "group_lasso", "nvsd-en": "elastic_net"}[
        method.base
    ]
    solver_config = SolverConfig(
        tau=1.0,
        nu=config.nu,
        abs_tol=config.abs_tol,
        rel_tol=config.rel_tol,
        max_iter=config.max_iter,
        residual_balance_mode=config.balance_mode,
    )
    path = fit_path(
        X_tr,
        y_tr,
        kernel=spec.family,
        width=spec.width,
        degree=spec.degree,
        offset=spec.offset,
        regularizer=kind,
        groups=groups if kind == "group_lasso" else None,
        nu=config.nu,
        config=solver_config,
        tau_count=config.tau_count,
        tau_decades=config.tau_decades,
        mu_grid=config.mu_grid if kind == "elastic_net" else None,
        normalize=config.normalize,
        ops=ops,
    )
    if config.selection == "refit":
        best, refit = select_by_refit_validation(
            path, X_tr, y_tr, X_val, y_val, nu=config.nu
        )
    else:
        best = select_by_validation(path, X_val, y_val, prediction_operator=P_val)
        refit = None
    entry = path.entries[path.best_index]
    if method.debias:
        final = refit if refit is not None else debias(best, X_tr, y_tr)
        preds = final.predict(X_te)
    elif P_te is not None:
        preds = apply_prediction_operator(best, P_te)
    else:
        preds = best.predict(X_te)
    row["rmse"] = rmse(preds, y_te)
    row["support_size"] = int(best.support_.size)
    row["tau"] = float(entry.tau)
    row["mu"] = float(entry.mu) if entry.mu is not None else None
    row["iterations"] = int(entry.iterations)
    return best.support_, _path_consistency(path)


def _run_task(args) -> tuple:
    which, size, rep, base_seed, methods, config = args
    seed = base_seed + rep
    total = size + config.val_size + config.test_size
    ds = GENERATORS[which](total, seed)
    X_tr, y_tr = ds.X[:size], ds.y[:size]
    X_val = ds.X[size : size + config.val_size]
    y_val = ds.y[size : size + config.val_size]
    X_te = ds.X[size + config.val_size :]
    y_te = ds.y[size + config.val_size :]
    data = (X_tr, y_tr, X_val, y_val, X_te, y_te)
    spec = experiment_kernel(which, config)
    truth = {a + 1 for a in ds.true_support}

    ops = P_val = P_te = None
    rows, diags = [], {}
    for method in methods:
        row = _empty_row(which, method, size, rep, seed)
        try:
            if method.base == "krls":
                support, diag = _run_krls(method, spec, config, data, row)
            else:
                if ops is None and not config.normalize:
                    ops = assemble_operators(spec, X_tr)
                    P_val = prediction_matrix(spec, X_tr, X_val)
                    P_te = prediction_matrix(spec, X_tr, X_te)
                support, diag = _run_nvsd(
                    method, spec, config, data, ops, P_val, P_te, ds.groups, row
                )
            row["selection_error"] = tanimoto_distance(
                {int(a) + 1 for a in support}, truth
            )
            diags[(method.label, size, rep)] = diag
        except Exception as exc:  # per-cell failure: record, keep going
            row["status"] = f"error: {type(exc).__name__}: {exc}"
        rows.append(row)
    return (size, rep), rows, diags


def run_experiment(
    which: str,
    methods,
    train_sizes,
    reps: int,
    base_seed: int = 0,
    config: BenchConfig | None = None,
    n_jobs: int | None = None,
) -> ExperimentResult:
    which = which.lower()
    if which not in GENERATORS:
        raise ValueError(f"unknown experiment {which!r}")
    config = config or BenchConfig()
    methods = tuple(MethodSpec.parse(m) for m in methods)
    train_sizes = tuple(int(s) for s in train_sizes)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    tasks = [
        (which, size, rep, base_seed, methods, config)
        for size in train_sizes
        for rep in range(reps)
    ]
    n_jobs = thread_cap() if n_jobs is None else max(1, n_jobs)
    result = ExperimentResult(which=which)
    if n_jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(
            max_workers=min(n_jobs, len(tasks)), initializer=_worker_init
        ) as pool:
            outputs = list(pool.map(_run_task, tasks))
    else:
        outputs = [_run_task(t) for t in tasks]
    for _, rows, diags in outputs:
        result.rows.extend(rows)
        for key, diag in diags.items():
            result.diagnostics["{}|{}|{}".format(*key)] = diag
    return result


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def raw_csv_text(result: ExperimentResult) -> str:
    lines = [",".join(RAW_COLUMNS)]
    for row in result.rows:
        cells = [_format_value(row[c]) for c in RAW_COLUMNS]
        cells[-1] = cells[-1].replace(",", ";")  # keep error messages one field
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def aggregate_csv_text(result: ExperimentResult, train_sizes) -> str:
    agg = result.aggregate()
    sizes = [int(s) for s in train_sizes]
    header = ["experiment", "metric", "method"]
    header += [f"mean_{s}" for s in sizes] + [f"std_{s}" for s in sizes]
    methods = []
    for row in result.rows:
        if row["method"] not in methods:
            methods.append(row["method"])
    lines = [",".join(header)]
    for metric in METRICS:
        for method in methods:
            cells = [result.which, metric, method]
            for s in sizes:
                stats = agg.get((method, s))
                cells.append(repr(stats[metric][0]) if stats else "")
            for s in sizes:
                stats = agg.get((method, s))
                cells.append(repr(stats[metric][1]) if stats else "")
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_aggregate_table(result: ExperimentResult, train_sizes) -> str:
    agg = result.aggregate()
    sizes = [int(s) for s in train_sizes]
    methods = []
    for row in result.rows:
        if row["method"] not in methods:
            methods.append(row["method"])
    width = max([len(m) for m in methods] + [10])
    lines = [f"experiment {result.which}: mean over replications"]
    header = " " * (width + 17) + "".join(f"{s:>10}" for s in sizes)
    lines.append(header)
    for metric in METRICS:
        for method in methods:
            label = f"{metric:>15} {method:<{width}}"
            vals = []
            for s in sizes:
                stats = agg.get((method, s))
                vals.append(f"{stats[metric][0]:>10.4f}" if stats else " " * 10)
            lines.append(label + "".join(vals))
    return "\n".join(lines)
