"""Command-line front end: ``opda {run,synth,fstar,compare}``."""
import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import (
    ArgumentError,
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    OracleError,
    ParseError,
)
from .fileio import (
    _emit,
    load_config,
    merge_config_text,
    write_libsvm,
    write_trace,
)
from .numcore import RNG_ALGORITHM
from .objectives import make_objective, poly_preset
from .solvers import SOLVER_NAMES, run, solve_fstar
from .synth import make_synthetic

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

# flag dest -> config key
_DATA_FLAGS = {
    "data": "data",
    "loss": "loss",
    "poly": "poly",
    "dim": "dim",
    "normalize": "normalize",
    "lambda1": "lambda1",
    "lambda2": "lambda2",
}
_RUN_FLAGS = {
    "solver": "solver",
    "eta": "eta",
    "batch": "batch",
    "m_inner": "m_inner",
    "epochs": "max_outer",
    "seed": "seed",
    "trace": "trace",
    "sketch": "sketch",
    "memory": "memory",
    "rank": "rank",
    "fstar": "fstar",
    "anchor": "anchor_choice",
    "tol_gradmap": "tol_gradmap",
    "max_passes": "max_passes",
    "timing": "timing",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


def _data_args(p):
    p.add_argument("--config", help="run config file (key = value lines)")
    p.add_argument("--data", help="LIBSVM file")
    p.add_argument("--loss", choices=("logistic", "least_squares", "poly2d"))
    p.add_argument("--poly", choices=("fig1", "fig2"), help="polynomial preset for --loss poly2d")
    p.add_argument("--dim", type=int)
    p.add_argument("--normalize", action="store_const", const=True, help="scale rows to unit norm")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)


def _run_args(p):
    p.add_argument("--solver", choices=tuple(SOLVER_NAMES))
    p.add_argument("--eta", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--m-inner", dest="m_inner", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sketch", choices=("identity_cols", "gaussian", "prev_directions"))
    p.add_argument("--memory", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--fstar", type=float)
    p.add_argument("--anchor", choices=("average", "uniform_random"))
    p.add_argument("--tol-gradmap", dest="tol_gradmap", type=float)
    p.add_argument("--max-passes", dest="max_passes", type=float)
    p.add_argument("--timing", action="store_const", const=True, help="record wall time in traces")
    p.add_argument("--x0", help="comma-separated starting point (default: zeros)")


def build_parser():
    parser = _Parser(prog="opda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one solver and write its trace")
    _data_args(p)
    _run_args(p)
    p.add_argument("--trace", help="output trace CSV")
    p.add_argument("--meta", help="output JSON with run metadata")

    p = sub.add_parser("synth", help="write a synthetic LIBSVM dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=("linear", "logistic"), default="logistic")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fstar", help="print the optimal objective value")
    _data_args(p)
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500_000)

    p = sub.add_parser("compare", help="run a solver x stepsize grid")
    _data_args(p)
    _run_args(p)
    p.add_argument("--solvers", required=True, help="comma-separated solver names")
    p.add_argument("--eta-grid", dest="eta_grid", required=True, help="comma-separated stepsizes")
    p.add_argument("--budget", type=float, default=30.0, help="data-pass budget per cell")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _resolve(args, flag_map):
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read {args.config}: {exc.strerror}") from None
    overrides = {}
    for dest, key in flag_map.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides[key] = val
    base = Path(args.config).parent if args.config else None
    return load_config(merge_config_text(text, overrides), base_dir=base)


def _objective(meta):
    if meta.loss == "poly2d":
        return poly_preset(meta.poly, meta.lambda2)
    return make_objective(meta.loss, meta.dataset, meta.lambda2)


def _x0(args, dim):
    if not getattr(args, "x0", None):
        return np.zeros(dim)
    try:
        x0 = np.array([float(t) for t in args.x0.split(",")])
    except ValueError:
        raise ConfigError([f"--x0 {args.x0!r} is not a comma-separated list of numbers"]) from None
    if x0.shape[0] != dim:
        raise ConfigError([f"--x0 has {x0.shape[0]} entries, problem dimension is {dim}"])
    return x0


def _summary(result):
    last = result.final
    return (
        f"final_objective={last.objective:.17g} passes={last.data_passes:.17g} "
        f"wall_ms={result.stats['wall_ms']:.3f} nnz={last.nnz}"
    )


def cmd_run(args):
    cfg, meta = _resolve(args, {**_DATA_FLAGS, **_RUN_FLAGS})
    obj = _objective(meta)
    result = run(obj, cfg, _x0(args, obj.dim))
    if meta.trace:
        write_trace(result.trace, meta.trace)
    if args.meta:
        info = {
            "solver": cfg.solver_name,
            "eta": result.eta,
            "lambda1": cfg.lambda1,
            "lambda2": meta.lambda2,
            "seed": cfg.seed,
            "rng": RNG_ALGORITHM,
            **{k: v for k, v in result.stats.items() if k != "wall_ms"},
        }
        _emit(json.dumps(info, indent=2, sort_keys=True) + "\n", args.meta)
    print(_summary(result))
    return 0


def cmd_synth(args):
    ds, _ = make_synthetic(args.n, args.d, args.density, args.seed, args.model)
    write_libsvm(ds, args.out)
    return 0


def cmd_fstar(args):
    cfg, meta = _resolve(args, _DATA_FLAGS)
    value = solve_fstar(_objective(meta), cfg.lambda1, tol=args.tol, max_iter=args.max_iter)
    print(f"{value:.17g}")
    return 0


def _parse_list(text, kind, what):
    items = [t.strip() for t in (text or "").split(",") if t.strip()]
    if not items:
        raise ConfigError([f"{what} is empty"])
    try:
        return [kind(t) for t in items]
    except ValueError:
        raise ConfigError([f"{what} has a malformed entry: {text!r}"]) from None


def _run_cell(job):
    obj, cfg, x0, name, eta, path = job
    cell = replace(cfg, **dict(zip(("direction_mode", "baseline_mode"), SOLVER_NAMES[name])), eta=eta)
    try:
        result = run(obj, cell, x0)
    except DivergenceError as exc:
        return name, eta, path, None, str(exc)
    write_trace(result.trace, path)
    return name, eta, path, result.final, "ok"


def cmd_compare(args):
    solvers = _parse_list(args.solvers, str, "solver list")
    etas = _parse_list(args.eta_grid, float, "eta grid")
    bad = [s for s in solvers if s not in SOLVER_NAMES]
    bad += [f"eta {e} is not positive" for e in etas if not e > 0]
    if not args.budget > 0:
        bad.append("budget must be positive")
    if bad:
        raise ConfigError([f"unknown solver {b!r}" if b in solvers else b for b in bad])
    cfg, meta = _resolve(args, {**_DATA_FLAGS, **_RUN_FLAGS})
    obj = _objective(meta)
    fstar = cfg.fstar
    if fstar is None:
        fstar = solve_fstar(obj, cfg.lambda1)
    epochs = cfg.max_outer if args.epochs is not None else 10**9
    cfg = replace(cfg, fstar=fstar, max_passes=args.budget, max_outer=epochs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x0 = _x0(args, obj.dim)
    jobs = []
    for name in solvers:
        for k, eta in enumerate(etas):
            jobs.append((obj, cfg, x0, name, eta, str(out / f"{name}_eta{k}.csv")))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]

    rows = []
    for order, (name, eta, path, last, status) in enumerate(cells):
        sub = math.inf if last is None else last.suboptimality
        rows.append((sub, order, name, eta, path, last, status))
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "solver", "eta", "data_passes", "objective", "suboptimality", "status", "trace"])
    for rank, (sub, _, name, eta, path, last, status) in enumerate(rows, start=1):
        if last is None:
            w.writerow([rank, name, f"{eta:.17g}", "", "", "", status, Path(path).name])
        else:
            w.writerow(
                [
                    rank,
                    name,
                    f"{eta:.17g}",
                    f"{last.data_passes:.17g}",
                    f"{last.objective:.17g}",
                    f"{sub:.17g}",
                    status,
                    Path(path).name,
                ]
            )
    _emit(buf.getvalue(), out / "summary.csv")
    best = rows[0]
    print(f"best solver={best[2]} eta={best[3]:.17g} suboptimality={best[0]:.17g}")
    return 0


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "fstar": cmd_fstar, "compare": cmd_compare}


def _fail(category, detail, code):
    detail = " ".join(str(detail).split())
    print(f"error: {category}: {detail}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigError, ArgumentError, DimensionError) as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (DataError, ParseError) as exc:
        return _fail("data", exc, EXIT_DATA)
    except DivergenceError as exc:
        return _fail("divergence", exc, EXIT_DIVERGED)
    except OracleError as exc:
        return _fail("oracle", exc, EXIT_DIVERGED)
    except OSError as exc:
        return _fail("io", f"{exc.filename}: {exc.strerror}", EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
