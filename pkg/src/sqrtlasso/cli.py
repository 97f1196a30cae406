"""Command-line interface: ``sqrtlasso {fit,certify,diagnose,simulate}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration
error. Failures print a JSON object with ``error``/``message`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .certify import check_kkt
from .core import Dataset
from .diagnostics import design_report
from .exceptions import EnumerationTooLarge, InvalidParameter, SqrtLassoError
from .penalty import Algorithm1Params, PenaltyKind, PenaltyScheme, lambda_sqrt_lasso, run_algorithm1
from .postsel import ols_post
from .simulate import ConfigError, McConfig, list_presets, load_preset, run_mc
from .solvers import SolverOptions, fit

logger = logging.getLogger("sqrtlasso")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest(subcommand, params, inputs, seed, started):
    return {
        "subcommand": subcommand,
        "parameters": params,
        "inputs": {str(p): _digest(p) for p in inputs},
        "seed": seed,
        "tool_version": __version__,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def read_csv(path, response=None):
    """Header row, comma separated, '.' decimals; missing values are an error.

    Returns (column names of the design, design matrix, response or None).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if response is not None and response not in header:
        raise UsageError(f"{path}: response column {response!r} not in header", path="response")
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise UsageError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise UsageError(f"{path}:{i}: missing or non-numeric value {cell!r} in column {header[j]!r}")
            if not np.isfinite(values[i - 2, j]):
                raise UsageError(f"{path}:{i}: non-finite value in column {header[j]!r}")
    if values.shape[0] == 0:
        raise UsageError(f"{path}: no data rows")
    if response is None:
        return header, values, None
    k = header.index(response)
    names = header[:k] + header[k + 1:]
    return names, np.delete(values, k, axis=1), values[:, k]


def read_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        return np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}")


def _int_list(text):
    if text is None or text == "":
        return []
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _add_penalty_flags(p):
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--c", type=float, default=1.01)
    p.add_argument("--u-n", type=float, default=None)
    p.add_argument("--w", type=float, default=2.0)
    p.add_argument("--max-loading-iters", type=int, default=15)
    p.add_argument("--loading-tol", type=float, default=1e-4)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="fixed penalty level; skips loading estimation")
    p.add_argument("--loadings-file", default=None,
                   help="JSON list or one-column CSV of loadings for --lambda")


def _add_solver_flags(p):
    p.add_argument("--method", choices=["cd", "fo"], default="cd")
    p.add_argument("--tol", type=float, default=1e-10)


def build_parser():
    parser = _Parser(prog="sqrtlasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the square-root lasso to a CSV")
    p.add_argument("csv_path")
    p.add_argument("--response", required=True)
    _add_penalty_flags(p)
    _add_solver_flags(p)
    p.add_argument("--post", action="store_true", help="also refit OLS on the selected support")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=".")

    p = sub.add_parser("certify", help="certify a fit.json against its data")
    p.add_argument("csv_path")
    p.add_argument("--response", required=True)
    p.add_argument("--fit", dest="fit_path", required=True)
    p.add_argument("--kkt-tol", type=float, default=1e-6)
    p.add_argument("--gap-tol", type=float, default=1e-8)
    p.add_argument("--out", default=".")

    p = sub.add_parser("diagnose", help="design diagnostics as JSON")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", dest="csv_path")
    src.add_argument("--gram", dest="gram_path")
    p.add_argument("--response", default=None)
    p.add_argument("--m", default="1,2")
    p.add_argument("--T", dest="support", default="")
    p.add_argument("--c", type=float, default=1.01)
    p.add_argument("--c-bar", type=float, default=None)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--randomized", action="store_true")
    p.add_argument("--out", default=".")

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p.add_argument("config_path", nargs="?", default=None)
    p.add_argument("--preset", default=None, help=f"bundled config: one of {', '.join(list_presets())}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--reps", type=int, default=None, help="override n_reps")
    p.add_argument("--out", default=".")
    return parser


def _load_loadings(path, p):
    text = Path(path).read_text()
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = read_matrix(path).reshape(-1).tolist()
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != p:
        raise UsageError(f"{path}: {values.size} loadings for {p} columns")
    return values


def cmd_fit(args):
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    names, raw_x, y = read_csv(args.csv_path, args.response)
    dataset = Dataset.from_raw(raw_x, y)
    inputs = [args.csv_path]
    options = SolverOptions(tol=args.tol, method=args.method, seed=args.seed)
    trace = None
    if args.lam is not None:
        loadings = np.ones(dataset.p)
        if args.loadings_file:
            loadings = _load_loadings(args.loadings_file, dataset.p)
            inputs.append(args.loadings_file)
        scheme = PenaltyScheme(args.lam, loadings, PenaltyKind.CUSTOM, {"c": args.c})
    else:
        params = Algorithm1Params(alpha=args.alpha, c=args.c, u_n=args.u_n, w=args.w,
                                  max_iter=args.max_loading_iters, tol=args.loading_tol)
        scheme, trace = run_algorithm1(
            dataset, params,
            lambda ds, sch, warm: fit(ds, sch, SolverOptions(tol=args.tol, method=args.method,
                                                             warm_start=warm)))
    result = fit(dataset, scheme, options)
    cert = check_kkt(result, dataset, scheme)
    out = {
        "columns": names,
        "col_scales": dataset.col_scales.tolist(),
        "beta_normalized": result.beta.tolist(),
        "beta_raw": dataset.to_raw_scale(result.beta).tolist(),
        "support": result.support.tolist(),
        "q_hat": result.q_hat,
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "method": result.method,
        "scheme": scheme.to_dict(),
    }
    if trace is not None:
        out["loading_trace"] = {"refinements": trace.refinements, "changes": trace.changes,
                                "stop_reason": trace.stop_reason.value}
    if args.post:
        post = ols_post(dataset, result.support)
        out["post"] = {"beta_normalized": post.beta.tolist(),
                       "beta_raw": dataset.to_raw_scale(post.beta).tolist(), "q_hat": post.q_hat}
    outdir = Path(args.out)
    write_atomic(outdir / "fit.json", _dumps(out))
    write_atomic(outdir / "certificate.json", _dumps(cert.to_dict()))
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    write_atomic(outdir / "manifest.json", _dumps(_manifest("fit", params, inputs, args.seed, started)))
    print(_dumps({"support": out["support"], "beta_raw": out["beta_raw"], "certified": cert.passed}), end="")
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def cmd_certify(args):
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    names, raw_x, y = read_csv(args.csv_path, args.response)
    dataset = Dataset.from_raw(raw_x, y)
    saved = json.loads(Path(args.fit_path).read_text())
    try:
        scheme = PenaltyScheme.from_dict(saved["scheme"])
        beta = np.asarray(saved["beta_normalized"], dtype=float)
    except KeyError as exc:
        raise UsageError(f"{args.fit_path}: missing key {exc}", path=str(exc))
    cert = check_kkt(beta, dataset, scheme, tol=args.kkt_tol, gap_tol=args.gap_tol)
    text = _dumps(cert.to_dict())
    write_atomic(Path(args.out) / "certificate.json", text)
    params = {k: v for k, v in vars(args).items() if k != "func"}
    write_atomic(Path(args.out) / "manifest.json",
                 _dumps(_manifest("certify", params, [args.csv_path, args.fit_path], None, started)))
    print(text, end="")
    return EXIT_OK if cert.passed else EXIT_NUMERICAL


def cmd_diagnose(args):
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    support = _int_list(args.support)
    ms = _int_list(args.m)
    composite = lam = None
    if args.gram_path:
        source = read_matrix(args.gram_path)
        inputs = [args.gram_path]
    else:
        inputs = [args.csv_path]
        names, raw_x, y = read_csv(args.csv_path, args.response)
        source = Dataset.from_raw(raw_x, y if y is not None else np.zeros(raw_x.shape[0]))
        if y is not None and support:
            beta0 = ols_post(source, support).beta
            composite = source.y - source.x @ beta0
            lam = lambda_sqrt_lasso(source.n, source.p, c=args.c)
    report = design_report(source, ms, support, c_bar=args.c_bar, c=args.c, composite=composite,
                           lam=lam, n_samples=args.samples, seed=args.seed, randomized=args.randomized)
    text = _dumps(report.to_dict())
    write_atomic(Path(args.out) / "report.json", text)
    params = {k: v for k, v in vars(args).items() if k != "func"}
    write_atomic(Path(args.out) / "manifest.json",
                 _dumps(_manifest("diagnose", params, inputs, args.seed, started)))
    print(text, end="")
    return EXIT_OK


def cmd_simulate(args):
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    if args.seed is None:
        raise UsageError("simulate requires --seed", path="--seed")
    if (args.config_path is None) == (args.preset is None):
        raise UsageError("give exactly one of CONFIG_PATH or --preset")
    inputs = []
    if args.preset:
        raw = load_preset(args.preset).to_dict()
    else:
        inputs.append(args.config_path)
        try:
            raw = json.loads(Path(args.config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("$", "config must be a JSON object")
    raw = dict(raw)
    raw["seed"] = args.seed
    raw["threads"] = args.threads
    if args.reps is not None:
        raw["n_reps"] = args.reps
    config = McConfig.from_dict(raw)
    report = run_mc(config)
    outdir = Path(args.out)
    write_atomic(outdir / "report.csv", report.to_csv())
    write_atomic(outdir / "summary.json", _dumps(report.summary()))
    write_atomic(outdir / "manifest.json",
                 _dumps(_manifest("simulate", config.to_dict(), inputs, args.seed, started)))
    failed = sum(r["n_failed"] for r in report.rows)
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


COMMANDS = {"fit": cmd_fit, "certify": cmd_certify, "diagnose": cmd_diagnose, "simulate": cmd_simulate}


def _fail(code, exc, path=None):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if path is not None:
        payload["path"] = path
    if isinstance(exc, EnumerationTooLarge):
        payload["suggestion"] = "rerun with --randomized to subsample supports"
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None):
    level = os.environ.get("SQRT_LASSO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc, exc.path)
    except ConfigError as exc:
        return _fail(EXIT_USAGE, exc, exc.path)
    except (EnumerationTooLarge, InvalidParameter) as exc:
        return _fail(EXIT_USAGE, exc)
    except (FileNotFoundError, IsADirectoryError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (SqrtLassoError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, exc)


if __name__ == "__main__":
    sys.exit(main())
