"""Command-line front end: ``hermite-limits <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 a verdict
failed.  Errors are reported as one line of JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import mc_lab, white_noise
from .core_math import limit_prediction
from .errors import ConfigError
from .functionals import decomposition_sides, relative_gap
from .mc_lab import dumps, kind_from_name, parse_eps_list
from .path_engine import GridSpec, build_paths, write_binary, write_csv

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_VERDICT = 0, 1, 2, 3

IDENTITY_TOLERANCES = {"e7": 1e-6, "kernel-product": 1e-4, "hat-decomposition": 1e-12}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _positive(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_output(p, formats=("json", "csv")):
    p.add_argument("--out", help="write to this file instead of stdout")
    p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hermite-limits",
                     description="Simulation and verification of limit theorems for nonlinear "
                                 "functionals of fractional Brownian motion.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("constants", help="regime, normalization and limiting constant",
                       description="Regime classification, normalization exponent and limiting "
                                   "constant of a functional (Hermite variation, Tilde, Breve or "
                                   "Hat) at a given Hurst index.")
    p.add_argument("--kind", required=True, choices=["hermite", "tilde", "breve", "hat"])
    p.add_argument("--hurst", required=True, type=float)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--T", type=_positive, default=1.0)
    _add_output(p)

    p = sub.add_parser("paths", help="sample fBm paths",
                       description="Exact fractional Brownian motion paths by circulant embedding "
                                   "or Toeplitz Cholesky; a pair gives two independent paths.")
    p.add_argument("--hurst", required=True, type=float)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--T-total", dest="T_total", required=True, type=_positive)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--method", choices=["circulant", "cholesky"], default="circulant")
    p.add_argument("--pair", action="store_true")
    p.add_argument("--out", required=True, help="output file; a pair adds _1/_2 before the suffix")
    p.add_argument("--format", choices=["csv", "binary"], default="csv")

    p = sub.add_parser("experiment", help="Monte Carlo experiment with verdicts",
                       description="Monte Carlo second moments, normalized variances, KS tests and "
                                   "scaling regression of a functional, checked against the exact "
                                   "finite-lag second moment and the predicted limit.")
    p.add_argument("--config", help="JSON experiment config (overrides nothing; exclusive with inline flags)")
    p.add_argument("--kind", choices=["hermite", "tilde", "breve", "hat"])
    p.add_argument("--hurst", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--T", type=_positive)
    p.add_argument("--eps", help="comma-separated lags, e.g. 2^-6,2^-8")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", help="mesh (default: smallest lag / 16)")
    p.add_argument("--method", choices=["circulant", "cholesky"])
    p.add_argument("--significance", type=float)
    p.add_argument("--no-exact", dest="exact_check", action="store_false", default=None,
                   help="skip the exact second-moment comparison")
    p.add_argument("--samples-dir", help="write per-lag sample CSVs into this directory")
    p.add_argument("--no-timing", action="store_true", help="omit wall_time from the report")
    _add_output(p)

    p = sub.add_parser("identity", help="residuals of exact identities",
                       description="Residual tables for the increment identity of the K+ operator "
                                   "(e7), the product identity of the fBm kernel derivatives "
                                   "(kernel-product) and the pathwise Hat/Hermite decomposition "
                                   "(hat-decomposition).")
    p.add_argument("--which", required=True, choices=sorted(IDENTITY_TOLERANCES))
    p.add_argument("--hurst", type=_floats, default=[0.3, 0.5, 0.7],
                   help="comma-separated Hurst indices")
    p.add_argument("--xi", type=_ints, default=[0, 1, 2, 3], help="Hermite function indices (e7)")
    p.add_argument("--u", type=_floats, default=[0.2, 0.5, 1.0], help="increment start points (e7)")
    p.add_argument("--eps-list", default="2^-3,2^-6", help="lags (e7, hat-decomposition)")
    p.add_argument("--s", type=float, default=0.3, help="first time (kernel-product)")
    p.add_argument("--r", type=float, default=0.7, help="second time (kernel-product)")
    p.add_argument("--seed", type=int, default=0, help="base seed (hat-decomposition)")
    p.add_argument("--pairs", type=int, default=1, help="seeded pairs (hat-decomposition)")
    p.add_argument("--n", type=int, default=4096, help="grid steps per unit horizon (hat-decomposition)")
    p.add_argument("--T", type=_positive, default=1.0)
    _add_output(p)

    p = sub.add_parser("stransform", help="finite-lag versus limiting S-transform",
                       description="S-transform of a functional against the exponential of a "
                                   "Hermite test function, at finite lags and in the limit, "
                                   "through the K+ operator.")
    p.add_argument("--kind", required=True, choices=["hermite", "tilde", "breve", "hat"])
    p.add_argument("--hurst", required=True, type=float)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--xi", type=int, default=1, help="Hermite function index")
    p.add_argument("--eps-list", required=True)
    p.add_argument("--T", type=_positive, default=1.0)
    _add_output(p)

    p = sub.add_parser("contraction", help="contraction bound along lags",
                       description="Monte Carlo estimate of the three-dimensional bound on the "
                                   "r-th contraction of the Hermite-variation kernel, whose decay "
                                   "drives the fourth-moment CLT.")
    p.add_argument("--hurst", required=True, type=float)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--eps-list", required=True)
    p.add_argument("--points", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=_positive, default=1.0)
    _add_output(p)
    return parser


# ---------------------------------------------------------------------------
# Output


def _render(payload, fmt: str) -> str:
    if fmt == "json":
        return dumps(payload) + "\n"
    rows = payload["rows"] if isinstance(payload, dict) else payload
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _emit(payload, args, stdout) -> None:
    text = _render(payload, getattr(args, "format", "json"))
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands


def _constants(args, stdout) -> int:
    kind = kind_from_name(args.kind, args.k)
    pred = limit_prediction(kind, args.hurst, T=args.T)
    payload = pred.to_dict()
    if args.format == "csv":
        payload = {"rows": [{k: v for k, v in payload.items() if k != "extras"}]}
    _emit(payload, args, stdout)
    return EXIT_OK


def _paths(args, stdout) -> int:
    grid = GridSpec.from_total(args.T_total, args.n)
    result = build_paths(args.hurst, grid, args.seed, args.method, pair=args.pair)
    members = [result.first, result.second] if args.pair else [result]
    target = Path(args.out)
    written = []
    for i, path in enumerate(members, start=1):
        dest = target.with_name(f"{target.stem}_{i}{target.suffix}") if args.pair else target
        (write_csv if args.format == "csv" else write_binary)(path, dest)
        written.append({"file": str(dest), "seed": path.seed})
    stdout.write(dumps({"hurst": args.hurst, "n": grid.n, "delta": grid.delta,
                        "method": args.method, "paths": written}) + "\n")
    return EXIT_OK


_INLINE = ("kind", "hurst", "k", "T", "eps", "replicas", "seed", "delta", "method",
           "significance", "exact_check")


def _experiment(args, stdout) -> int:
    inline = {key: getattr(args, key) for key in _INLINE if getattr(args, key) is not None}
    if args.config:
        if inline:
            raise ConfigError("--config cannot be combined with inline experiment flags")
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    else:
        missing = [f"--{key}" for key in ("kind", "hurst", "eps", "replicas") if key not in inline]
        if missing:
            raise ConfigError(f"missing required flags: {', '.join(missing)} (or use --config)")
        data = inline
    config = mc_lab.ExperimentConfig.from_dict(data)
    report = mc_lab.run_experiment(config)
    if args.samples_dir:
        folder = Path(args.samples_dir)
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(len(report.samples)):
            report.write_samples_csv(i, folder / f"samples_eps{i}.csv")
    if args.format == "csv":
        _emit({"rows": report.per_eps}, args, stdout)
    else:
        payload = report.to_dict(include_timing=not args.no_timing)
        _emit(payload, args, stdout)
    return EXIT_OK if report.passed else EXIT_VERDICT


def _identity(args, stdout) -> int:
    tol = IDENTITY_TOLERANCES[args.which]
    rows = []
    if args.which == "e7":
        eps_values = parse_eps_list(args.eps_list)
        for h in args.hurst:
            ctx = white_noise.KernelContext.calibrate(h)
            for n in args.xi:
                xi = white_noise.TestFunction.hermite(n)
                for u in args.u:
                    for eps in eps_values:
                        lhs, rhs = white_noise.increment_sides(ctx, xi, u, eps)
                        rows.append({"hurst": h, "xi": n, "u": u, "eps": eps, "lhs": lhs,
                                     "rhs": rhs, "residual": relative_gap(lhs, rhs)})
    elif args.which == "kernel-product":
        for h in args.hurst:
            ctx = white_noise.KernelContext.calibrate(h)
            lhs, rhs = white_noise.kernel_product_sides(ctx, args.s, args.r)
            rows.append({"hurst": h, "s": args.s, "r": args.r, "lhs": lhs, "rhs": rhs,
                         "residual": relative_gap(lhs, rhs)})
    else:
        eps_values = parse_eps_list(args.eps_list)
        grid = GridSpec.covering(args.T, max(eps_values), args.T / args.n)
        for h in args.hurst:
            for j in range(args.pairs):
                seed = mc_lab.mix64(args.seed, j)
                pair = build_paths(h, grid, seed, pair=True)
                for eps in eps_values:
                    direct, via = decomposition_sides(pair.first.values, pair.second.values, h,
                                                      grid, args.T, eps)
                    rows.append({"hurst": h, "seed": seed, "eps": eps, "direct": direct,
                                 "via_hermite": via, "residual": relative_gap(direct, via)})
    worst = max(r["residual"] for r in rows)
    payload = {"identity": args.which, "tolerance": tol, "max_residual": worst,
               "pass": worst < tol, "rows": rows}
    _emit(payload, args, stdout)
    return EXIT_OK if worst < tol else EXIT_VERDICT


def _stransform(args, stdout) -> int:
    kind = kind_from_name(args.kind, args.k)
    ctx = white_noise.KernelContext.calibrate(args.hurst)
    xi = white_noise.TestFunction.hermite(args.xi)
    limit = white_noise.s_transform(ctx, kind, xi, args.T, 0.0)
    rows = []
    for eps in parse_eps_list(args.eps_list):
        value = white_noise.s_transform(ctx, kind, xi, args.T, eps)
        gap = abs(value - limit)
        rows.append({"eps": eps, "value": value, "limit": limit, "gap": gap,
                     "relative_gap": gap / abs(limit) if limit != 0 else math.inf})
    _emit({"kind": kind.label, "hurst": ctx.H, "xi": args.xi, "T": args.T, "limit": limit,
           "rows": rows}, args, stdout)
    return EXIT_OK


def _contraction(args, stdout) -> int:
    rows = []
    for eps in parse_eps_list(args.eps_list):
        est = mc_lab.contraction_norm_bound(args.hurst, args.k, args.r, args.T, eps, args.points,
                                            seed=args.seed)
        rows.append(est.to_dict())
    rows.sort(key=lambda r: -r["eps"])
    steps = list(zip(rows, rows[1:]))
    strict = all(b["value"] < a["value"] for a, b in steps)
    # an increase smaller than two combined standard errors is attributed to noise
    decreasing = all(b["value"] < a["value"] + 2 * math.hypot(a["std_error"], b["std_error"])
                     for a, b in steps)
    flagged = any(r["flagged"] for r in rows)
    _emit({"hurst": args.hurst, "k": args.k, "r": args.r, "T": args.T, "decreasing": decreasing,
           "strictly_decreasing": strict, "flagged": flagged, "rows": rows}, args, stdout)
    return EXIT_OK if decreasing else EXIT_VERDICT


_COMMANDS = {"constants": _constants, "paths": _paths, "experiment": _experiment,
             "identity": _identity, "stransform": _stransform, "contraction": _contraction}


def _fail(stderr, code: int, exc: BaseException) -> int:
    message = " ".join(str(exc).split()) or type(exc).__name__
    stderr.write(json.dumps({"error": type(exc).__name__, "exit": code, "message": message}) + "\n")
    return code


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args, stdout)
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except np.linalg.LinAlgError as exc:
        return _fail(stderr, EXIT_NUMERIC, exc)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        return _fail(stderr, EXIT_VALIDATION, exc)
    except ArithmeticError as exc:
        return _fail(stderr, EXIT_NUMERIC, exc)


def main() -> None:
    sys.exit(run_cli())
