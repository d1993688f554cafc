"""Command-line front end: ``gevrey <subcommand> [flags]``.

Rows go to stdout as JSON (an array of objects) or CSV (header row first,
floats with 17 significant digits).  Diagnostics go to stderr.  Exit codes:
0 success, 2 invalid arguments, 3 budget exhausted or an uncertified answer.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Sequence

from .budget import BUDGET_ENV, DEFAULT_MAX_CLASSES, DEFAULT_MAX_LEVELS, Budget, BudgetExhausted
from .complexity import ComplexityQuery, avg_error, info_complexity, wor_error
from .kernel import KernelParams
from .lattice import grid_count
from .sampler import DEFAULT_TAIL_FRAC, mc_avg_error, sample_path
from .spectrum import build_spectrum, power_trace, trace
from .tractability import classify, exp_rate_fit, geometric_n_grid, scan

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BUDGET = 3

_SETTINGS = {"wor": "worst", "worst": "worst", "avg": "average", "average": "average"}
_CRITERIA = {"abs": "ABS", "nor": "NOR"}


class _Uncertified(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_grid(text: str) -> list[int]:
    """``a,b,c`` or ``lo:hi`` (inclusive range)."""
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) != 2:
                raise ValueError
            return list(range(parts[0], parts[1] + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list or lo:hi, got {text!r}")


def _n_grid(text: str) -> list[int]:
    """``a,b,c`` or ``lo:hi:num`` (geometric, rounded to integers)."""
    try:
        if ":" in text:
            lo, hi, num = (int(v) for v in text.split(":"))
            return geometric_n_grid(lo, hi, num)
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list or lo:hi:num, got {text!r}")


def _setting(text: str) -> str:
    key = text.lower()
    if key not in _SETTINGS:
        raise argparse.ArgumentTypeError("setting must be wor or avg")
    return _SETTINGS[key]


def _criterion(text: str) -> str:
    key = text.lower()
    if key not in _CRITERIA:
        raise argparse.ArgumentTypeError("criterion must be abs or nor")
    return _CRITERIA[key]


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--max-classes", type=int, default=DEFAULT_MAX_CLASSES)
    common.add_argument("--max-levels", type=int, default=DEFAULT_MAX_LEVELS)
    common.add_argument("--time-ms", type=int, default=None, help=f"soft time cap per query (default: ${BUDGET_ENV} or 10000)")
    common.add_argument("--threads", type=int, default=1)

    kernel = argparse.ArgumentParser(add_help=False)
    kernel.add_argument("--alpha", type=float, required=True)
    kernel.add_argument("--beta", type=float, default=1.0)
    kernel.add_argument("--p", type=float, required=True)

    one_d = argparse.ArgumentParser(add_help=False)
    one_d.add_argument("--d", type=int, required=True)

    parser = argparse.ArgumentParser(prog="gevrey", description="Gevrey kernel spectra, errors and complexity.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", parents=[common, kernel, one_d], help="eigenvalue runs")
    sp.add_argument("--n", type=int, default=20, help="enumerate at least this many eigenvalues")
    sp.add_argument("--tail-tol", type=float, default=1e-10)

    tr = sub.add_parser("trace", parents=[common, kernel, one_d], help="trace or power-trace enclosure")
    tr.add_argument("--tau", type=float, default=1.0)
    tr.add_argument("--tail-tol", type=float, default=1e-10)

    ec = sub.add_parser("error-curve", parents=[common, kernel, one_d], help="n-th minimal errors")
    ec.add_argument("--n-grid", "--n", dest="n_grid", type=_n_grid, required=True)
    ec.add_argument("--setting", type=_setting, default="average")
    ec.add_argument("--tail-tol", type=float, default=1e-10)

    cx = sub.add_parser("complexity", parents=[common, kernel], help="information complexity")
    cx.add_argument("--d", "--d-grid", dest="d_grid", type=_int_grid, required=True)
    cx.add_argument("--eps", "--eps-grid", dest="eps_grid", type=_float_list, required=True)
    cx.add_argument("--setting", type=_setting, default="average")
    cx.add_argument("--criterion", type=_criterion, default="ABS")

    ct = sub.add_parser("count", parents=[common], help="lattice points with sum |k_i|^p <= m")
    ct.add_argument("--m", type=float, required=True)
    ct.add_argument("--d", type=int, required=True)
    ct.add_argument("--p", type=float, required=True)
    ct.add_argument("--strict", action="store_true", help="exclude the boundary sum |k_i|^p = m")

    sc = sub.add_parser("scan", parents=[common, kernel], help="complexity over an (eps, d) grid")
    sc.add_argument("--d-grid", "--d", dest="d_grid", type=_int_grid, required=True)
    sc.add_argument("--eps-grid", "--eps", dest="eps_grid", type=_float_list, required=True)
    sc.add_argument("--setting", type=_setting, default="average")
    sc.add_argument("--criterion", type=_criterion, default="NOR")
    sc.add_argument("--s", type=float, default=1.0)
    sc.add_argument("--t", type=float, default=1.0)

    cl = sub.add_parser("classify", parents=[common, kernel], help="tractability profile")
    cl.add_argument("--setting", type=_setting, default="average")
    cl.add_argument("--criterion", type=_criterion, default="ABS")
    cl.add_argument("--s", type=float, default=1.0)
    cl.add_argument("--t", type=float, default=1.0)

    ex = sub.add_parser("exprate", parents=[common, kernel, one_d], help="fit the exponential convergence rate")
    ex.add_argument("--n-grid", "--n", dest="n_grid", type=_n_grid, required=True)
    ex.add_argument("--setting", type=_setting, default="worst")

    sa = sub.add_parser("sample", parents=[common, kernel, one_d], help="dump one sample path")
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--trial", type=int, default=0)
    sa.add_argument("--tail-tol", type=float, default=DEFAULT_TAIL_FRAC, help="excluded fraction of the trace")

    mc = sub.add_parser("mc-check", parents=[common, kernel, one_d], help="Monte Carlo check of the average error")
    mc.add_argument("--n-grid", "--n", dest="n_grid", type=_n_grid, required=True)
    mc.add_argument("--trials", type=int, default=10_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--tail-tol", type=float, default=DEFAULT_TAIL_FRAC, help="excluded fraction of the trace")
    return parser


# ---------------------------------------------------------------------------
# output


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, (tuple, list)):
        return " ".join(_csv_cell(v) for v in value)
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, tuple):
        return [_json_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    return value


def _emit(rows: list[dict], fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps([_json_value(r) for r in rows]) + "\n")
        return
    writer = csv.writer(out, lineterminator="\n")
    header = list(rows[0]) if rows else []
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(row.get(k)) for k in header])


# ---------------------------------------------------------------------------
# subcommands


def _params(args, d=None) -> KernelParams:
    return KernelParams(args.alpha, args.beta, args.p, args.d if d is None else d)


def _cmd_spectrum(args, budget):
    spec = build_spectrum(_params(args), args.n, args.tail_tol, budget=budget)
    if not spec.complete:
        raise BudgetExhausted(f"spectrum incomplete: tail bound {spec.tail_upper:.3e}", spec)
    return spec.to_rows()


def _cmd_trace(args, budget):
    params = _params(args)
    est = trace(params, args.tail_tol, budget) if args.tau == 1.0 else power_trace(params, args.tau, args.tail_tol, budget)
    return [
        {
            "alpha": params.alpha,
            "beta": params.beta,
            "p": params.p,
            "d": params.d,
            "tau": args.tau,
            "lower": est.lower,
            "upper": est.upper,
        }
    ]


def _cmd_error_curve(args, budget):
    params = _params(args)
    rows = []
    if args.setting == "worst":
        for n in args.n_grid:
            e = wor_error(params, n, budget)
            rows.append({"n": n, "setting": "worst", "error_lo": e, "error_hi": e})
        return rows
    spec = build_spectrum(params, max(max(args.n_grid), 1), args.tail_tol, budget=budget)
    for n in args.n_grid:
        lo, hi = avg_error(params, n, args.tail_tol, spec=spec, budget=budget)
        rows.append({"n": n, "setting": "average", "error_lo": lo, "error_hi": hi})
    return rows


def _cmd_complexity(args, budget):
    rows = []
    uncertified = False
    for d in args.d_grid:
        for eps in args.eps_grid:
            res = info_complexity(ComplexityQuery(_params(args, d), eps, args.setting, args.criterion), budget)
            uncertified |= not res.certified
            if not res.certified:
                print(f"warning: d={d} eps={eps!r} not certified: {res.note}", file=sys.stderr)
            rows.append(res.as_row())
    if uncertified:
        raise _Uncertified(rows)
    return rows


def _cmd_count(args, budget):
    n = grid_count(args.m, args.d, args.p, strict=args.strict, budget=budget)
    return [{"m": args.m, "d": args.d, "p": args.p, "strict": args.strict, "count": n}]


def _cmd_scan(args, budget):
    table = scan(
        args.alpha,
        args.beta,
        args.p,
        args.eps_grid,
        args.d_grid,
        args.setting,
        args.criterion,
        st_pairs=((args.s, args.t),),
        threads=args.threads,
        budget=budget,
    )
    rows = [r.as_row() for r in table]
    if any(not r.result.certified for r in table):
        raise _Uncertified(rows)
    return rows


def _cmd_classify(args, budget):
    prof = classify(args.alpha, args.beta, args.p, args.setting, args.criterion)
    if args.format == "json":
        row = prof.as_dict()
        row["s"], row["t"] = args.s, args.t
        row["flags"]["ALG-(s,t)-WT"] = prof.alg_st_wt(args.s, args.t)
        row["flags"]["EXP-(s,t)-WT"] = prof.exp_st_wt(args.s, args.t)
        return [row]
    rows = [{"notion": k, "holds": v, "basis": prof.basis[k]} for k, v in prof.flags.items()]
    st = f"(s={args.s:g},t={args.t:g})"
    rows.append({"notion": f"ALG-{st}-WT", "holds": prof.alg_st_wt(args.s, args.t), "basis": prof.basis["ALG-(s,t)-WT"]})
    rows.append({"notion": f"EXP-{st}-WT", "holds": prof.exp_st_wt(args.s, args.t), "basis": prof.basis["EXP-(s,t)-WT"]})
    return rows


def _cmd_exprate(args, budget):
    fit = exp_rate_fit(_params(args), args.n_grid, args.setting, budget)
    return [
        {
            "d": fit.d,
            "setting": fit.setting,
            "fitted_exponent": fit.fitted_exponent,
            "expected": args.alpha / fit.d,
            "fit_residual": fit.fit_residual,
            "n_lo": fit.n_range[0],
            "n_hi": fit.n_range[1],
        }
    ]


def _cmd_sample(args, budget):
    return sample_path(_params(args), args.tail_tol, args.seed, args.trial, budget).to_rows()


def _cmd_mc_check(args, budget):
    params = _params(args)
    rows = []
    for n in args.n_grid:
        est = mc_avg_error(params, n, args.trials, args.seed, args.tail_tol, args.threads, budget)
        rows.append(est.as_row())
    return rows


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "trace": _cmd_trace,
    "error-curve": _cmd_error_curve,
    "complexity": _cmd_complexity,
    "count": _cmd_count,
    "scan": _cmd_scan,
    "classify": _cmd_classify,
    "exprate": _cmd_exprate,
    "sample": _cmd_sample,
    "mc-check": _cmd_mc_check,
}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        time_kw = {} if args.time_ms is None else {"time_ms": args.time_ms}
        budget = Budget(args.max_classes, args.max_levels, **time_kw)
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        rows = _COMMANDS[args.command](args, budget)
    except _Uncertified as exc:
        _emit(exc.args[0], args.format, out)
        return EXIT_BUDGET
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(rows, args.format, out)
    return EXIT_OK


def run(argv: Sequence[str] | None = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
