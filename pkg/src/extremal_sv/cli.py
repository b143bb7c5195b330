"""``extremal-sv`` command line tool.

Every output starts with a provenance header (tool version, command, seed,
config hash).  CSV outputs carry it as ``# key=value`` lines; JSON outputs
as a ``provenance`` object.  The only run-dependent line is the timestamp,
which comes last and is dropped with ``--no-timestamp``.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys

import numpy as np

from . import __version__
from ._backend import BACKEND
from .cone import ConeError, tau
from .limits import one_factor_ratio, rectangle_measure
from .lp import LpError, TailLp, construct_from_eta, eta_profile, lag_solution, solve_lp
from .model import ModelError, SvModel, eps_from_dict, eta_from_dict, load_model
from .simulate import (
    SimulationBatch,
    SimulationConfig,
    SimulationError,
    extremal_index,
    hill_eta,
    joint_exceedance_ratio,
    simulate_paths,
)
from .verification import run_checks


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------

def parse_lags(text: str):
    """``"1..5"`` (inclusive) or ``"1,2,4"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lags = list(range(int(lo), int(hi) + 1))
        else:
            lags = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"bad lag list {text!r}") from None
    if not lags or min(lags) < 1:
        raise CliError("lags must be positive integers")
    return lags


def parse_floats(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"bad number list {text!r}") from None


def parse_grid(text: str):
    """``"s0:sh,s0:sh,..."``."""
    out = []
    for item in text.split(","):
        try:
            s0, sh = item.split(":")
            out.append((float(s0), float(sh)))
        except ValueError:
            raise CliError(f"bad grid point {item!r}, expected s0:sh") from None
    if any(not (s0 > 0 and sh > 0) for s0, sh in out):
        raise CliError("grid points must be positive")
    return out


def read_json_arg(text: str):
    """Inline JSON, ``-`` for stdin, or a file path."""
    try:
        if text == "-":
            return json.load(sys.stdin)
        if text.lstrip().startswith(("{", "[")):
            return json.loads(text)
        with open(text) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise CliError(f"cannot read {text!r}: {exc.strerror}") from None


def num(x) -> str:
    """Locale-free shortest round-trip formatting."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if not float(x).is_integer() or math.isinf(x) else format(float(x), ".17g")
    return "" if x is None else str(x)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def provenance(args, inputs) -> dict:
    blob = json.dumps({"command": args.command, "seed": args.seed, "inputs": inputs}, sort_keys=True, default=str)
    out = {
        "tool": "extremal-sv",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "backend": BACKEND,
    }
    if not args.no_timestamp:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return out


def render_csv(prov: dict, header, rows) -> str:
    buf = io.StringIO()
    for k, v in prov.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([num(r.get(h)) for h in header])
    return buf.getvalue()


def render_json(prov: dict, result) -> str:
    return json.dumps({"provenance": prov, "result": result}, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def emit(args, text: str):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def table(args, prov, header, rows, result=None):
    if args.format == "json":
        emit(args, render_json(prov, rows if result is None else result))
    else:
        emit(args, render_csv(prov, header, rows))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_lp_solve(args):
    d = read_json_arg(args.lp)
    if not isinstance(d, dict) or set(d) != {"a", "b"}:
        raise CliError('LP JSON must be an object with exactly the fields "a" and "b"')
    lp = TailLp(tuple(d["a"]), tuple(d["b"]))
    sol = solve_lp(lp)
    prov = provenance(args, lp.to_dict())
    res = sol.to_dict()
    res["eta"] = 1.0 / sol.objective
    if args.format == "csv":
        rows = [{"index": i, "kappa": k} for i, k in enumerate(sol.kappa)]
        prov = {**prov, "objective": num(sol.objective), "case": str(sol.case_tag), "unique": num(sol.unique)}
        emit(args, render_csv(prov, ["index", "kappa"], rows))
    else:
        emit(args, render_json(prov, res))
    return 0


def cmd_eta(args):
    model = load_model(args.model)
    lags = parse_lags(args.lags)
    prof = eta_profile(model.coeffs, lags)
    rows = [{"h": e.h, "eta": e.eta, "kappa_sum": e.kappa_sum, "case": str(e.case_tag)} for e in prof.entries]
    prov = provenance(args, {"model": model.to_dict(), "lags": lags})
    table(args, prov, ["h", "eta", "kappa_sum", "case"], rows)
    return 0


def cmd_construct(args):
    target = parse_floats(args.eta)
    eta = eta_from_dict(read_json_arg(args.eta_family))
    eps = eps_from_dict(read_json_arg(args.eps))
    model = SvModel(construct_from_eta(target), eta, eps)
    prov = provenance(args, {"eta": target, "model": model.to_dict()})
    d = model.to_dict()
    d["provenance"] = prov
    emit(args, json.dumps(d, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_measure(args):
    model = load_model(args.model)
    grid = parse_grid(args.grid)
    lp, sol = lag_solution(model.coeffs, args.h)
    rows = []
    if sol.unique and sol.case_tag.kind == "TwoFactor":
        for s0, sh in grid:
            rows.append({"s0": s0, "sh": sh, "value": rectangle_measure(sol, lp, s0, sh), "stderr": 0.0})
    elif sol.unique and sol.case_tag.subcase == "equal":
        eps = model.eps if args.series == "x" else None
        for s0, sh in grid:
            r = one_factor_ratio(model.coeffs, args.h, sol.support[0], s0, sh, model.eta, eps,
                                 args.mc_samples, args.seed, workers=args.workers)
            rows.append({"s0": s0, "sh": sh, "value": r.value, "stderr": r.stderr})
    else:
        raise CliError(f"limit measure not supported for case {sol.case_tag}"
                       + (f" ({sol.case_tag.subcase})" if sol.case_tag.subcase else ""))
    prov = provenance(args, {"model": model.to_dict(), "h": args.h, "grid": grid, "series": args.series,
                             "mc_samples": args.mc_samples})
    prov["case"] = str(sol.case_tag)
    table(args, prov, ["s0", "sh", "value", "stderr"], rows)
    return 0


def cmd_simulate(args):
    if not args.out and args.format != "csv":
        raise CliError("binary output needs --out (or use --format csv)")
    model = load_model(args.model)
    cfg = SimulationConfig(model, args.T, args.R, args.L, args.seed, args.workers)
    batch = simulate_paths(cfg)
    prov = provenance(args, {"model": model.to_dict(), "T": cfg.T, "R": cfg.R, "L": cfg.L})
    batch.meta["provenance"] = prov
    batch.meta["model"] = model.to_dict()
    if args.format == "csv":
        rows = ({"r": r, "t": t, "sigma": batch.sigma[r, t], "x": batch.x[r, t]}
                for r in range(cfg.R) for t in range(cfg.T))
        emit(args, render_csv(prov, ["r", "t", "sigma", "x"], rows))
    else:
        batch.save(args.out)
    return 0


def cmd_estimate(args):
    batch = SimulationBatch.load(args.batch)
    lags = parse_lags(args.h)
    grid = parse_grid(args.grid)
    rows = []
    for h in lags:
        e = hill_eta(batch, h, args.k, args.series)
        rows.append({"quantity": "eta", "h": h, "value": e.value, "stderr": e.stderr})
    th = extremal_index(batch, args.b, args.u_theta, args.series)
    rows.append({"quantity": "theta", "value": th.value, "stderr": th.stderr})
    for h in lags:
        for s0, sh in grid:
            r = joint_exceedance_ratio(batch, h, s0, sh, args.u, args.series)
            rows.append({"quantity": "ratio", "h": h, "s0": s0, "sh": sh, "value": r.value,
                         "ci_low": r.ci_low, "ci_high": r.ci_high, "exceedances": r.denominator})
    prov = provenance(args, {"batch": batch.config_hash, "h": lags, "k": args.k, "u": args.u,
                             "u_theta": args.u_theta, "b": args.b, "grid": grid, "series": args.series})
    table(args, prov, ["quantity", "h", "s0", "sh", "value", "stderr", "ci_low", "ci_high", "exceedances"], rows)
    return 0


def cmd_verify(args):
    numbers = None if args.checks is None else parse_lags(args.checks)
    if numbers and max(numbers) > 11:
        raise CliError("checks are numbered 1..11")
    results = run_checks(numbers, full=not args.quick, seed=args.seed, workers=args.workers)
    prov = provenance(args, {"checks": numbers, "quick": args.quick})
    failed = [r for r in results if not r.passed]
    if args.format == "json":
        res = [{"check": r.number, "name": r.name, "passed": r.passed, "detail": r.detail,
                "seconds": round(r.seconds, 1), "rows": r.rows} for r in results]
        emit(args, render_json(prov, res))
    else:
        report = "".join(f"# {k}={v}\n" for k, v in prov.items())
        report += "".join(r.line() + "\n" for r in results)
        report += f"{len(results) - len(failed)}/{len(results)} checks passed\n"
        sys.stdout.write(report)
        if args.out:
            rows = [{"check": r.number, "row": i, "key": k, "value": v}
                    for r in results for i, row in enumerate(r.rows) for k, v in row.items()]
            with open(args.out, "w", newline="") as fh:
                fh.write(render_csv(prov, ["check", "row", "key", "value"], rows))
    return 1 if failed else 0


def cmd_tau(args):
    A = read_json_arg(args.matrix)
    try:
        A = np.asarray(A, dtype=np.float64)
    except (TypeError, ValueError):
        raise CliError("matrix must be a nested list of numbers") from None
    t = tau(A)
    prov = provenance(args, {"matrix": A.tolist()})
    table(args, prov, ["tau"], [{"tau": t}], {"tau": t})
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--seed", type=int, default=S, help="random seed (default 0)")
    common.add_argument("--workers", type=int, default=S, help="worker threads; EXTREMAL_SV_THREADS overrides")
    common.add_argument("--out", default=S, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=S)
    common.add_argument("--no-timestamp", action="store_true", default=S)

    p = _Parser(prog="extremal-sv", parents=[common], description="Tail dependence of stochastic volatility models.")
    p.add_argument("--version", action="version", version=f"extremal-sv {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("lp-solve", parents=[common], help="solve a two-constraint covering LP")
    s.add_argument("--lp", default="-", help='JSON {"a": [...], "b": [...]}: inline, file, or - for stdin')
    s.set_defaults(func=cmd_lp_solve, default_format="json")

    s = sub.add_parser("eta", parents=[common], help="coefficients of tail dependence per lag")
    s.add_argument("--model", required=True)
    s.add_argument("--lags", default="1..5", help="a..b inclusive or a comma list")
    s.set_defaults(func=cmd_eta)

    s = sub.add_parser("construct", parents=[common], help="coefficients realising a target eta profile")
    s.add_argument("--eta", required=True, help="comma list of targets in [1/2, 1]")
    s.add_argument("--eta-family", default='{"kind": "laplace"}', help="innovation family JSON")
    s.add_argument("--eps", default='{"kind": "normal"}', help="return noise family JSON")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("measure", parents=[common], help="limit measure of rectangles at one lag")
    s.add_argument("--model", required=True)
    s.add_argument("--h", type=int, required=True)
    s.add_argument("--grid", default="1:1,1:2,2:1,2:2", help="s0:sh pairs")
    s.add_argument("--series", choices=("sigma", "x"), default="sigma")
    s.add_argument("--mc-samples", type=int, default=10 ** 6)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("simulate", parents=[common], help="simulate sample paths")
    s.add_argument("--model", required=True)
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--R", type=int, default=1)
    s.add_argument("--L", type=int, default=None)
    s.set_defaults(func=cmd_simulate, default_format="npz")

    s = sub.add_parser("estimate", parents=[common], help="tail estimates from a simulated batch")
    s.add_argument("--batch", required=True)
    s.add_argument("--h", default="1")
    s.add_argument("--k", type=int, default=None, help="Hill order statistics (default 2 sqrt(N))")
    s.add_argument("--u", type=float, default=0.999, help="quantile level of the exceedance ratios")
    s.add_argument("--u-theta", type=float, default=0.999, help="quantile level of the extremal index")
    s.add_argument("--b", type=int, default=100, help="block length of the extremal index")
    s.add_argument("--grid", default="1:1,1:2,2:1,2:2")
    s.add_argument("--series", choices=("x", "sigma", "abs"), default="x")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("verify", parents=[common], help="theory-versus-simulation checks")
    s.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    s.add_argument("--checks", default=None, help="subset, e.g. 1..6 or 1,4")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("tau", parents=[common], help="cone norm of a square matrix")
    s.add_argument("--matrix", required=True, help="nested JSON list")
    s.set_defaults(func=cmd_tau)
    return p


def fail(message: str, kind: str) -> int:
    sys.stderr.write(json.dumps({"error": message, "type": kind}) + "\n")
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError("missing subcommand")
        for k, v in (("seed", 0), ("workers", None), ("out", None), ("no_timestamp", False)):
            if not hasattr(args, k):
                setattr(args, k, v)
        if not hasattr(args, "format"):
            args.format = getattr(args, "default_format", "csv")
        if args.format == "npz":
            args.format = None
        return args.func(args)
    except CliError as exc:
        return fail(str(exc), "usage")
    except (ModelError, LpError, ConeError, SimulationError, ValueError) as exc:
        return fail(str(exc), "validation")
    except OSError as exc:
        return fail(f"{exc.strerror}: {exc.filename}", "io")


if __name__ == "__main__":
    sys.exit(main())
