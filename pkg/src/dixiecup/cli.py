"""Command-line front end: ``dixiecup <command> [options]``.

Every command prints one report.  The default is plain ``key = value``
records; ``--json`` prints the envelope described in report_schema.json;
``--csv`` prints the grid rows of ``gumbel``, ``radial`` and ``case2``.

Exit codes: 0 success, 1 a failed gate in ``verify-all``, 2 usage or
domain error, 3 numerical non-convergence (payload carries diagnostics).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__
from . import acceptance
from . import asymptotics as asym
from . import extremality as ext
from . import montecarlo as mc
from .centering import quantile_inequality_report
from .errors import DomainExit, NonBracketable, QuadratureNonConvergence, TooLarge, TruncationInsufficient
from .exact_moments import Method, mean_variance
from .models import CollectorModel, ProbabilityVector
from .poissonized import RadialDirection

INPUT_SUM_TOL = 1e-6
EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(args) -> np.ndarray:
    if args.x is not None:
        return np.asarray(args.x, dtype=float)
    return np.linspace(args.x_min, args.x_max, args.points)


def build_model(args) -> CollectorModel:
    if args.p is not None:
        p = np.asarray(args.p, dtype=float)
        if args.n is not None and args.n != p.size:
            raise UsageError(f"--n {args.n} does not match {p.size} probabilities")
        if np.any(p <= 0):
            raise UsageError("probabilities must be positive")
        try:
            pv = ProbabilityVector.from_weights(p, tol=INPUT_SUM_TOL)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif args.powerlaw_alpha is not None:
        if args.n is None:
            raise UsageError("--powerlaw-alpha needs --n")
        if not args.powerlaw_alpha > 0:
            raise UsageError("--powerlaw-alpha must be positive")
        pv = ProbabilityVector.powerlaw(args.n, args.powerlaw_alpha)
    else:
        if args.n is None:
            raise UsageError("--uniform needs --n")
        pv = ProbabilityVector.uniform(args.n)
    if pv.n < 1:
        raise UsageError("need at least one coupon")
    return CollectorModel(args.m, pv)


def _add_output_flags(p: argparse.ArgumentParser, csv_ok: bool = False) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--json", action="store_true", help="emit the JSON report envelope")
    if csv_ok:
        g.add_argument("--csv", action="store_true", help="emit grid rows as CSV")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $DIXIECUP_THREADS or 1)")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="number of coupon types N")
    p.add_argument("--m", type=int, default=1, help="copies needed of each type (default 1)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--uniform", action="store_true", help="equal probabilities (default)")
    g.add_argument("--p", type=_floats, help="explicit probabilities, e.g. 0.5,0.3,0.2")
    g.add_argument("--powerlaw-alpha", type=float, help="p_j proportional to j^-alpha")


def _add_grid_flags(p: argparse.ArgumentParser, lo: float, hi: float, points: int) -> None:
    p.add_argument("--x", type=_floats, help="explicit grid points (overrides --x-min/--x-max/--points)")
    p.add_argument("--x-min", type=float, default=lo)
    p.add_argument("--x-max", type=float, default=hi)
    p.add_argument("--points", type=int, default=points)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dixiecup", description="Double Dixie cup collector: moments and limit-law checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="mean and variance of the completion time")
    _add_model_flags(p)
    p.add_argument("--method", choices=["auto"] + [m.value for m in Method], default="auto")
    _add_output_flags(p)

    p = sub.add_parser("centering", help="Gumbel centering b, a and the quantile inequalities")
    p.add_argument("--count", type=float, required=True, help="number of equal clocks n (> 1)")
    p.add_argument("--m", type=int, default=1)
    _add_grid_flags(p, 0.0, 10.0, 21)
    _add_output_flags(p)

    p = sub.add_parser("gumbel", help="exact standardized CDF against exp(-e^-x)")
    p.add_argument("--n", "--count", dest="count", type=float, required=True, help="number of equal clocks")
    p.add_argument("--m", type=int, default=1)
    _add_grid_flags(p, -3.0, 4.0, 141)
    _add_output_flags(p, csv_ok=True)

    p = sub.add_parser("radial", help="variance along a ray leaving the uniform law")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--direction", type=_floats, help="zero-sum direction h (recentred and normalised)")
    g.add_argument("--p", type=_floats, help="target law; the ray is u + theta (p - u)")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--theta-max", type=float, default=None, help="default: half the exit parameter")
    p.add_argument("--steps", type=int, default=ext.DEFAULT_STEPS)
    _add_output_flags(p, csv_ok=True)

    p = sub.add_parser("hessian", help="tangent Hessian constant C_{m,N} at uniform")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--bign", type=int, required=True, help="number of coupon types N")
    p.add_argument("--finite-difference", action="store_true", help="also report the finite-difference estimate")
    _add_output_flags(p)

    p = sub.add_parser("case1", help="infinite-product limit for p_j proportional to a_j")
    p.add_argument("--family", choices=sorted(asym.FAMILIES), default="linear")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--bign-list", type=_ints, default=[100, 200, 400])
    p.add_argument("--truncation-j", type=int, default=None)
    _add_output_flags(p)

    p = sub.add_parser("case2", help="power-law defect mass at B_N + C_N x")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--m", type=int, default=1)
    _add_grid_flags(p, -1.0, 2.0, 4)
    _add_output_flags(p, csv_ok=True)

    p = sub.add_parser("simulate", help="Monte Carlo runs with counter-based streams")
    _add_model_flags(p)
    p.add_argument("--mode", choices=["discrete", "poissonized", "active-clock"], default="discrete")
    p.add_argument("--method", choices=["skip", "direct"], default="skip", help="discrete sampler")
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p)

    p = sub.add_parser("verify-all", help="run the acceptance gates; exit 1 if any fails")
    p.add_argument("--quick", action="store_true", help="smaller batches and trial counts")
    p.add_argument("--only", type=_ints, default=None, help="comma-separated gate numbers")
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p)
    return parser


# ---------------------------------------------------------------------------
# commands; each returns (parameters, results, rows-or-None, exit code)


def _workers(args) -> int:
    return max(1, args.threads) if args.threads is not None else mc.default_workers()


def cmd_moments(args):
    model = build_model(args)
    rep = mean_variance(model, method=args.method)
    params = {"model": model.to_dict(), "method": args.method}
    return params, rep.to_dict(), None, EXIT_OK


def cmd_centering(args):
    rep = quantile_inequality_report(args.count, args.m, _grid(args))
    return {"count": args.count, "m": args.m}, rep.to_dict(), None, EXIT_OK


def cmd_gumbel(args):
    grid = _grid(args)
    rep = asym.gumbel_fit_equal(args.count, args.m, grid)
    return {"n": args.count, "m": args.m, "points": int(grid.size)}, rep.to_dict(), rep.rows(), EXIT_OK


def cmd_radial(args):
    if args.direction is not None:
        direction = RadialDirection.normalized(args.direction)
    else:
        direction = RadialDirection.toward(ProbabilityVector.from_weights(args.p, tol=INPUT_SUM_TOL).p)
    res = ext.radial_variance_scan(direction, args.m, args.theta_max, args.steps)
    rows = [
        {"theta": float(t), "var_T": float(v), "abs_err": float(e)}
        for t, v, e in zip(res.thetas, res.variances, res.errors)
    ]
    params = {"h": direction.h.tolist(), "m": args.m, "theta_max": float(res.thetas[-1]), "steps": args.steps}
    return params, res.to_dict(), rows, EXIT_OK


def cmd_hessian(args):
    rep = ext.hessian_constant(args.m, args.bign)
    out = rep.to_dict()
    if args.finite_difference:
        out["finite_difference_C"] = ext.hessian_by_finite_differences(args.m, args.bign)
    return {"m": args.m, "N": args.bign}, out, None, EXIT_OK


def cmd_case1(args):
    rep = asym.case1_limit(args.family, args.m, args.bign_list, args.truncation_j)
    params = {"family": args.family, "m": args.m, "N_list": args.bign_list, "truncation_J": args.truncation_j}
    return params, rep.to_dict(), None, EXIT_OK


def cmd_case2(args):
    grid = _grid(args)
    rep = asym.case2_powerlaw(args.n, args.alpha, args.m, grid)
    return {"N": args.n, "alpha": args.alpha, "m": args.m}, rep.to_dict(), rep.rows(), EXIT_OK


def cmd_simulate(args):
    model = build_model(args)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    cfg = mc.SimConfig(args.trials, args.seed, model, _workers(args))
    params = {"model": model.to_dict(), "mode": args.mode, "trials": args.trials, "seed": args.seed}
    if args.mode == "active-clock":
        return params, mc.simulate_active_clock(cfg).to_dict(), None, EXIT_OK
    exact = mean_variance(model)
    if args.mode == "discrete":
        params["method"] = args.method
        stats = mc.simulate_discrete(cfg, method=args.method)
        target_mean, target_var = exact.mean, exact.var_T
    else:
        stats = mc.simulate_poissonized(cfg)
        target_mean, target_var = exact.mean, exact.var_X
    results = {
        "stats": stats.to_dict(),
        "exact_mean": target_mean,
        "exact_variance": target_var,
        "z_mean": mc._z(stats.mean - target_mean, stats.std_error_mean),
        "z_variance": mc._z(stats.variance - target_var, stats.std_error_variance),
    }
    return params, results, None, EXIT_OK


def _without_timings(gate: dict) -> dict:
    out = {k: v for k, v in gate.items() if k != "elapsed_s"}
    out["detail"] = {k: v for k, v in gate["detail"].items() if k != "runtime_s"}
    return out


def cmd_verify_all(args):
    only = args.only
    if only is not None:
        bad = [k for k in only if k not in acceptance.GATES]
        if bad:
            raise UsageError(f"unknown gate numbers {bad}")
    gates = []
    for k in sorted(acceptance.GATES) if only is None else sorted(only):
        res = acceptance.run_gate(k, quick=args.quick, seed=args.seed, workers=_workers(args))
        if not args.json:
            print(res.line(), file=sys.stderr)
        gates.append(res)
    passed = all(g.passed for g in gates)
    results = {
        "passed": passed,
        # wall-clock figures stay on stderr so identical runs print identical JSON
        "gates": [_without_timings(g.to_dict()) for g in gates],
    }
    return {"quick": args.quick, "only": only, "seed": args.seed}, results, None, EXIT_OK if passed else EXIT_GATE


COMMANDS = {
    "moments": cmd_moments,
    "centering": cmd_centering,
    "gumbel": cmd_gumbel,
    "radial": cmd_radial,
    "hessian": cmd_hessian,
    "case1": cmd_case1,
    "case2": cmd_case2,
    "simulate": cmd_simulate,
    "verify-all": cmd_verify_all,
}


# ---------------------------------------------------------------------------
# output


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def envelope(command: str, params: dict, results, elapsed_ms: int) -> dict:
    return {
        "command": command,
        "parameters": clean(params),
        "results": clean(results),
        "tool_version": __version__,
        "elapsed_ms": int(elapsed_ms),
    }


def _records(prefix: str, obj, out: list[str]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _records(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj):
            _records(f"{prefix}[{i}]", v, out)
    elif isinstance(obj, list):
        out.append(f"{prefix} = " + ", ".join("null" if v is None else repr(v) for v in obj))
    else:
        out.append(f"{prefix} = {'null' if obj is None else obj}")


def render_text(env: dict) -> str:
    lines: list[str] = []
    _records("", env, lines)
    return "\n".join(lines) + "\n"


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    want_json = getattr(args, "json", False)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", QuadratureNonConvergence)
            params, results, rows, code = COMMANDS[args.command](args)
        slow = [str(w.message) for w in caught if issubclass(w.category, QuadratureNonConvergence)]
        if slow:
            raise NumericFailure("quadrature did not reach its tolerance", {"warnings": slow, "results": results})
    except (UsageError, NonBracketable, TooLarge, DomainExit, ValueError) as exc:
        print(f"dixiecup {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericFailure, TruncationInsufficient, ArithmeticError) as exc:
        diag = getattr(exc, "diagnostics", {"error": str(exc)})
        elapsed = round((time.perf_counter() - start) * 1000)
        env = envelope(args.command, {}, {"error": str(exc), "diagnostics": diag}, elapsed)
        stdout.write(json.dumps(env, indent=2) + "\n" if want_json else render_text(env))
        print(f"dixiecup {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    elapsed = round((time.perf_counter() - start) * 1000)
    params = {**params, "threads": _workers(args)}
    env = envelope(args.command, params, results, elapsed)
    if getattr(args, "csv", False):
        stdout.write(render_csv(rows))
    elif want_json:
        stdout.write(json.dumps(env, indent=2) + "\n")
    else:
        stdout.write(render_text(env))
    return code


def main() -> None:
    sys.exit(run())
