"""Acceptance gates: one function per numbered criterion.

Each gate returns a ``GateResult`` whose ``detail`` holds the numbers the
verdict was based on.  ``quick=True`` shrinks sample counts and model
batches for smoke runs; the full settings are the reference ones.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asym
from . import extremality as ext
from . import gamma_kernel as gk
from . import montecarlo as mc
from .centering import quantile_inequality_report
from .exact_moments import mean_variance, rising_moment_exact, rising_moment_quadrature, uniform_m1_closed_form
from .models import CollectorModel, ProbabilityVector
from .poissonized import RadialDirection, default_time_grid, radial_derivative_w, size_bias_ratio, weighted_mean_M

MC_SIGMAS = 3.0
CASE2_NS = (10**4, 10**5, 10**6)


@dataclass
class GateResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number:2d}: {self.name} ({self.elapsed_s:.1f} s)"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "elapsed_s": self.elapsed_s,
            "detail": self.detail,
        }


def random_model(rng: np.random.Generator, max_n: int, max_m: int, min_n: int = 2) -> CollectorModel:
    n = int(rng.integers(min_n, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    return CollectorModel(m, ProbabilityVector.from_weights(rng.dirichlet(np.ones(n))))


def _timed(number: int, name: str, fn, *args, **kwargs) -> GateResult:
    start = time.perf_counter()
    passed, detail = fn(*args, **kwargs)
    return GateResult(number, name, bool(passed), detail, time.perf_counter() - start)


# ---------------------------------------------------------------------------


def _triangle(quick: bool, seed: int, workers: int):
    count, trials = (10, 2 * 10**4) if quick else (50, 10**5)
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst_rel, worst_z, failures = 0.0, 0.0, []
    for i in range(count):
        model = random_model(rng, 8, 4)
        ie1, ie2 = rising_moment_exact(model, 1), rising_moment_exact(model, 2)
        q1, _ = rising_moment_quadrature(model, 1)
        q2, _ = rising_moment_quadrature(model, 2)
        rel = max(abs(ie1 - q1) / abs(ie1), abs(ie2 - q2) / abs(ie2))
        var_t = ie2 - ie1 - ie1 * ie1
        stats = mc.simulate_discrete(mc.SimConfig(trials, seed + 1 + i, model, workers))
        z_mean = (stats.mean - ie1) / stats.std_error_mean
        z_var = (stats.variance - var_t) / stats.std_error_variance
        z = max(abs(z_mean), abs(z_var))
        worst_rel, worst_z = max(worst_rel, rel), max(worst_z, z)
        if rel > 1e-7 or z > MC_SIGMAS:
            failures.append({"index": i, "model": model.to_dict(), "rel": rel, "z_mean": z_mean, "z_var": z_var})
    elapsed = time.perf_counter() - start
    detail = {
        "models": count,
        "trials": trials,
        "worst_relative_difference": worst_rel,
        "worst_abs_z": worst_z,
        "failures": failures,
        "runtime_s": elapsed,
        "runtime_limit_s": 60.0,
    }
    return not failures and elapsed < 60.0, detail


def _uniform_closed_form():
    rows, ok = [], True
    for n in range(2, 13):
        rep = mean_variance(CollectorModel.uniform(n, 1), method="exact_ie")
        mean, var_t = uniform_m1_closed_form(n)
        rel = max(abs(rep.mean - mean) / mean, abs(rep.var_T - var_t) / var_t)
        ok &= rel <= 1e-10
        rows.append({"N": n, "mean": rep.mean, "var_T": rep.var_T, "closed_var_T": var_t, "rel": rel})
    anchor = rows[0]
    ok &= abs(anchor["mean"] - 3.0) <= 1e-10 * 3 and abs(anchor["var_T"] - 2.0) <= 1e-10 * 2
    return ok, {"rows": rows}


def _gumbel_fit():
    ns = (10**3, 10**4, 10**5, 10**6)
    detail, ok = {}, True
    for m in (1, 2, 3):
        d = [asym.gumbel_fit_equal(n, m).sup_distance for n in ns]
        ok &= d[-1] < 0.01 and all(b < a for a, b in zip(d, d[1:]))
        detail[f"m={m}"] = d
    return ok, detail


def _variance_asymptotic():
    start = time.perf_counter()
    (row,) = asym.equal_moment_asymptotics(1, [1000])
    ok = abs(row.var_residual) < 0.01
    detail = {"m=1,n=1000": row.to_dict()}
    for m in (2, 3):
        rows = asym.equal_moment_asymptotics(m, [10**3, 10**4, 10**5])
        mean_r = [abs(r.mean_residual) for r in rows]
        var_r = [abs(r.var_residual) for r in rows]
        dec = all(b < a for a, b in zip(mean_r, mean_r[1:])) and all(b < a for a, b in zip(var_r, var_r[1:]))
        ok &= dec
        detail[f"m={m}"] = {"mean_residuals": mean_r, "var_residuals": var_r, "decreasing": dec}
    elapsed = time.perf_counter() - start
    detail["runtime_s"] = elapsed
    return ok and elapsed < 120.0, detail


def _radial(quick: bool, seed: int):
    count = 10 if quick else 50
    rng = np.random.default_rng(seed + 5)
    start = time.perf_counter()
    violations, min_incr, worst_w = [], math.inf, 0.0
    for i in range(count):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 5))
        direction = RadialDirection.normalized(rng.standard_normal(n))
        res = ext.radial_variance_scan(direction, m)
        min_incr = min(min_incr, res.min_increment)
        for c in res.w_integrals:
            worst_w = max(worst_w, abs(c["w_integral"] - c["fd_dmean"]) / max(abs(c["fd_dmean"]), 1e-300))
        if not res.verdict:
            violations.append({"index": i, "h": direction.h.tolist(), "m": m, "min_increment": res.min_increment})
    elapsed = time.perf_counter() - start
    detail = {
        "rays": count,
        "violations": violations,
        "smallest_increment": min_incr,
        "worst_w_vs_finite_difference": worst_w,
        "runtime_s": elapsed,
    }
    return not violations and elapsed < 300.0, detail


def _hessian():
    table = {}
    for m in range(1, 6):
        for n in range(2, 9):
            table[f"{m},{n}"] = ext.hessian_constant(m, n).C
    c12 = table["1,2"]
    oracle = ext.closed_form_c12()
    fd = ext.hessian_by_finite_differences(1, 2)
    ok = min(table.values()) > 0 and abs(c12 - oracle) <= 1e-3 * oracle and abs(c12 - fd) <= 1e-2 * abs(fd)
    return ok, {"C": table, "C12": c12, "closed_form_C12": oracle, "finite_difference_C12": fd}


def _active_clock(quick: bool, seed: int, workers: int):
    count, trials = (5, 2 * 10**4) if quick else (20, 10**5)
    rng = np.random.default_rng(seed + 7)
    rows, ok = [], True
    for i in range(count):
        model = random_model(rng, 8, 4)
        rep = mc.simulate_active_clock(mc.SimConfig(trials, seed + 100 + i, model, workers))
        ok &= rep.ok
        rows.append({"model": model.to_dict(), "total": rep.total, "exact": rep.exact_var_T, "z": rep.z})
    base = mc.simulate_active_clock(mc.SimConfig(1000, seed, CollectorModel.uniform(2, 1), workers))
    exact_case = base.psi_sum_mean == 2.0 and base.var_H == 0.0 and base.total == 2.0
    ok &= exact_case
    detail = {
        "models": rows,
        "trials": trials,
        "uniform_N2_m1": {"psi_sum": base.psi_sum_mean, "var_H": base.var_H, "total": base.total},
    }
    return ok, detail


def _mlr(quick: bool, seed: int):
    count = 8 if quick else 20
    rng = np.random.default_rng(seed + 8)
    rows, ok = [], True
    for i in range(count):
        model = random_model(rng, 6, 4)
        if model.p.is_uniform():
            continue
        direction = RadialDirection.toward(model.p.p)
        grid = default_time_grid(model)
        ratio = size_bias_ratio(direction, model.m, 1.0, grid)
        wmean = weighted_mean_M(model.p, model.m, grid)
        w = radial_derivative_w(direction, model.m, 1.0, grid)
        w0, w1 = ext.w_moments(direction, model.m, 1.0)
        rep = mean_variance(model)
        centroid_w, centroid_sb = w1 / w0, rep.rising2 / rep.mean
        checks = {
            "ratio_increasing": gk.strictly_increasing(ratio),
            "M_decreasing": gk.strictly_decreasing(wmean),
            "w_nonnegative": bool(np.all(w >= -1e-14 * np.abs(w).max())),
            "centroid": centroid_w >= centroid_sb * (1.0 - 1e-9),
        }
        ok &= all(checks.values())
        rows.append({"model": model.to_dict(), **checks, "centroid_w": centroid_w, "centroid_size_biased": centroid_sb})
    return ok, {"models": rows}


def _reverse_hazard():
    y = gk.log_grid(1e-3, 1e3)
    rows, ok = [], True
    for m in range(1, 11):
        e = np.asarray(gk.log_elasticity_e(m, y))
        row = {"m": m, "e_negative": bool(np.all(e < 0)), "e_decreasing": gk.strictly_decreasing(e)}
        lphi = np.asarray(gk.log_reverse_hazard(m, y))
        for c in (1.5, 2.0, 5.0):
            log_ratio = np.asarray(gk.log_reverse_hazard(m, c * y)) - lphi
            row[f"ratio_decreasing_c={c}"] = gk.strictly_decreasing(log_ratio)
        ok &= all(v for k, v in row.items() if k != "m")
        rows.append(row)
    return ok, {"rows": rows, "grid_points": int(y.size)}


def case2_table(alphas=(0.5, 1.0, 2.0), ms=(1, 2), ns=CASE2_NS, x=(-1.0, 0.0, 1.0, 2.0)) -> dict:
    table = {}
    for m in ms:
        for alpha in alphas:
            reps = [asym.case2_powerlaw(n, alpha, m, x) for n in ns]
            table[(m, alpha)] = reps
    return table


def _case2():
    table = case2_table()
    cells, ok = [], True
    for (m, alpha), reps in table.items():
        devs = [r.profile.relative_deviation for r in reps]
        sups = [float(np.max(np.abs(d))) for d in devs]
        last = reps[-1]
        in_band = bool(np.all(np.abs(devs[-1]) <= asym.CASE2_BAND))
        improving = all(b < a for a, b in zip(sups, sups[1:]))
        pointwise = bool(np.all(np.diff(np.abs(np.array(devs)), axis=0) < 0))
        atomless = float(last.profile.atomless_values.max())
        cell_ok = in_band and improving and atomless < 1e-3
        ok &= cell_ok
        cells.append({
            "m": m,
            "alpha": alpha,
            "relative_deviation_at_1e6": devs[-1].tolist(),
            "sup_deviation_by_N": sups,
            "within_band": in_band,
            "sup_deviation_decreasing": improving,
            "pointwise_decreasing": pointwise,
            "atomless_at_1e6": atomless,
            "passed": cell_ok,
        })
    return ok, {"band": asym.CASE2_BAND, "N": list(CASE2_NS), "cells": cells}


def _case1():
    rep = asym.case1_limit("linear", 1, (100, 200, 400))
    gaps = {r: [row.gap_direct[r] for row in rep.rows] for r in (1, 2)}
    ks = [row.kolmogorov for row in rep.rows]
    dec = lambda v: all(0 < b < a for a, b in zip(v, v[1:]))
    ok = dec(gaps[1]) and dec(gaps[2]) and dec(ks) and rep.dual_check["relative_difference"] < 1e-8
    detail = rep.to_dict()
    detail["summary"] = {"gap_r1": gaps[1], "gap_r2": gaps[2], "kolmogorov": ks}
    return ok, detail


def _quantile():
    x = np.linspace(0.0, 10.0, 201)
    rows, ok = [], True
    for m in range(1, 11):
        reps = [quantile_inequality_report(n, m, x) for n in (10**3, 10**6)]
        holds = all(r.right_tail_holds for r in reps)
        ratios = [r.clock_ratio for r in reps]
        increasing = ratios[1] > ratios[0]
        ok &= holds and increasing
        rows.append({
            "m": m,
            "right_tail_holds": holds,
            "max_ratio": [r.max_right_tail_ratio for r in reps],
            "clock_ratio": ratios,
            "clock_ratio_increasing": increasing,
        })
    return ok, {"rows": rows}


GATES = {
    1: "exact / quadrature / Monte Carlo triangle",
    2: "uniform m=1 closed form",
    3: "equal-probability Gumbel fit",
    4: "variance asymptotic",
    5: "radial variance extremality",
    6: "Hessian positivity at uniform",
    7: "active-clock variance identity",
    8: "MLR and size-bias properties",
    9: "reverse-hazard log-concavity",
    10: "Case II power-law defect mass",
    11: "Case I infinite-product limit",
    12: "gamma quantile inequalities",
}


def run_gate(number: int, *, quick: bool = False, seed: int = 0, workers: int = 1) -> GateResult:
    name = GATES[number]
    table = {
        1: lambda: _triangle(quick, seed, workers),
        2: _uniform_closed_form,
        3: _gumbel_fit,
        4: _variance_asymptotic,
        5: lambda: _radial(quick, seed),
        6: _hessian,
        7: lambda: _active_clock(quick, seed, workers),
        8: lambda: _mlr(quick, seed),
        9: _reverse_hazard,
        10: _case2,
        11: _case1,
        12: _quantile,
    }
    result = _timed(number, name, table[number])
    result.detail["quick"] = quick
    return result


def run_all(*, quick: bool = False, seed: int = 0, workers: int = 1, only=None) -> list[GateResult]:
    numbers = sorted(GATES) if only is None else sorted(only)
    return [run_gate(k, quick=quick, seed=seed, workers=workers) for k in numbers]
