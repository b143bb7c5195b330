"""Theory-versus-computation battery.

Each check returns a :class:`CheckResult` holding a verdict and plot-ready
rows.  ``full=True`` runs the stated sample sizes; ``full=False`` shrinks
the Monte Carlo work for a quick smoke run (same tolerances, less power).
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cone import tau, tau_numeric_oracle
from .limits import rectangle_measure
from .lp import TIE_RTOL, TailLp, construct_from_eta, eta_profile, solve_lp, sv_lag_lp
from .model import (
    CoefficientSequence,
    ConstantEps,
    CustomTailEta,
    GammaEta,
    LaplaceEta,
    NormalEps,
    SvModel,
    marginal_survival_asymptote,
)
from .rng import stream
from .simulate import (
    SimulationConfig,
    asymptotic_dependence_probe,
    conditional_exceedance_curve,
    empirical_survival,
    extremal_index,
    hill_eta,
    normalized_maxima,
    simulate_paths,
    stream_joint_exceedance,
    tail_slope,
)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(fn):
    def run(*args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# --------------------------------------------------------------------------
# independent LP oracle
# --------------------------------------------------------------------------

def brute_force_lp(a, b, rtol: float = TIE_RTOL):
    """Optimum and uniqueness by visiting every basis of ``[M | -I] (kappa, s) = 1``.

    Works on the standard form with slack variables and knows nothing about
    the singleton/pair structure.  Unique iff all optimal basic solutions are
    the same point (the optimal face is a bounded polytope).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.size
    M = np.hstack([np.vstack([a, b]), -np.eye(2)])
    best = math.inf
    points = []
    for cols in itertools.combinations(range(n + 2), 2):
        B = M[:, cols]
        if abs(np.linalg.det(B)) < 1e-14:
            continue
        xb = np.linalg.solve(B, np.ones(2))
        if np.any(xb < -1e-12):
            continue
        x = np.zeros(n + 2)
        x[list(cols)] = np.maximum(xb, 0.0)
        obj = float(x[:n].sum())
        points.append((obj, x[:n]))
        best = min(best, obj)
    opt = [p for o, p in points if o <= best * (1 + rtol)]
    unique = all(np.max(np.abs(p - opt[0])) <= 1e-9 * max(1.0, best) for p in opt)
    return best, unique


def random_lp(rng, n_max: int = 12):
    n = int(rng.integers(1, n_max + 1))
    if rng.random() < 0.5:
        # lattice values produce ties and degenerate bases
        a = rng.integers(0, 5, n) / 4.0
        b = rng.integers(0, 5, n) / 4.0
    else:
        a = rng.random(n) * (rng.random(n) < 0.8)
        b = rng.random(n) * (rng.random(n) < 0.8)
    if a.max() <= 0:
        a[rng.integers(n)] = 1.0
    if b.max() <= 0:
        b[rng.integers(n)] = 1.0
    return TailLp(tuple(a), tuple(b))


# --------------------------------------------------------------------------
# exact checks
# --------------------------------------------------------------------------

def strictly_decreasing(rng, n_max: int = 10) -> CoefficientSequence:
    n = int(rng.integers(2, n_max + 1))
    tail = np.sort(rng.uniform(0.0, 1.0, n - 1))[::-1]
    while len(set(tail)) < tail.size or tail[0] >= 1.0 or tail[-1] <= 0.0:
        tail = np.sort(rng.uniform(0.0, 1.0, n - 1))[::-1]
    return CoefficientSequence((1.0, *tail))


@_timed
def check_decreasing(full=True, seed=0, workers=None):
    rng = stream(seed, 1)
    worst = 0.0
    ok = True
    rows = []
    for case in range(50):
        c = strictly_decreasing(rng)
        for h in range(1, 6):
            lp = sv_lag_lp(c, h)
            sol = solve_lp(lp)
            ah = c.at(h)
            want = np.zeros(len(lp))
            want[0] = 1.0 - ah
            want[h] = 1.0
            err = max(float(np.max(np.abs(np.asarray(sol.kappa) - want))), abs(sol.objective - (2.0 - ah)))
            worst = max(worst, err)
            ok &= sol.unique and err <= 1e-12
            rows.append({"case": case, "h": h, "objective": sol.objective, "expected": 2.0 - ah, "error": err})
    return CheckResult(1, "strictly decreasing coefficients: kappa_0 = 1 - alpha_h, kappa_h = 1", ok,
                       f"max error {worst:.2e} over 250 LPs", rows)


@_timed
def check_ar1(full=True, seed=0, workers=None):
    worst = 0.0
    rows = []
    for al in (0.3, 0.5, 0.9):
        prof = eta_profile(CoefficientSequence.ar1(al), range(1, 7))
        for e in prof.entries:
            want = 1.0 / (2.0 - al ** e.h)
            worst = max(worst, abs(e.eta - want))
            rows.append({"alpha": al, "h": e.h, "eta": e.eta, "expected": want})
    return CheckResult(2, "AR(1) eta_h = 1/(2 - alpha^h)", worst <= 1e-12, f"max error {worst:.2e}", rows)


def random_targets(rng, count: int = 200):
    out = []
    for i in range(count):
        m = int(rng.integers(1, 7))
        t = rng.uniform(0.5, 1.0, m)
        mask = rng.random(m)
        t[mask < 0.2] = 0.5
        t[mask > 0.8] = 1.0
        out.append(t)
    out[0] = np.array([0.5])
    out[1] = np.array([1.0])
    out[2] = np.array([0.5, 1.0, 0.5, 1.0, 0.5, 1.0])
    return out


@_timed
def check_round_trip(full=True, seed=0, workers=None):
    rng = stream(seed, 3)
    worst = 0.0
    rows = []
    for idx, t in enumerate(random_targets(rng)):
        got = np.asarray(eta_profile(construct_from_eta(t), range(1, t.size + 1)).etas)
        err = float(np.max(np.abs(got - t)))
        worst = max(worst, err)
        rows.append({"case": idx, "m": t.size, "error": err})
    return CheckResult(3, "eta profile round trip through the construction", worst <= 1e-12,
                       f"max error {worst:.2e} over {len(rows)} targets", rows)


@_timed
def check_lp_oracle(full=True, seed=0, workers=None):
    rng = stream(seed, 4)
    bad = 0
    worst = 0.0
    n_non = 0
    rows = []
    for case in range(1000):
        lp = random_lp(rng)
        sol = solve_lp(lp)
        best, unique = brute_force_lp(lp.a, lp.b)
        err = abs(sol.objective - best) / best
        worst = max(worst, err)
        n_non += not unique
        agree = err <= 1e-9 and sol.unique == unique
        bad += not agree
        rows.append({"case": case, "n": len(lp), "objective": sol.objective, "oracle": best,
                     "unique": sol.unique, "oracle_unique": unique})
    return CheckResult(4, "enumeration solver vs brute force over all bases", bad == 0,
                       f"{bad} disagreements, max rel. objective error {worst:.1e}, {n_non} non-unique instances", rows)


def random_cone_matrix(rng, d):
    """Inverse of a positive matrix: cone preserving with finite positive tau."""
    return np.linalg.inv(rng.uniform(0.1, 2.0, (d, d)))


@_timed
def check_tau(full=True, seed=0, workers=None):
    rng = stream(seed, 5)
    worst = 0.0
    rows = []
    for case in range(100):
        d = 2 if case < 50 else 3
        A = random_cone_matrix(rng, d)
        t = tau(A)
        o = tau_numeric_oracle(A, 1000 if d == 2 else 200)
        rel = abs(o - t) / t
        worst = max(worst, rel)
        rows.append({"case": case, "d": d, "tau": t, "oracle": o, "rel_error": rel})
    diag_ok = True
    for case in range(20):
        d = int(rng.integers(1, 6))
        delta = rng.uniform(0.1, 10.0, d)
        diag_ok &= tau(np.diag(delta)) == delta.max()
    diag_ok &= tau_numeric_oracle(np.diag([2.0, 3.0])) == 3.0
    return CheckResult(5, "tau formula vs numerical supremum", worst <= 1e-3 and diag_ok,
                       f"max rel. error {worst:.1e}; diagonal cases exact: {diag_ok}", rows)


@_timed
def check_truncation(full=True, seed=0, workers=None):
    rng = stream(seed, 6)
    changed = 0
    rows = []
    for case in range(500):
        lp = random_lp(rng, 8)
        base = solve_lp(lp)
        thr = lp.threshold
        extra = int(rng.integers(1, 21))
        ea = rng.uniform(0.0, thr, extra) * (1 - 1e-9)
        eb = rng.uniform(0.0, thr, extra) * (1 - 1e-9)
        big = TailLp(lp.a + tuple(ea), lp.b + tuple(eb))
        ext = solve_lp(big)
        same = (ext.objective == base.objective and ext.kappa[: len(lp)] == base.kappa
                and not any(ext.kappa[len(lp):]) and ext.unique == base.unique)
        changed += not same
        rows.append({"case": case, "n": len(lp), "extra": extra, "objective": base.objective,
                     "extended_objective": ext.objective, "identical": same})
    # the SV program of an AR(1) log-volatility, truncated at n and n + 20
    for n in (40, 80):
        s1 = solve_lp(sv_lag_lp(CoefficientSequence.ar1(0.9, n), 1))
        s2 = solve_lp(sv_lag_lp(CoefficientSequence.ar1(0.9, n + 20), 1))
        same = s1.objective == s2.objective and s1.support == s2.support
        changed += not same
        rows.append({"case": f"ar1-0.9-{n}", "objective": s1.objective, "extended_objective": s2.objective,
                     "identical": same})
    return CheckResult(6, "extension below the truncation threshold leaves the LP solution unchanged",
                       changed == 0, f"{changed} changed out of {len(rows)}", rows)


# --------------------------------------------------------------------------
# Monte Carlo checks
# --------------------------------------------------------------------------

ZOO_ETA = GammaEta(0.25)


def eta_zoo():
    """(label, coefficients, lags) of the consistency zoo."""
    return [
        ("independence", CoefficientSequence((1.0,)), (1,)),
        ("ar1-0.6", CoefficientSequence.ar1(0.6), (1, 2)),
        ("decreasing", CoefficientSequence((1.0, 0.8, 0.3)), (1, 2)),
        ("constructed-0.8-0.5", construct_from_eta([0.8, 0.5]), (1, 2)),
        ("one-factor", CoefficientSequence((1.0, 0.0, 1.0)), (2,)),
    ]


@_timed
def check_hill_zoo(full=True, seed=0, workers=None):
    N = 10 ** 6 if full else 2 * 10 ** 5
    rows = []
    worst = 0.0
    for idx, (label, c, lags) in enumerate(eta_zoo()):
        model = SvModel(c, ZOO_ETA, NormalEps())
        batch = simulate_paths(SimulationConfig(model, N, 1, None, seed + idx, workers))
        prof = eta_profile(c, lags)
        for h in lags:
            est = hill_eta(batch, h, series="sigma")
            d = est.value - prof[h].eta
            worst = max(worst, abs(d))
            rows.append({"model": label, "h": h, "eta_hat": est.value, "stderr": est.stderr,
                         "eta_lp": prof[h].eta, "diff": d})
    return CheckResult(7, "Hill estimate of eta vs LP value over the model zoo", worst <= 0.1,
                       f"max |diff| {worst:.3f} (tol 0.1, N={N})", rows)


@_timed
def check_joint_exceedance(full=True, seed=0, workers=None):
    total = 10 ** 8 if full else 10 ** 7
    c = CoefficientSequence((1.0, 0.5))
    model = SvModel(c, LaplaceEta(), NormalEps())
    T = 10 ** 6
    cfg = SimulationConfig(model, T, total // T, None, seed, workers)
    lp = sv_lag_lp(c, 1)
    sol = solve_lp(lp)
    grid = [(s0, sh) for s0 in (1.0, 2.0, 4.0) for sh in (1.0, 2.0, 4.0)]
    res = stream_joint_exceedance(cfg, 1, grid, 0.999)
    rows = []
    worst = 0.0
    for (s0, sh), r in res.items():
        th = rectangle_measure(sol, lp, s0, sh)
        worst = max(worst, abs(r.value - th))
        rows.append({"s0": s0, "sh": sh, "empirical": r.value, "ci_low": r.ci_low, "ci_high": r.ci_high,
                     "limit": th, "exceedances": r.denominator})
    return CheckResult(8, "joint exceedance ratios vs s0^-0.5 sh^-1", worst <= 0.08,
                       f"max |diff| {worst:.3f} (tol 0.08, {total:.0e} pairs, u=0.999)", rows)


@_timed
def check_extremal(full=True, seed=0, workers=None):
    model = SvModel(CoefficientSequence.ar1(0.7, 60), LaplaceEta(), NormalEps())
    batch = simulate_paths(SimulationConfig(model, 10 ** 6, 10 if full else 2, None, seed, workers))
    th = extremal_index(batch, 100, u=0.9999, series="sigma")
    R = 2000 if full else 400
    maxima = normalized_maxima(model, 10 ** 5, R, (0.5, 1.0, 2.0), seed + 1, workers)
    rows = [{"quantity": "theta", "value": th.value, "raw": th.raw, "stderr": th.stderr}]
    worst = 0.0
    for m in maxima:
        worst = max(worst, abs(m.empirical - m.frechet))
        rows.append({"quantity": f"maxima z={m.z}", "value": m.empirical, "reference": m.frechet,
                     "stderr": m.stderr})
    ok = 0.85 <= th.value <= 1.0 and worst <= 0.03
    return CheckResult(9, "extremal index and Frechet limit of maxima", ok,
                       f"theta {th.value:.3f} (raw {th.raw:.3f}); max |maxima - exp(-1/z)| {worst:.3f} over R={R}",
                       rows)


@_timed
def check_marginal(full=True, seed=0, workers=None):
    model = SvModel(CoefficientSequence((1.0, 0.5)), LaplaceEta(), NormalEps())
    batch = simulate_paths(SimulationConfig(model, 10 ** 6, 10 if full else 2, None, seed, workers))
    s = batch.sigma.ravel()
    slope = tail_slope(s, 0.999, 0.9999)
    x = float(np.quantile(s, 1 - 1e-4))
    ratio = float(empirical_survival(s, x) / marginal_survival_asymptote(model, x))
    ok = abs(slope + 1.0) <= 0.05 and 0.7 <= ratio <= 1.4
    rows = [{"quantity": "slope", "value": slope, "reference": -1.0},
            {"quantity": "survival ratio at 1e-4", "value": ratio, "reference": 1.0}]
    return CheckResult(10, "marginal tail slope and asymptote", ok,
                       f"slope {slope:.3f}, ratio {ratio:.3f} (N={s.size})", rows)


PROBE_ETA = CustomTailEta(0.01, -2.0)


@_timed
def check_probe(full=True, seed=0, workers=None):
    total = 10 ** 8 if full else 10 ** 7
    T = 10 ** 6
    grid = (0.99, 0.999, 0.9999)
    dep = SvModel(CoefficientSequence((1.0, 1.0)), PROBE_ETA, ConstantEps())
    ctrl = SvModel(CoefficientSequence((1.0, 1.0)), LaplaceEta(), ConstantEps())
    p = asymptotic_dependence_probe(dep, 1, T, total // T, grid, seed, workers)
    q = conditional_exceedance_curve(SimulationConfig(ctrl, T, total // T, None, seed + 1, workers), 1, grid)
    pv = [r.value for r in p]
    qv = [r.value for r in q]
    ok_dep = all(x <= y for x, y in zip(pv, pv[1:])) and pv[-1] > 0.05
    ok_ctrl = all(x > y for x, y in zip(qv, qv[1:]))
    rows = [{"model": "beta=-2", "u": r.u, "value": r.value, "stderr": r.stderr} for r in p]
    rows += [{"model": "laplace", "u": r.u, "value": r.value, "stderr": r.stderr} for r in q]
    return CheckResult(11, "asymptotic dependence only for beta < -1", ok_dep and ok_ctrl,
                       "beta=-2: " + ", ".join(f"{v:.3f}" for v in pv)
                       + "; laplace: " + ", ".join(f"{v:.3f}" for v in qv), rows)


CHECKS = [check_decreasing, check_ar1, check_round_trip, check_lp_oracle, check_tau, check_truncation,
          check_hill_zoo, check_joint_exceedance, check_extremal, check_marginal, check_probe]


def run_checks(numbers=None, full=True, seed=0, workers=None):
    out = []
    for i, fn in enumerate(CHECKS, start=1):
        if numbers is None or i in numbers:
            out.append(fn(full=full, seed=seed, workers=workers))
    return out
