"""The two-constraint covering LP behind the coefficient of tail dependence.

    minimise  sum_i kappa_i
    subject to  sum_i a_i kappa_i >= 1,  sum_i b_i kappa_i >= 1,  kappa >= 0

Every vertex has at most two positive coordinates, so the optimum is found
exactly by enumerating singletons and pairs.  For an SV model at lag ``h``
the rows are ``a_i = alpha_{i-h}`` and ``b_i = alpha_i``, and the
coefficient of tail dependence is ``1 / (optimal objective)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _backend
from .model import CoefficientSequence, ModelError

TIE_RTOL = 1e-9
DET_TOL = 1e-14
ZERO_TOL = 1e-12


class LpError(ValueError):
    pass


@dataclass(frozen=True)
class TailLp:
    a: tuple
    b: tuple

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        if len(a) != len(b) or not a:
            raise LpError("a and b must be non-empty and of equal length")
        if min(a) < 0.0 or min(b) < 0.0 or not all(np.isfinite(a + b)):
            raise LpError("LP coefficients must be finite and non-negative")
        if max(a) <= 0.0 or max(b) <= 0.0:
            raise LpError("each constraint needs a positive coefficient")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __len__(self):
        return len(self.a)

    @property
    def threshold(self) -> float:
        """Entries with ``max(a_i, b_i)`` at or below this never enter an optimal solution."""
        return 1.0 / (2.0 / max(self.a) + 2.0 / max(self.b))

    def to_dict(self):
        return {"a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class CaseTag:
    """``TwoFactor(i, j)``, ``OneFactor(i)`` or ``NonUnique``.

    For ``OneFactor`` the ``subcase`` records how ``a_i`` compares to ``b_i``:
    ``"equal"`` is the case with a non-degenerate limit on the open cone.
    """

    kind: str
    indices: tuple = ()
    subcase: Optional[str] = None

    def __str__(self):
        if self.kind == "NonUnique":
            return "NonUnique"
        return f"{self.kind}({','.join(str(i) for i in self.indices)})"


@dataclass(frozen=True)
class LpSolution:
    kappa: tuple
    objective: float
    support: tuple
    unique: bool
    case_tag: CaseTag
    dual: Optional[tuple] = None
    tied_supports: tuple = ()

    def to_dict(self):
        return {
            "kappa": list(self.kappa),
            "objective": self.objective,
            "support": list(self.support),
            "unique": self.unique,
            "case": str(self.case_tag),
            "subcase": self.case_tag.subcase,
            "dual": None if self.dual is None else list(self.dual),
            "tied_supports": [list(s) for s in self.tied_supports],
        }


def solve_lp(lp: TailLp) -> LpSolution:
    """Exact optimum by enumerating all basic feasible solutions."""
    a = np.asarray(lp.a, dtype=np.float64)
    b = np.asarray(lp.b, dtype=np.float64)
    best, rows = _backend.lp_candidates(a, b, TIE_RTOL, DET_TOL, ZERO_TOL)
    if rows.shape[0] == 0:
        raise LpError("no feasible basis found")  # unreachable for a valid TailLp

    supports = []
    for r in rows:
        s = (int(r[0]),) if r[1] < 0 else (int(r[0]), int(r[1]))
        if s not in supports:
            supports.append(s)
    # report the best row itself, ties resolved by enumeration order
    pick = int(np.argmin(rows[:, 4]))
    i, j, ki, kj, obj = rows[pick]
    i = int(i)
    kappa = np.zeros(len(a))
    kappa[i] = ki
    support = (i,)
    if j >= 0:
        j = int(j)
        kappa[j] = kj
        support = (i, j)

    if len(supports) > 1:
        return LpSolution(tuple(float(x) for x in kappa), float(obj), support, False, CaseTag("NonUnique"),
                          None, tuple(supports))

    if len(support) == 2:
        det = a[i] * b[j] - a[j] * b[i]
        dual = ((b[j] - b[i]) / det, (a[i] - a[j]) / det)
        return LpSolution(tuple(float(x) for x in kappa), float(obj), support, True, CaseTag("TwoFactor", support),
                          (float(dual[0]), float(dual[1])))
    if a[i] == b[i]:
        sub = "equal"
    else:
        sub = "a_greater" if a[i] > b[i] else "b_greater"
    return LpSolution(tuple(float(x) for x in kappa), float(obj), support, True, CaseTag("OneFactor", support, sub))


def residual_exponents(sol: LpSolution, lp: TailLp) -> np.ndarray:
    """``a_m k1 + b_m k2`` for every index, with ``(k1, k2)`` the dual solution.

    Equals 1 on the support and is strictly below 1 elsewhere when the
    two-factor solution is unique.
    """
    if sol.dual is None:
        raise LpError("residual exponents need a two-factor solution")
    k1, k2 = sol.dual
    return np.asarray(lp.a) * k1 + np.asarray(lp.b) * k2


def reduce_infinite(a, b, tail_bound: Optional[Callable[[int], float]] = None,
                    max_index: int = 1 << 20):
    """Finite LP with the same optimal solutions as the (possibly infinite) one.

    ``a`` and ``b`` are finite sequences, or callables ``i -> value`` together
    with ``tail_bound(n) >= sup_{i >= n} max(a_i, b_i)``.  Returns
    ``(TailLp, n)`` where ``n`` is the number of leading indices kept: every
    index ``i >= n`` has ``max(a_i, b_i) <= 1 / (2 / sup a + 2 / sup b)``.
    """
    if callable(a) or callable(b):
        if not (callable(a) and callable(b)):
            raise LpError("pass both rows as callables or both as sequences")
        if tail_bound is None:
            raise LpError("a tail bound is needed to truncate an infinite LP")
        N = 16
        while True:
            av = np.array([a(i) for i in range(N)], dtype=np.float64)
            bv = np.array([b(i) for i in range(N)], dtype=np.float64)
            if av.max() > 0.0 and bv.max() > 0.0:
                thr = 1.0 / (2.0 / av.max() + 2.0 / bv.max())
                if tail_bound(N) <= thr:
                    break
            if N >= max_index:
                raise LpError("the tail bound does not certify the truncation threshold")
            N *= 2
    else:
        av = np.asarray(a, dtype=np.float64)
        bv = np.asarray(b, dtype=np.float64)
        if av.shape != bv.shape or av.size == 0:
            raise LpError("a and b must be non-empty and of equal length")
        if av.max() <= 0.0 or bv.max() <= 0.0:
            raise LpError("each constraint needs a positive coefficient")
        thr = 1.0 / (2.0 / av.max() + 2.0 / bv.max())
    big = np.flatnonzero(np.maximum(av, bv) > thr)
    n = int(big[-1]) + 1
    return TailLp(tuple(av[:n]), tuple(bv[:n])), n


def sv_lag_lp(coeffs, h: int) -> TailLp:
    """LP for the pair ``(sigma_0, sigma_h)``: ``a_i = alpha_{i-h}``, ``b_i = alpha_i``."""
    if h < 1:
        raise LpError("lag must be at least 1")
    if not isinstance(coeffs, CoefficientSequence):
        coeffs = CoefficientSequence(tuple(coeffs))
    n = len(coeffs)
    a = tuple(coeffs.at(i - h) for i in range(n + h))
    b = tuple(coeffs.at(i) for i in range(n + h))
    return TailLp(a, b)


@dataclass(frozen=True)
class LagEta:
    h: int
    eta: float
    kappa_sum: float
    case_tag: CaseTag
    support: tuple
    unique: bool
    stderr: Optional[float] = None


@dataclass(frozen=True)
class TailDependenceProfile:
    """Coefficients of tail dependence per lag; ``source`` is ``"lp"`` or ``"estimate"``."""

    entries: tuple
    source: str = "lp"

    def __getitem__(self, h):
        for e in self.entries:
            if e.h == h:
                return e
        raise KeyError(h)

    @property
    def lags(self):
        return tuple(e.h for e in self.entries)

    @property
    def etas(self):
        return tuple(e.eta for e in self.entries)


def lag_solution(coeffs, h: int):
    full = sv_lag_lp(coeffs, h)
    lp, _ = reduce_infinite(full.a, full.b)
    return lp, solve_lp(lp)


def eta_profile(coeffs, lags: Sequence[int]) -> TailDependenceProfile:
    """``eta_h = 1 / (optimal objective)`` of the lag-``h`` LP for every requested lag.

    Lags whose LP optimum is not unique are flagged through ``unique`` and
    the ``NonUnique`` case tag; the objective, and hence ``eta_h``, is still
    well defined there.
    """
    out = []
    for h in lags:
        _, sol = lag_solution(coeffs, int(h))
        out.append(LagEta(int(h), 1.0 / sol.objective, sol.objective, sol.case_tag, sol.support, sol.unique))
    return TailDependenceProfile(tuple(out), "lp")


def construct_from_eta(target: Sequence[float]) -> CoefficientSequence:
    """Coefficients whose lag-``h`` coefficient of tail dependence is ``target[h-1]``.

    Places a 1 at index ``2m(i-1)`` and ``2 - 1/eta_i`` at ``2m(i-1) + i``
    for ``i = 1..m``; the blocks are far enough apart that lag ``i`` only
    sees its own pair.
    """
    target = [float(t) for t in target]
    m = len(target)
    if m == 0:
        raise ModelError("target profile is empty")
    for t in target:
        if not 0.5 <= t <= 1.0:
            raise ModelError("target eta values must lie in [1/2, 1]")
    vals = [0.0] * (2 * m * (m - 1) + m + 1)
    for i, t in enumerate(target, start=1):
        vals[2 * m * (i - 1)] = 1.0
        vals[2 * m * (i - 1) + i] = 2.0 - 1.0 / t
    return CoefficientSequence(tuple(vals))
