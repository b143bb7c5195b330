"""Limit measures on the open cone attached to an LP solution.

All measures are normalised to 1 at ``(s0, s1) = (1, 1)``, i.e. they are
limits of ``P(Y0 > s0 x, Y1 > s1 x) / P(min(Y0, Y1) > x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .cone import McEstimate
from .lp import LpError, LpSolution, TailLp, residual_exponents, sv_lag_lp
from .model import CoefficientSequence, EpsFamily, EtaFamily, ModelError
from .rng import parallel_map, split_counts, stream

CHUNK = 1 << 18


def _pair(sol: LpSolution):
    if not sol.unique or sol.case_tag.kind != "TwoFactor":
        raise LpError(f"needs a unique two-factor solution, got {sol.case_tag}")
    return sol.support


def rectangle_exponents(sol: LpSolution, lp: TailLp):
    """Exponents ``(p, q)`` with limit measure ``s0**p * s1**q``; ``p + q = -objective``."""
    i, j = _pair(sol)
    a, b = lp.a, lp.b
    det = a[i] * b[j] - a[j] * b[i]
    return (b[i] - b[j]) / det, (a[j] - a[i]) / det


def rectangle_measure(sol: LpSolution, lp: TailLp, s0, s1):
    """Limit measure of ``(s0, inf) x (s1, inf)`` for a unique two-factor solution.

    ``s0`` scales the first constraint (row ``a``), ``s1`` the second.
    """
    p, q = rectangle_exponents(sol, lp)
    s0 = np.asarray(s0, dtype=np.float64)
    s1 = np.asarray(s1, dtype=np.float64)
    if np.any(s0 <= 0.0) or np.any(s1 <= 0.0):
        raise ValueError("s0 and s1 must be positive")
    out = s0 ** p * s1 ** q
    return float(out) if out.ndim == 0 else out


def _mc_mean(draw, mc_samples, seed, key, workers):
    """Chunked Monte Carlo mean and standard error of ``draw(rng, n)``."""
    sizes = [c for c in split_counts(mc_samples, max(1, -(-mc_samples // CHUNK))) if c > 0]

    def run(ic):
        idx, n = ic
        v = draw(stream(seed, key, idx), n)
        return math.fsum(v), math.fsum(v * v)

    parts = parallel_map(run, list(enumerate(sizes)), workers)
    n = sum(sizes)
    mean = math.fsum(p[0] for p in parts) / n
    var = max(math.fsum(p[1] for p in parts) / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n), n


def constant_D(sol: LpSolution, lp: TailLp, residual: Union[str, EtaFamily] = "pareto",
               mc_samples: int = 0, seed: int = 0, method: str = "auto", workers=None) -> McEstimate:
    """Constant in front of the rectangle law for products of independent factors.

    ``residual`` is ``"pareto"`` for unit Pareto factors (``E X^e = 1/(1-e)``)
    or an ``EtaFamily`` for ``X = exp(eta)`` (``E X^e = MGF(e)``).  The residual
    moment is closed form where possible; ``method="mc"`` forces Monte Carlo,
    which is also used for families without a closed-form MGF.

    Every index outside the support contributes a residual factor, so pass
    the full program rather than a truncated one.
    """
    i, j = _pair(sol)
    a, b = lp.a, lp.b
    det = a[i] * b[j] - a[j] * b[i]
    pre = abs(det) / ((a[i] - a[j]) * (b[j] - b[i]))
    e = residual_exponents(sol, lp)
    e = np.delete(e, [i, j])
    e = e[e != 0.0]
    if np.any(e >= 1.0):
        raise LpError("a residual exponent is >= 1: the residual moment diverges")

    pareto = isinstance(residual, str)
    if pareto and residual != "pareto":
        raise ValueError("residual must be 'pareto' or an EtaFamily")
    if not pareto:
        for x in e:
            if not residual.mgf_finite(float(x)):
                raise LpError(f"moment generating function infinite at residual exponent {x}")

    closed = pareto or residual.kind in ("gamma", "laplace")
    if method == "auto":
        method = "exact" if closed else "mc"
    if method == "exact":
        if pareto:
            m = float(np.prod(1.0 / (1.0 - e)))
        else:
            m = float(np.prod([residual.mgf(float(x)) for x in e]))
        return McEstimate(pre * m, 0.0, 0)
    if method != "mc":
        raise ValueError("method must be 'auto', 'exact' or 'mc'")
    if mc_samples <= 0:
        raise ValueError("Monte Carlo needs mc_samples > 0")

    def draw(rng, n):
        log_prod = np.zeros(n)
        for x in e:
            if pareto:
                log_prod -= x * np.log1p(-rng.random(n))
            else:
                log_prod += x * residual.sample(rng, n)
        return np.exp(log_prod)

    mean, se, n = _mc_mean(draw, mc_samples, seed, 0xD0, workers)
    return McEstimate(pre * mean, pre * se, n)


@dataclass(frozen=True)
class RatioEstimate:
    value: float
    stderr: float
    samples: int
    bias_bound: float = 0.0


def one_factor_ratio(coeffs, h: int, i: int, s0: float, sh: float, eta: EtaFamily,
                     eps: Optional[EpsFamily] = None, mc_samples: int = 10 ** 6, seed: int = 0,
                     truncation: Optional[int] = None, workers=None) -> RatioEstimate:
    """Limit measure of ``(s0, inf) x (sh, inf)`` when one factor ``i`` carries the optimum.

    With ``a_j = alpha_{j-h}`` and ``b_j = alpha_j`` the value is
    ``E min(P0/s0, Ph/sh)**(1/alpha_i) / E min(P0, Ph)**(1/alpha_i)`` where
    ``P0 = exp(sum_{j != i} a_j eta_j)`` and ``Ph = exp(sum_{j != i} b_j eta_j)``,
    each optionally multiplied by an independent ``eps^+`` (returns instead of
    volatilities).  Numerator and denominator share their random numbers, so
    scaling ``(s0, sh)`` by ``t`` scales the estimate by exactly ``t**(-1/alpha_i)``.

    ``truncation`` keeps only factors ``j < truncation``; the reported
    ``bias_bound`` bounds the relative effect of the dropped factors on each
    expectation and is 0 when nothing is dropped.
    """
    if not isinstance(coeffs, CoefficientSequence):
        coeffs = CoefficientSequence(tuple(coeffs))
    lp = sv_lag_lp(coeffs, h)
    a = np.asarray(lp.a)
    b = np.asarray(lp.b)
    if not (0 <= i < len(a)) or i < h or a[i] != b[i] or a[i] <= 0.0:
        raise LpError("one-factor limit needs i >= h and alpha_i = alpha_{i-h} > 0")
    if not (s0 > 0.0 and sh > 0.0):
        raise ValueError("s0 and sh must be positive")
    inv = 1.0 / a[i]
    n = len(a) if truncation is None else min(len(a), int(truncation))
    if n <= i:
        raise ValueError("truncation must keep the support index")
    keep = [j for j in range(n) if j != i and (a[j] > 0.0 or b[j] > 0.0)]
    aw, bw = a[keep], b[keep]

    bias = 0.0
    dropped = [j for j in range(n, len(a)) if a[j] > 0.0 or b[j] > 0.0]
    if dropped:
        # E exp(w|eta|) <= MGF(w) + MGF(-w); bounds the multiplicative change in each expectation
        factor = 1.0
        for j in dropped:
            w = (a[j] + b[j]) * inv
            if not (eta.mgf_finite(w) and eta.mgf_finite(-w)):
                factor = math.inf
                break
            factor *= eta.mgf(w) + eta.mgf(-w)
        bias = factor - 1.0

    def draw(rng, m):
        z = np.empty((m, len(keep)))
        for c in range(len(keep)):
            z[:, c] = eta.sample(rng, m)
        l0 = z @ aw if keep else np.zeros(m)
        lh = z @ bw if keep else np.zeros(m)
        p0, ph = np.exp(l0), np.exp(lh)
        if eps is not None:
            p0 = p0 * np.maximum(eps.sample(rng, m), 0.0)
            ph = ph * np.maximum(eps.sample(rng, m), 0.0)
        num = np.minimum(p0 / s0, ph / sh) ** inv
        den = np.minimum(p0, ph) ** inv
        return num, den

    sizes = [c for c in split_counts(mc_samples, max(1, -(-mc_samples // CHUNK))) if c > 0]

    def run(ic):
        idx, m = ic
        num, den = draw(stream(seed, 0x1F, idx), m)
        return math.fsum(num), math.fsum(den), num, den

    parts = parallel_map(run, list(enumerate(sizes)), workers)
    total = sum(sizes)
    sn = math.fsum(p[0] for p in parts)
    sd = math.fsum(p[1] for p in parts)
    if sd <= 0.0:
        raise ModelError("denominator expectation estimated as zero")
    ratio = sn / sd
    # delta method for a ratio of means
    ss = math.fsum(float(np.sum(np.square(p[2] - ratio * p[3]))) for p in parts)
    se = math.sqrt(ss / total) / (sd / total) / math.sqrt(total)
    return RatioEstimate(ratio, se, total, bias)
