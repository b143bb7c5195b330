"""Geometry of the open cone ``E^d = (0, inf)^d`` and Breiman-type limits on it.

``tau(A) = sup_{x in S^d} min((A x)^+)`` with ``S^d = {x in E^d : min(x) = 1}``
is the cone analogue of an operator norm.  It is finite and positive
exactly when ``A^{-1}`` maps ``E^d`` into itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import optimize, special

from .rng import parallel_map, split_counts, stream

INV_TOL = 1e-12
ORACLE_CAP = 1e6


class ConeError(ValueError):
    pass


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ConeError("matrix must be square with d >= 1")
    if not np.all(np.isfinite(A)):
        raise ConeError("matrix entries must be finite")
    return A


def maps_cone_into_cone(A) -> bool:
    """True when some ``x`` in ``E^d`` has ``A x`` in ``E^d``.

    By scaling this is the feasibility of ``x >= 1, A x >= 1``.
    """
    A = _square(A)
    d = A.shape[0]
    res = optimize.linprog(
        np.zeros(d), A_ub=-A, b_ub=-np.ones(d), bounds=[(1.0, None)] * d, method="highs"
    )
    return res.status == 0


def tau(A) -> float:
    """``tau(A)``; returns ``math.inf`` or ``0.0`` when ``A`` is not cone preserving.

    If ``A`` is invertible with ``A^{-1} >= 0`` entrywise, then
    ``tau(A) = max_i 1 / (row sum i of A^{-1})``.  Otherwise ``tau`` can only
    be 0 or infinite, and it is infinite exactly when ``A`` maps some point
    of the cone into the cone.
    """
    A = _square(A)
    d = A.shape[0]
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0 and np.all(np.diag(A) > 0.0):
        return float(np.max(np.diag(A)))
    if np.linalg.matrix_rank(A) == d:
        inv = np.linalg.inv(A)
        scale = np.max(np.abs(inv))
        if np.all(inv >= -INV_TOL * scale):
            rs = np.maximum(inv, 0.0).sum(axis=1)
            return float(np.max(1.0 / rs))
    return math.inf if maps_cone_into_cone(A) else 0.0


def _ternary_max(f, lo, hi, iters=90):
    """Vectorised ternary search for the max of concave ``f`` on ``[lo, hi]`` (arrays)."""
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        left = f(m1) < f(m2)
        lo = np.where(left, m1, lo)
        hi = np.where(left, hi, m2)
    x = 0.5 * (lo + hi)
    return x, f(x)


def tau_numeric_oracle(A, grid_resolution: int = 1000, zoom_rounds: int = 12) -> float:
    """Numerical ``sup min((A x)^+)`` over ``S^d`` with coordinates capped at 1e6.

    ``min(A x)`` is concave, so on each face ``x_k = 1`` of ``S^d`` a grid of
    ``grid_resolution`` points is scanned and the best cell zoomed into; the
    last free coordinate (d = 3) is maximised by ternary search.  Never
    touches ``A^{-1}``: it is a cross-check for ``tau``.  Only d in {2, 3}.
    """
    A = _square(A)
    d = A.shape[0]
    if d not in (2, 3):
        raise ConeError("the grid oracle supports d = 2 or 3 only")
    if grid_resolution < 100:
        raise ConeError("grid_resolution must be at least 100")
    cap = ORACLE_CAP
    best = -math.inf
    for k in range(d):
        free = [j for j in range(d) if j != k]

        def g(y, k=k, free=free):
            # best value over the last free coordinate for each y
            if d == 2:
                return _objective(A, k, free, [y])
            zs, vals = _ternary_max(lambda z: _objective(A, k, free, [y, z]),
                                    np.ones_like(y), np.full_like(y, cap))
            return vals

        lo, hi = 1.0, cap
        for _ in range(zoom_rounds):
            ys = np.linspace(lo, hi, grid_resolution)
            vals = g(ys)
            i = int(np.argmax(vals))
            best = max(best, float(vals[i]))
            lo, hi = ys[max(i - 1, 0)], ys[min(i + 1, grid_resolution - 1)]
            if hi - lo < 1e-9 * hi:
                break
    return max(best, 0.0)


def _objective(A, k, free, coords):
    """``min(A x)`` with ``x_k = 1`` and the free coordinates given."""
    out = None
    for row in A:
        v = row[k]
        for j, c in zip(free, coords):
            v = v + row[j] * c
        out = v if out is None else np.minimum(out, v)
    return out


# --------------------------------------------------------------------------
# Breiman-type limit for diagonal random multipliers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Multiplier:
    """Distribution of one diagonal multiplier ``D_i``.

    kinds: ``constant`` (value), ``lognormal`` (mu, sigma),
    ``folded_student_t`` (nu: |T_nu|), ``normal_positive_part`` (max(N, 0)).
    """

    kind: str
    value: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    nu: float = math.inf

    def __post_init__(self):
        if self.kind not in ("constant", "lognormal", "folded_student_t", "normal_positive_part"):
            raise ConeError(f"unsupported multiplier family {self.kind!r}")
        if self.kind == "constant" and not self.value > 0.0:
            raise ConeError("constant multiplier must be positive")
        if self.kind == "lognormal" and not self.sigma >= 0.0:
            raise ConeError("lognormal sigma must be non-negative")
        if self.kind == "folded_student_t" and not self.nu > 0.0:
            raise ConeError("nu must be positive")

    def has_moment(self, r: float) -> bool:
        """Whether ``E(D^r) < inf`` for some exponent strictly above ``r``."""
        if self.kind == "folded_student_t":
            return self.nu > r
        return True

    def sample(self, rng, size):
        if self.kind == "constant":
            return np.full(size, self.value)
        if self.kind == "lognormal":
            return np.exp(self.mu + self.sigma * rng.standard_normal(size))
        if self.kind == "folded_student_t":
            return np.abs(rng.standard_t(self.nu, size))
        return np.maximum(rng.standard_normal(size), 0.0)

    def moment(self, r: float) -> float:
        """Closed-form ``E((D^+)^r)``."""
        if self.kind == "constant":
            return self.value ** r
        if self.kind == "lognormal":
            return math.exp(r * self.mu + 0.5 * (r * self.sigma) ** 2)
        if self.kind == "normal_positive_part":
            return 2 ** (r / 2 - 1) * math.gamma((r + 1) / 2) / math.sqrt(math.pi)
        nu = self.nu
        if r >= nu:
            return math.inf
        return nu ** (r / 2) * math.exp(
            special.gammaln((r + 1) / 2) + special.gammaln((nu - r) / 2) - special.gammaln(nu / 2)
        ) / math.sqrt(math.pi)


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    samples: int


def _chunk_moments(seed, idx, n, multipliers, alphas):
    rng = stream(seed, 0xB4E1, idx)
    prod = np.ones(n)
    for m, a in zip(multipliers, alphas):
        prod *= np.maximum(m.sample(rng, n), 0.0) ** a
    return float(prod.sum()), float(np.square(prod).sum())


def breiman_limit_diagonal(alpha: Union[float, Sequence[float]], multipliers: Sequence[Multiplier], s,
                           mc_samples: int = 10 ** 6, seed: int = 0, workers=None,
                           chunk: int = 1 << 20) -> McEstimate:
    """``E(nu(D^{-1} B))`` for ``B = x (s_i, inf)`` and ``nu`` the product measure ``prod s_i^{-alpha_i}``.

    Equals ``prod_i s_i^{-alpha_i} * E(prod_i (D_i^+)^{alpha_i})``.  The
    ``s`` dependence is applied analytically, so for a fixed seed the result
    at ``t * s`` is exactly ``t^{-sum alpha}`` times the result at ``s``.
    """
    s = np.asarray(s, dtype=np.float64)
    d = s.shape[0]
    if len(multipliers) != d:
        raise ConeError("need one multiplier per axis")
    if np.any(s <= 0.0):
        raise ConeError("rectangle corner must lie in the open cone")
    alphas = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (d,))
    if np.any(alphas <= 0.0):
        raise ConeError("alpha must be positive")
    total = float(alphas.sum())
    for m in multipliers:
        if not m.has_moment(total):
            raise ConeError(f"moment condition fails for {m.kind}: need a moment above {total}")
    scale = float(np.prod(s ** -alphas))
    if all(m.kind == "constant" for m in multipliers):
        return McEstimate(scale * float(np.prod([m.value ** a for m, a in zip(multipliers, alphas)])), 0.0, 0)
    sizes = [c for c in split_counts(mc_samples, max(1, -(-mc_samples // chunk))) if c > 0]
    parts = parallel_map(lambda ic: _chunk_moments(seed, ic[0], ic[1], multipliers, alphas),
                         list(enumerate(sizes)), workers)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    n = sum(sizes)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return McEstimate(scale * mean, scale * math.sqrt(var / n), n)
