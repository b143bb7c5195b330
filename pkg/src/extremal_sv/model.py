"""SV models with Gamma-type log-volatility.

The volatility is ``sigma_t = exp(c * sum_i alpha_i eta_{t-i})`` and the
return is ``X_t = sigma_t * eps_t``.  The innovations ``eta`` have an
exponential-type upper tail ``P(eta > z) ~ K z**beta exp(-z)``, which makes
``sigma_t`` regularly varying with index -1 (or -1/c).

Coefficient lists are finite: every coefficient past the end is exactly 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize, special

from . import _backend

ONE_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model parameters or model file."""


# --------------------------------------------------------------------------
# coefficients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSequence:
    """Log-volatility weights ``alpha_0..alpha_n`` with ``max alpha = 1``.

    ``scale`` is the global multiplier ``c`` on the log-volatility; it changes
    the tail index of ``sigma`` to ``-1/c`` and is ignored by everything
    defined on the log scale.
    """

    values: tuple
    decay_exponent: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ModelError("coefficient list is empty")
        if any(not math.isfinite(v) or v < 0.0 or v > 1.0 + ONE_TOL for v in vals):
            raise ModelError("coefficients must lie in [0, 1]")
        # snap values within rounding of 1 so the multiplicity k is well defined
        vals = tuple(1.0 if v >= 1.0 - ONE_TOL else v for v in vals)
        if max(vals) != 1.0:
            raise ModelError("the largest coefficient must equal 1; use `scale` for other tail indices")
        if self.decay_exponent is not None and not self.decay_exponent > 1.0:
            raise ModelError("decay_exponent must exceed 1")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ModelError("scale must be positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def ar1(cls, alpha: float, length: Optional[int] = None, tail_tol: float = 1e-6) -> "CoefficientSequence":
        """``alpha**i`` for ``i < length``: the AR(1) log-volatility, truncated.

        Without ``length`` the list stops at the first ``n`` whose dropped
        tail ``sum_{i >= n} alpha**i`` is below ``tail_tol``.
        """
        if not 0.0 < alpha < 1.0:
            raise ModelError("AR(1) coefficient must lie in (0, 1)")
        if length is None:
            length = max(1, math.ceil(math.log(tail_tol * (1.0 - alpha)) / math.log(alpha)))
        return cls(tuple(alpha ** i for i in range(length)))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.at(i)

    def at(self, i: int) -> float:
        """Coefficient ``alpha_i`` with the convention ``alpha_i = 0`` outside the list."""
        if 0 <= i < len(self.values):
            return self.values[i]
        return 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @property
    def ones(self) -> tuple:
        return tuple(i for i, v in enumerate(self.values) if v == 1.0)

    @property
    def k(self) -> int:
        """Multiplicity of the maximal coefficient."""
        return len(self.ones)

    @property
    def support_length(self) -> int:
        nz = [i for i, v in enumerate(self.values) if v > 0.0]
        return nz[-1] + 1

    def is_strictly_decreasing(self) -> bool:
        v = self.values[: self.support_length]
        return all(x > y for x, y in zip(v, v[1:]))


# --------------------------------------------------------------------------
# log-volatility innovations
# --------------------------------------------------------------------------

class EtaFamily:
    """Distribution of the log-volatility innovations.

    Subclasses expose the tail constants ``K`` and ``beta`` of
    ``P(eta > z) ~ K z**beta exp(-z)``, the exact survival function, the
    moment generating function and a sampler.
    """

    kind = "abstract"
    K: float
    beta: float

    def survival(self, z):
        raise NotImplementedError

    def mgf(self, s: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def mgf_finite(self, s: float) -> bool:
        return s < 1.0


@dataclass(frozen=True)
class GammaEta(EtaFamily):
    shape: float
    kind: str = field(default="gamma", init=False, repr=False)

    def __post_init__(self):
        if not self.shape > 0.0:
            raise ModelError("gamma shape must be positive")

    @property
    def K(self):
        return 1.0 / math.gamma(self.shape)

    @property
    def beta(self):
        return self.shape - 1.0

    def survival(self, z):
        z = np.asarray(z, dtype=np.float64)
        return np.where(z <= 0.0, 1.0, special.gammaincc(self.shape, np.maximum(z, 0.0)))

    def mgf(self, s):
        if s >= 1.0:
            return math.inf
        return (1.0 - s) ** (-self.shape)

    def sample(self, rng, size):
        return rng.standard_gamma(self.shape, size)

    def to_dict(self):
        return {"kind": "gamma", "shape": self.shape}


@dataclass(frozen=True)
class LaplaceEta(EtaFamily):
    """Symmetric unit-rate Laplace: ``P(eta > z) = exp(-z) / 2`` for z >= 0."""

    kind: str = field(default="laplace", init=False, repr=False)

    K = 0.5
    beta = 0.0

    def survival(self, z):
        z = np.asarray(z, dtype=np.float64)
        return np.where(z >= 0.0, 0.5 * np.exp(-np.abs(z)), 1.0 - 0.5 * np.exp(-np.abs(z)))

    def mgf(self, s):
        if abs(s) >= 1.0:
            return math.inf
        return 1.0 / (1.0 - s * s)

    def mgf_finite(self, s):
        return abs(s) < 1.0

    def sample(self, rng, size):
        return rng.laplace(0.0, 1.0, size)

    def to_dict(self):
        return {"kind": "laplace"}


def _default_z0(K, beta, level=0.9):
    """Point on the decreasing branch of K z^beta e^-z where it equals ``level``."""
    start = max(beta, 0.0)

    def f(z):
        return math.log(K) + (beta * math.log(z) if beta != 0.0 else 0.0) - z - math.log(level)

    lo = start if start > 0.0 else 1e-300
    if beta == 0.0:
        lo = 0.0
    if beta > 0.0 or beta == 0.0:
        if f(lo if lo > 0 else 1e-300) <= 0.0:
            # the tail never reaches `level`: start at its peak
            return start
    else:
        lo = 1e-12
        while f(lo) <= 0.0:
            lo *= 1e-3
    hi = max(lo, 1.0) + 1.0
    while f(hi) > 0.0:
        hi *= 2.0
    return optimize.brentq(f, max(lo, 1e-300), hi, xtol=1e-14, rtol=1e-14)


@dataclass(frozen=True)
class CustomTailEta(EtaFamily):
    """Innovation with survival exactly ``K z**beta exp(-z)`` above ``z0``.

    Below ``z0`` the remaining mass is spread uniformly over
    ``[z0 - fill_width, z0]``.  This body is one admissible choice: only the
    upper tail matters for the extremal behaviour.  ``beta < -1`` is allowed.
    """

    K: float
    beta: float
    z0: Optional[float] = None
    fill_width: float = 1.0
    kind: str = field(default="custom_tail", init=False, repr=False)

    def __post_init__(self):
        if not self.K > 0.0:
            raise ModelError("K must be positive")
        if self.beta == -1.0:
            raise ModelError("beta = -1 is excluded")
        if not self.fill_width > 0.0:
            raise ModelError("fill_width must be positive")
        z0 = _default_z0(self.K, self.beta) if self.z0 is None else float(self.z0)
        if self.beta != 0.0 and z0 <= 0.0:
            raise ModelError("z0 must be positive when beta != 0")
        if z0 < max(self.beta, 0.0):
            raise ModelError("survival must be non-increasing above z0 (need z0 >= max(beta, 0))")
        if self._tail(z0) > 1.0 + 1e-12:
            raise ModelError("K z0^beta e^-z0 exceeds 1; choose a larger z0")
        object.__setattr__(self, "z0", z0)

    def _tail(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.beta == 0.0:
            return self.K * np.exp(-z)
        return self.K * z ** self.beta * np.exp(-z)

    @property
    def s0(self) -> float:
        """Tail mass ``P(eta > z0)``."""
        return float(min(1.0, self._tail(self.z0)))

    def survival(self, z):
        z = np.asarray(z, dtype=np.float64)
        s0, z0, w = self.s0, self.z0, self.fill_width
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tail = self._tail(np.maximum(z, z0))
        body = s0 + (1.0 - s0) * (z0 - z) / w
        return np.where(z >= z0, np.minimum(tail, 1.0), np.where(z >= z0 - w, body, 1.0))

    def mgf_finite(self, s):
        return s < 1.0 or (s == 1.0 and self.beta < -1.0)

    def mgf(self, s):
        if not self.mgf_finite(s):
            return math.inf
        s0, z0, w = self.s0, self.z0, self.fill_width
        if s == 0.0:
            body = 1.0 - s0
        else:
            body = (1.0 - s0) * (math.exp(s * z0) - math.exp(s * (z0 - w))) / (w * s)
        K, b = self.K, self.beta

        def density_weighted(z):
            # e^{sz} times the tail density K z^{b-1} e^{-z} (z - b)
            return K * z ** (b - 1.0) * (z - b) * math.exp(-(1.0 - s) * z)

        tail, _ = integrate.quad(density_weighted, z0, math.inf, epsabs=1e-10, epsrel=1e-10, limit=500)
        return body + tail

    def sample(self, rng, size):
        p = 1.0 - rng.random(size)  # uniform on (0, 1]
        flat = np.ravel(p)
        out = np.empty_like(flat)
        s0 = self.s0
        tail = flat <= s0
        if tail.any():
            out[tail] = _backend.custom_tail_quantile(
                np.ascontiguousarray(flat[tail]), math.log(self.K), float(self.beta), float(self.z0), 1e-12
            )
        body = ~tail
        if body.any():
            out[body] = self.z0 - self.fill_width * (flat[body] - s0) / (1.0 - s0)
        return out.reshape(np.shape(p))

    def to_dict(self):
        return {"kind": "custom_tail", "K": self.K, "beta": self.beta, "z0": self.z0}


# --------------------------------------------------------------------------
# multiplicative innovations
# --------------------------------------------------------------------------

class EpsFamily:
    kind = "abstract"
    moment_bound: float

    def sample(self, rng, size):
        raise NotImplementedError

    @property
    def mean_abs(self) -> float:
        raise NotImplementedError

    @property
    def mean_pos(self) -> float:
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class NormalEps(EpsFamily):
    kind: str = field(default="normal", init=False, repr=False)
    moment_bound = math.inf

    def sample(self, rng, size):
        return rng.standard_normal(size)

    @property
    def mean_abs(self):
        return math.sqrt(2.0 / math.pi)

    @property
    def mean_pos(self):
        return 1.0 / math.sqrt(2.0 * math.pi)

    def to_dict(self):
        return {"kind": "normal"}


@dataclass(frozen=True)
class StudentTEps(EpsFamily):
    nu: float
    kind: str = field(default="student_t", init=False, repr=False)

    def __post_init__(self):
        if not self.nu > 1.0:
            raise ModelError("student_t needs nu > 1 for a finite first moment")

    @property
    def moment_bound(self):
        return self.nu

    def sample(self, rng, size):
        return rng.standard_t(self.nu, size)

    @property
    def mean_abs(self):
        nu = self.nu
        return 2.0 * math.sqrt(nu) * math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / (
            math.sqrt(math.pi) * (nu - 1.0)
        )

    @property
    def mean_pos(self):
        return 0.5 * self.mean_abs

    def to_dict(self):
        return {"kind": "student_t", "nu": self.nu}


@dataclass(frozen=True)
class ParetoEps(EpsFamily):
    """``|eps|`` Pareto on [1, inf) with index ``alpha``; positive with probability ``p``."""

    alpha: float
    p: float = 0.5
    kind: str = field(default="pareto", init=False, repr=False)

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ModelError("pareto eps needs alpha > 1")
        if not 0.0 < self.p <= 1.0:
            raise ModelError("pareto balance p must lie in (0, 1] so that P(eps > 0) > 0")

    @property
    def moment_bound(self):
        return self.alpha

    def sample(self, rng, size):
        mag = (1.0 - rng.random(size)) ** (-1.0 / self.alpha)
        sign = np.where(rng.random(size) < self.p, 1.0, -1.0)
        return sign * mag

    @property
    def mean_abs(self):
        return self.alpha / (self.alpha - 1.0)

    @property
    def mean_pos(self):
        return self.p * self.mean_abs

    def to_dict(self):
        return {"kind": "pareto", "alpha": self.alpha, "p": self.p}


@dataclass(frozen=True)
class ConstantEps(EpsFamily):
    """``eps = 1``: then ``X_t = sigma_t``."""

    kind: str = field(default="constant", init=False, repr=False)
    moment_bound = math.inf

    def sample(self, rng, size):
        return np.ones(size)

    @property
    def mean_abs(self):
        return 1.0

    @property
    def mean_pos(self):
        return 1.0

    def to_dict(self):
        return {"kind": "constant"}


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SvModel:
    coeffs: CoefficientSequence
    eta: EtaFamily
    eps: EpsFamily = field(default_factory=NormalEps)

    def __post_init__(self):
        if not isinstance(self.coeffs, CoefficientSequence):
            object.__setattr__(self, "coeffs", CoefficientSequence(tuple(self.coeffs)))

    @property
    def k(self) -> int:
        return self.coeffs.k

    def to_dict(self) -> dict:
        d = {
            "coeffs": list(self.coeffs.values),
            "eta": self.eta.to_dict(),
            "eps": self.eps.to_dict(),
            "scale": self.coeffs.scale,
        }
        if self.coeffs.decay_exponent is not None:
            d["decay_exponent"] = self.coeffs.decay_exponent
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_ETA_FIELDS = {"gamma": {"shape"}, "laplace": set(), "custom_tail": {"K", "beta", "z0"}}
_EPS_FIELDS = {"normal": set(), "student_t": {"nu"}, "pareto": {"alpha", "p"}, "constant": set()}


def _check_fields(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise ModelError(f"{where} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise ModelError(f"unknown field(s) in {where}: {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise ModelError(f"missing field(s) in {where}: {sorted(missing)}")


def eta_from_dict(d: dict) -> EtaFamily:
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind not in _ETA_FIELDS:
        raise ModelError(f"unknown eta kind {kind!r}")
    fields = _ETA_FIELDS[kind]
    _check_fields(d, fields | {"kind"}, (fields - {"z0"}) | {"kind"}, "eta")
    if kind == "gamma":
        return GammaEta(float(d["shape"]))
    if kind == "laplace":
        return LaplaceEta()
    return CustomTailEta(float(d["K"]), float(d["beta"]), d.get("z0"))


def eps_from_dict(d: dict) -> EpsFamily:
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind not in _EPS_FIELDS:
        raise ModelError(f"unknown eps kind {kind!r}")
    fields = _EPS_FIELDS[kind]
    required = {"kind"} | (fields - {"p"})
    _check_fields(d, fields | {"kind"}, required, "eps")
    if kind == "normal":
        return NormalEps()
    if kind == "student_t":
        return StudentTEps(float(d["nu"]))
    if kind == "pareto":
        return ParetoEps(float(d["alpha"]), float(d.get("p", 0.5)))
    return ConstantEps()


def model_from_dict(d: dict) -> SvModel:
    # "provenance" is written by the command line tool and ignored here
    _check_fields(d, {"coeffs", "eta", "eps", "scale", "decay_exponent", "provenance"},
                  {"coeffs", "eta", "eps"}, "model")
    coeffs = d["coeffs"]
    if not isinstance(coeffs, list) or not all(isinstance(c, (int, float)) for c in coeffs):
        raise ModelError("coeffs must be a list of numbers")
    seq = CoefficientSequence(tuple(coeffs), d.get("decay_exponent"), float(d.get("scale", 1.0)))
    return SvModel(seq, eta_from_dict(d["eta"]), eps_from_dict(d["eps"]))


def load_model(path) -> SvModel:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(d)


def save_model(model: SvModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# marginal tail
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MarginalTailConstants:
    """``P(log sigma > z) ~ k_hat * z**beta_hat * exp(-z)``."""

    beta_hat: float
    k_hat: float
    k: int


def mgf_product(eta: EtaFamily, weights) -> float:
    """``E exp(sum_n w_n eta_n)`` for independent copies of ``eta``."""
    out = 1.0
    for w in weights:
        if w == 0.0:
            continue
        if not eta.mgf_finite(w):
            raise ModelError(f"moment generating function of eta is infinite at {w}")
        out *= eta.mgf(w)
    return out


def tail_constants(model: SvModel) -> MarginalTailConstants:
    eta = model.eta
    if model.coeffs.scale != 1.0:
        raise ModelError("tail constants are defined for scale = 1 (tail index 1) only")
    beta, K = float(eta.beta), float(eta.K)
    if beta == -1.0:
        raise ModelError("beta = -1 is excluded")
    alpha = model.coeffs.values
    k = model.coeffs.k
    rest = [a for a in alpha if a != 1.0]
    for a in rest:
        if a >= 1.0:
            raise ModelError("MGF argument must be < 1")
    prod = mgf_product(eta, rest)
    if beta > -1.0:
        beta_hat = k * beta + k - 1.0
        log_k_hat = k * math.log(K) + k * special.gammaln(beta + 1.0) - special.gammaln(k * (beta + 1.0))
        k_hat = math.exp(log_k_hat) * prod
    else:
        beta_hat = beta
        m1 = eta.mgf(1.0) if k > 1 else 1.0
        if not math.isfinite(m1):
            raise ModelError("E exp(eta) must be finite when beta < -1 and k > 1")
        k_hat = k * K * m1 ** (k - 1) * prod
    return MarginalTailConstants(beta_hat=beta_hat, k_hat=k_hat, k=k)


def _constants(obj) -> MarginalTailConstants:
    if isinstance(obj, MarginalTailConstants):
        return obj
    return tail_constants(obj)


def marginal_survival_asymptote(model: Union[SvModel, MarginalTailConstants], x):
    """Asymptotic approximation ``k_hat (log x)**beta_hat / x`` of ``P(sigma_0 > x)``.

    This is the leading term only, not an exact probability.  Requires x > e.
    """
    c = _constants(model)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= math.e):
        raise ModelError("x must exceed e")
    out = c.k_hat * np.log(x) ** c.beta_hat / x
    return float(out) if out.ndim == 0 else out


def normalizing_constant(model: Union[SvModel, MarginalTailConstants], n) -> float:
    """Frechet normalisation ``a_n = k_hat * n * (log n)**beta_hat`` for sample maxima."""
    if n < 2:
        raise ModelError("n must be at least 2")
    c = _constants(model)
    return c.k_hat * n * math.log(n) ** c.beta_hat
