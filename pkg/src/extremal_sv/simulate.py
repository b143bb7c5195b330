"""Monte Carlo paths of the SV model and tail estimators to check the theory against.

Each replication ``r`` draws from its own stream ``(seed, r)``: first the
log-volatility innovations, then the multiplicative ones.  Worker count
only changes wall time.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import zipfile
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from . import _backend
from .model import ConstantEps, CustomTailEta, ModelError, SvModel, normalizing_constant
from .rng import parallel_map, resolve_workers, stream


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    """``T`` observations per replication, ``R`` replications.

    ``L`` is the number of moving-average coefficients used; it defaults to
    the support length of the coefficient list (the list is the truncation).
    """

    model: SvModel
    T: int
    R: int = 1
    L: Optional[int] = None
    seed: int = 0
    workers: Optional[int] = None

    def __post_init__(self):
        if self.T < 1 or self.R < 1:
            raise SimulationError("T and R must be at least 1")
        supp = self.model.coeffs.support_length
        L = supp if self.L is None else int(self.L)
        if L < supp:
            raise SimulationError(f"L = {L} is shorter than the coefficient support ({supp})")
        object.__setattr__(self, "L", L)

    def config_hash(self) -> str:
        blob = json.dumps({"model": self.model.to_dict(), "T": self.T, "R": self.R, "L": self.L,
                           "seed": self.seed}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SimulationBatch:
    """Arrays of shape ``(R, T)``."""

    sigma: np.ndarray
    x: np.ndarray
    seed: int = 0
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def R(self):
        return self.sigma.shape[0]

    @property
    def T(self):
        return self.sigma.shape[1]

    def series(self, which: str = "x") -> np.ndarray:
        if which == "x":
            return self.x
        if which == "sigma":
            return self.sigma
        if which == "abs":
            return np.abs(self.x)
        raise ValueError("series must be 'x', 'sigma' or 'abs'")

    def save(self, path) -> None:
        """npz archive with fixed zip timestamps, so equal batches give equal bytes."""
        meta = np.array(json.dumps({"seed": self.seed, "config_hash": self.config_hash, **self.meta},
                                   sort_keys=True))
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            for name, arr in (("sigma", self.sigma), ("x", self.x), ("meta", meta)):
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asanyarray(arr), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())

    @classmethod
    def load(cls, path) -> "SimulationBatch":
        with np.load(path, allow_pickle=False) as f:
            meta = json.loads(str(f["meta"]))
            seed = int(meta.pop("seed", 0))
            h = meta.pop("config_hash", "")
            return cls(np.array(f["sigma"]), np.array(f["x"]), seed, h, meta)


def _ma_taps(model: SvModel, L: int):
    alpha = model.coeffs.as_array()[:L]
    lags = np.flatnonzero(alpha).astype(np.intp)
    weights = np.ascontiguousarray(alpha[lags] * model.coeffs.scale)
    return lags, weights


def simulate_replication(model: SvModel, T: int, L: int, seed: int, r: int):
    """``(sigma, x)`` for replication ``r``; ``log sigma_t = c * sum_{i<L} alpha_i eta_{t-i}``."""
    lags, weights = _ma_taps(model, L)
    rng = stream(seed, r)
    eta = np.ascontiguousarray(model.eta.sample(rng, T + int(lags.max())))
    logs = _backend.ma_filter(eta, lags, weights, T)
    sigma = np.exp(logs)
    if isinstance(model.eps, ConstantEps):
        x = sigma.copy()
    else:
        x = sigma * model.eps.sample(rng, T)
    return sigma, x


def iter_replications(config: SimulationConfig) -> Iterator:
    """Yield ``(r, sigma, x)`` in replication order, simulating ``workers`` at a time."""
    n = resolve_workers(config.workers)
    for start in range(0, config.R, n):
        idx = list(range(start, min(start + n, config.R)))
        outs = parallel_map(lambda r: simulate_replication(config.model, config.T, config.L, config.seed, r),
                            idx, n)
        for r, (s, x) in zip(idx, outs):
            yield r, s, x


def simulate_paths(config: SimulationConfig) -> SimulationBatch:
    sig = np.empty((config.R, config.T))
    xs = np.empty((config.R, config.T))
    for r, s, x in iter_replications(config):
        sig[r], xs[r] = s, x
    return SimulationBatch(sig, xs, config.seed, config.config_hash(), {"T": config.T, "R": config.R, "L": config.L})


def _lag_pairs(arr: np.ndarray, h: int):
    """Pool ``(y_t, y_{t+h})`` over replications."""
    arr = np.atleast_2d(arr)
    if not 1 <= h < arr.shape[1]:
        raise SimulationError("lag must satisfy 1 <= h < T")
    return arr[:, :-h].ravel(), arr[:, h:].ravel()


# --------------------------------------------------------------------------
# joint exceedances
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExceedanceRatio:
    value: float
    ci_low: float
    ci_high: float
    numerator: int
    denominator: int
    threshold: float
    low_power: bool


def _wilson(k, n, z=1.96):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    return centre - half, centre + half


def _ratio_from_counts(num, den, thr):
    if den == 0:
        raise SimulationError("no exceedances of the threshold")
    value = num / den
    if num <= den:
        lo, hi = _wilson(num, den)
    else:
        half = 1.96 * math.sqrt(num) / den
        lo, hi = value - half, value + half
    return ExceedanceRatio(value, lo, hi, int(num), int(den), float(thr), den < 50)


def _top_count(n_pairs: int, u: float) -> int:
    if not 0.0 < u < 1.0:
        raise SimulationError("u must lie in (0, 1)")
    k = int(round((1.0 - u) * n_pairs))
    if k < 1 or k >= n_pairs:
        raise SimulationError("u leaves no exceedances; use more data or a lower u")
    return k


def pair_ratio(y0, y1, s0, sh, u):
    """Ratio of ``#{y0 > s0 x, y1 > sh x}`` to ``#{min(y0, y1) > x}``.

    ``x`` is the empirical ``u``-quantile of ``min(y0, y1)``: the value with
    exactly ``round((1-u) N)`` pairs strictly above it.
    """
    m = np.minimum(y0, y1)
    k = _top_count(m.size, u)
    thr = float(np.partition(m, m.size - k - 1)[m.size - k - 1])
    den = int(np.count_nonzero(m > thr))
    num = int(np.count_nonzero((y0 > s0 * thr) & (y1 > sh * thr)))
    return _ratio_from_counts(num, den, thr)


def joint_exceedance_ratio(batch: SimulationBatch, h: int, s0: float, sh: float, u: float,
                           series: str = "x") -> ExceedanceRatio:
    """Empirical ``P(Y_0 > s0 x, Y_h > sh x) / P(min(Y_0, Y_h) > x)`` at the ``u``-quantile of the min."""
    y0, y1 = _lag_pairs(batch.series(series), h)
    return pair_ratio(y0, y1, s0, sh, u)


class TailPairReservoir:
    """Streaming version of :func:`joint_exceedance_ratio` for very many pairs.

    Each added block keeps only the pairs whose min is above the block's own
    ``1 - slack (1 - u)`` quantile; the global ``u``-quantile is valid when it
    lies above every block cutoff, which is checked.  Ratios then need
    ``s0, sh >= 1`` so that every counted pair is a retained candidate.
    """

    def __init__(self, u: float, slack: float = 10.0):
        self.u = u
        self.keep_q = 1.0 - slack * (1.0 - u)
        if not 0.0 < self.keep_q < u:
            raise SimulationError("slack too large for this u")
        self.n = 0
        self.cutoffs = []
        self.y0 = []
        self.y1 = []

    def add(self, y0, y1):
        m = np.minimum(y0, y1)
        j = int(math.floor(self.keep_q * (m.size - 1)))
        cut = float(np.partition(m, j)[j])
        sel = m > cut
        self.n += m.size
        self.cutoffs.append(cut)
        self.y0.append(y0[sel].copy())
        self.y1.append(y1[sel].copy())

    def threshold(self):
        y0 = np.concatenate(self.y0)
        y1 = np.concatenate(self.y1)
        m = np.minimum(y0, y1)
        k = _top_count(self.n, self.u)
        if m.size <= k:
            raise SimulationError("too few retained candidates")
        thr = float(np.partition(m, m.size - k - 1)[m.size - k - 1])
        if thr < max(self.cutoffs):
            raise SimulationError("global threshold fell below a block cutoff; increase slack")
        return thr, y0, y1, m

    def ratio(self, s0, sh) -> ExceedanceRatio:
        if s0 < 1.0 or sh < 1.0:
            raise SimulationError("streaming ratios need s0, sh >= 1")
        thr, y0, y1, m = self.threshold()
        den = int(np.count_nonzero(m > thr))
        num = int(np.count_nonzero((y0 > s0 * thr) & (y1 > sh * thr)))
        return _ratio_from_counts(num, den, thr)


def stream_joint_exceedance(config: SimulationConfig, h: int, grid: Sequence, u: float,
                            series: str = "x", slack: float = 10.0) -> dict:
    """``{(s0, sh): ExceedanceRatio}`` without holding all paths in memory."""
    res = TailPairReservoir(u, slack)
    for _, s, x in iter_replications(config):
        y = x if series == "x" else s
        res.add(y[:-h], y[h:])
    return {(float(a), float(b)): res.ratio(a, b) for a, b in grid}


# --------------------------------------------------------------------------
# Hill-type estimators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    k: int = 0


def hill(values, k: int) -> float:
    """Hill estimate of the extreme value index from the ``k`` largest positive values."""
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if not 1 <= k < n:
        raise SimulationError("k out of range")
    top = np.partition(v, n - k - 1)[n - k - 1:]
    ref = top.min()
    if ref <= 0.0:
        raise SimulationError("Hill needs positive order statistics")
    top = top[top.argsort()][1:]
    return float(np.mean(np.log(top / ref)))


def hill_index(values, k: Optional[int] = None) -> Estimate:
    """Hill estimate of ``1/alpha`` for a regularly varying sample."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if k is None:
        k = int(2 * math.sqrt(v.size))
    g = hill(v, k)
    return Estimate(g, g / math.sqrt(k), k)


def _pareto_ranks(y):
    n = y.size
    ranks = np.empty(n)
    ranks[np.argsort(y, kind="stable")] = np.arange(1, n + 1)
    return 1.0 / (1.0 - ranks / (n + 1.0))


def hill_eta_pairs(y0, y1, k: Optional[int] = None) -> Estimate:
    """Coefficient of tail dependence of the pairs ``(y0, y1)``.

    Both margins go to unit Pareto scale by empirical ranks,
    ``T = min(1/(1 - F0(y0)), 1/(1 - F1(y1)))``, and the Hill estimator is
    applied to ``T``.  Standard error ``eta / sqrt(k)``.
    """
    y0 = np.asarray(y0, dtype=np.float64).ravel()
    y1 = np.asarray(y1, dtype=np.float64).ravel()
    n = y0.size
    if k is None:
        k = int(2 * math.sqrt(n))
    if not 1 <= k < n / 10:
        raise SimulationError(f"k must satisfy 1 <= k < N/10 (N = {n})")
    t = np.minimum(_pareto_ranks(y0), _pareto_ranks(y1))
    e = hill(t, k)
    return Estimate(e, e / math.sqrt(k), k)


def hill_eta(batch: SimulationBatch, h: int, k: Optional[int] = None, series: str = "x") -> Estimate:
    y0, y1 = _lag_pairs(batch.series(series), h)
    return hill_eta_pairs(y0, y1, k)


# --------------------------------------------------------------------------
# extremal index and maxima
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremalIndex:
    value: float
    stderr: float
    raw: float
    blocks: int
    blocks_hit: int
    exceedances: int
    threshold: float


def extremal_index_blocks(y, b: int, u: float = 0.999) -> ExtremalIndex:
    """Blocks estimator ``log(1 - N_b/B) / (b log(1 - N_e/n))``, clipped to at most 1.

    ``y`` has shape ``(R, T)``; each row is cut into ``B = floor(T/b)``
    blocks of length ``b``.  The threshold is the pooled empirical
    ``u``-quantile.  ``N_b`` counts blocks with an exceedance, ``N_e``
    exceedances, ``n`` the observations used.  The raw estimate is kept in
    ``raw``; ``stderr`` is a delta-method value treating blocks as independent.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    R, T = y.shape
    nb = T // b
    if b < 1 or nb < 1:
        raise SimulationError("need b >= 1 and at least one full block")
    used = y[:, : nb * b]
    thr = float(np.quantile(used, u))
    exc = used > thr
    n_e = int(exc.sum())
    B = R * nb
    n_b = int(exc.reshape(R, nb, b).any(axis=2).sum())
    n = used.size
    if n_e == 0:
        raise SimulationError("no exceedances: extremal index undefined")
    if n_b == B:
        raise SimulationError("every block has an exceedance; raise u or shorten blocks")
    pb, pe = n_b / B, n_e / n
    lb, le = math.log1p(-pb), math.log1p(-pe)
    raw = lb / (b * le)
    d_pb = -1.0 / ((1.0 - pb) * b * le)
    d_pe = lb / (b * (1.0 - pe) * le * le)
    var = d_pb ** 2 * pb * (1 - pb) / B + d_pe ** 2 * pe * (1 - pe) / n
    return ExtremalIndex(min(raw, 1.0), math.sqrt(var), raw, B, n_b, n_e, thr)


def extremal_index(batch: SimulationBatch, b: int, u: float = 0.999, series: str = "sigma") -> ExtremalIndex:
    return extremal_index_blocks(batch.series(series), b, u)


@dataclass(frozen=True)
class MaximaRow:
    z: float
    empirical: float
    stderr: float
    frechet: float


def normalized_maxima(model: SvModel, n: int, R: int, z_grid: Iterable[float] = (0.5, 1.0, 2.0),
                      seed: int = 0, workers=None, L: Optional[int] = None):
    """Empirical ``P(max_{t<=n} sigma_t <= a_n z)`` over ``R`` independent paths vs ``exp(-1/z)``.

    ``a_n = k_hat * n * (log n)**beta_hat``.
    """
    cfg = SimulationConfig(model, n, R, L, seed, workers)
    a_n = normalizing_constant(model, n)
    maxima = np.empty(R)
    for r, s, _ in iter_replications(cfg):
        maxima[r] = s.max()
    rows = []
    for z in z_grid:
        p = float(np.mean(maxima <= a_n * z))
        rows.append(MaximaRow(float(z), p, math.sqrt(p * (1 - p) / R), math.exp(-1.0 / z)))
    return rows


# --------------------------------------------------------------------------
# marginal checks
# --------------------------------------------------------------------------

def empirical_survival(values, x):
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    x = np.asarray(x, dtype=np.float64)
    return (v.size - np.searchsorted(v, x, side="right")) / v.size


def tail_slope(values, q_low: float = 0.999, q_high: float = 0.9999, points: int = 20) -> float:
    """Least-squares slope of ``log P(Y > x)`` against ``log x`` for ``x`` between two quantiles."""
    v = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = np.quantile(v, [q_low, q_high])
    xs = np.exp(np.linspace(math.log(lo), math.log(hi), points))
    sv = empirical_survival(v, xs)
    return float(np.polyfit(np.log(xs), np.log(sv), 1)[0])


def tail_balance(x, u: float = 0.999) -> float:
    """``P(X > t) / P(|X| > t)`` at the ``u``-quantile ``t`` of ``|X|``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    t = float(np.quantile(np.abs(x), u))
    big = np.abs(x) > t
    return float(np.count_nonzero(x[big] > 0) / np.count_nonzero(big))


def sample_acf(y, lag: int) -> float:
    y = np.asarray(y, dtype=np.float64).ravel()
    y = y - y.mean()
    return float(np.dot(y[:-lag], y[lag:]) / np.dot(y, y))


# --------------------------------------------------------------------------
# asymptotic dependence probe
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeRow:
    u: float
    threshold: float
    value: float
    stderr: float
    conditioning: int


def conditional_exceedance_pairs(y0, y1, u_grid) -> list:
    """``P(Y_h > x | Y_0 > x)`` with ``x`` the pooled ``u``-quantile of ``Y_0``."""
    rows = []
    for u in u_grid:
        thr = float(np.quantile(y0, u))
        cond = y0 > thr
        n = int(cond.sum())
        if n == 0:
            raise SimulationError("no exceedances at this u")
        p = float(np.count_nonzero(y1[cond] > thr) / n)
        rows.append(ProbeRow(float(u), thr, p, math.sqrt(p * (1 - p) / n), n))
    return rows


def conditional_exceedance_curve(config: SimulationConfig, h: int, u_grid=(0.99, 0.999, 0.9999),
                                 series: str = "sigma") -> list:
    """Streaming ``P(Y_h > x_u | Y_0 > x_u)`` over a grid of quantile levels.

    Keeps the pairs with ``Y_0`` above each replication's ``1 - 10(1 - min u)``
    quantile, then thresholds at the pooled quantiles.
    """
    umin = min(u_grid)
    keep_q = max(0.0, 1.0 - 10.0 * (1.0 - umin))
    n = 0
    cut_max = -math.inf
    k0, k1 = [], []
    for _, s, x in iter_replications(config):
        y = s if series == "sigma" else x
        y0, y1 = y[:-h], y[h:]
        cut = float(np.quantile(y0, keep_q)) if keep_q > 0 else -math.inf
        sel = y0 > cut
        cut_max = max(cut_max, cut)
        k0.append(y0[sel])
        k1.append(y1[sel])
        n += y0.size
    y0 = np.concatenate(k0)
    y1 = np.concatenate(k1)
    rows = []
    for u in u_grid:
        k = _top_count(n, u)
        if y0.size <= k:
            raise SimulationError("too few retained candidates")
        thr = float(np.partition(y0, y0.size - k - 1)[y0.size - k - 1])
        if thr < cut_max:
            raise SimulationError("pooled threshold fell below a replication cutoff")
        cond = y0 > thr
        m = int(cond.sum())
        p = float(np.count_nonzero(y1[cond] > thr) / m)
        rows.append(ProbeRow(float(u), thr, p, math.sqrt(p * (1 - p) / m), m))
    return rows


def asymptotic_dependence_probe(model: SvModel, h: int, T: int, R: int = 1, u_grid=(0.99, 0.999, 0.9999),
                                seed: int = 0, workers=None, series: str = "sigma") -> list:
    """Conditional exceedance probe for models where a single large innovation can drive two lags.

    Requires ``eta`` with ``beta < -1`` and some ``i`` with
    ``alpha_i = alpha_{i+h} = 1``; for such models the probe stays bounded
    away from 0 as ``u -> 1``.  Use :func:`conditional_exceedance_curve`
    directly for control models.
    """
    if not (isinstance(model.eta, CustomTailEta) and model.eta.beta < -1.0):
        raise ModelError("the probe needs a custom-tail eta with beta < -1")
    ones = set(model.coeffs.ones)
    if not any(i + h in ones for i in ones):
        raise ModelError(f"no pair of unit coefficients at lag {h}")
    return conditional_exceedance_curve(SimulationConfig(model, T, R, None, seed, workers), h, u_grid, series)
