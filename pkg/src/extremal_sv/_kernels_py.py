"""Pure numpy twins of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def ma_filter(eta, lags, weights, n_out):
    lags = np.asarray(lags, dtype=np.intp)
    weights = np.asarray(weights, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    L = int(lags.max()) if lags.size else 0
    if eta.shape[0] < n_out + L:
        raise ValueError("eta is shorter than n_out + max lag")
    out = np.zeros(n_out, dtype=np.float64)
    # same accumulation order as the compiled loop: tap by tap
    for lag, w in zip(lags, weights):
        start = L - lag
        out = out + w * eta[start:start + n_out]
    return out


def lp_candidates(a, b, rtol, det_tol, zero_tol):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]

    pos = np.flatnonzero((a > 0.0) & (b > 0.0))
    with np.errstate(divide="ignore"):
        k_single = np.maximum(1.0 / a[pos], 1.0 / b[pos])

    ii, jj = np.triu_indices(n, k=1)
    det = a[ii] * b[jj] - a[jj] * b[ii]
    keep = np.abs(det) > det_tol
    ii, jj, det = ii[keep], jj[keep], det[keep]
    ki = (b[jj] - a[jj]) / det
    kj = (a[ii] - b[ii]) / det
    feas = (ki > zero_tol) & (kj > zero_tol)
    ii, jj, ki, kj = ii[feas], jj[feas], ki[feas], kj[feas]
    k_pair = ki + kj

    best = np.inf
    if k_single.size:
        best = min(best, float(k_single.min()))
    if k_pair.size:
        best = min(best, float(k_pair.min()))
    cut = best + rtol * best

    rows = []
    for i, k in zip(pos, k_single):
        if k <= cut:
            rows.append((i, -1, k, 0.0, k))
    sel = np.flatnonzero(k_pair <= cut)
    for m in sel:
        rows.append((ii[m], jj[m], ki[m], kj[m], k_pair[m]))
    if not rows:
        return best, np.empty((0, 5), dtype=np.float64)
    return best, np.asarray(rows, dtype=np.float64)


def _g(z, log_k, beta, log_p):
    if beta == 0.0:
        return log_k - z - log_p
    return log_k + beta * np.log(z) - z - log_p


def custom_tail_quantile(p, log_k, beta, z0, rtol):
    lp = np.log(np.asarray(p, dtype=np.float64))
    n = lp.shape[0]
    lo = np.full(n, z0, dtype=np.float64)
    width = np.ones(n)
    hi = z0 + width
    grow = _g(hi, log_k, beta, lp) >= 0.0
    while grow.any():
        lo[grow] = hi[grow]
        width[grow] *= 2.0
        hi[grow] = z0 + width[grow]
        grow = _g(hi, log_k, beta, lp) >= 0.0
    z = 0.5 * (lo + hi)
    active = np.ones(n, dtype=bool)
    for _ in range(200):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        zi, loi, hii = z[idx], lo[idx], hi[idx]
        gz = _g(zi, log_k, beta, lp[idx])
        up = gz > 0.0
        loi = np.where(up, zi, loi)
        hii = np.where(up, hii, zi)
        dg = beta / zi - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            znew = np.where(dg < 0.0, zi - gz / dg, 0.5 * (loi + hii))
        bad = ~((znew > loi) & (znew < hii))
        znew = np.where(bad, 0.5 * (loi + hii), znew)
        done = (np.abs(znew - zi) <= rtol * np.abs(znew)) | (hii - loi <= rtol * np.abs(hii))
        z[idx], lo[idx], hi[idx] = znew, loi, hii
        active[idx[done]] = False
    return z
