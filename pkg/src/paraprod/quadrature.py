"""Adaptive radial quadrature and angular trapezoid helpers.

Integrands are passed around as a pair ``(log_scale, values)`` so that
quantities like ``r**4000 * exp(-2 * exp(1 / (1 - r**2)))`` can be integrated
without ever materializing numbers outside the double range.  Each panel
factors out its own maximum log-scale before summing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GL15_X, _GL15_W = np.polynomial.legendre.leggauss(15)


@dataclass
class PanelResult:
    """Outcome of :func:`adaptive_panels` for a batch of ``B`` integrands.

    The integral of item ``b`` is ``exp(log_scale[b]) * total[b]``.
    """

    log_scale: np.ndarray
    total: np.ndarray
    abs_total: np.ndarray
    rel_err: np.ndarray
    levels: int
    converged: bool
    n_panels: int
    edges: np.ndarray | None = None

    def log_value(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.log_scale + np.log(self.total)

    def value(self) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(self.log_scale) * self.total
        return np.where(self.total == 0, 0.0, out)


def chebyshev_edges(a: float, b: float, n: int) -> np.ndarray:
    """Panel edges on [a, b] clustered towards ``b``."""
    i = np.arange(n + 1)
    edges = a + (b - a) * np.sin(0.5 * np.pi * i / n)
    edges[0], edges[-1] = a, b
    return edges


def _panel_sums(func, lo, hi, batch):
    """G15 estimate on each panel [lo_j, hi_j]; returns (m, s, sabs) of shape (B, P)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * _GL15_X[None, :]).ravel()
    log_scale, vals = func(nodes)
    P = lo.size
    log_scale = np.broadcast_to(log_scale, (batch, nodes.size)).reshape(batch, P, 15)
    if vals is None:
        vals = np.ones((batch, P, 15))
    else:
        vals = np.broadcast_to(vals, (batch, nodes.size)).reshape(batch, P, 15)
    m = np.max(log_scale, axis=2)
    finite = np.isfinite(m)
    m_safe = np.where(finite, m, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        e = np.exp(log_scale - m_safe[:, :, None])
    e = np.where(np.isfinite(log_scale), e, 0.0)
    wv = e * _GL15_W[None, None, :]
    s = np.sum(wv * vals, axis=2) * half[None, :]
    sabs = np.sum(wv * np.abs(vals), axis=2) * half[None, :]
    m = np.where(finite, m, -np.inf)
    s = np.where(finite, s, 0.0)
    sabs = np.where(finite, sabs, 0.0)
    return m, s, sabs


def _merge_halves(m1, s1, a1, m2, s2, a2):
    m = np.maximum(m1, m2)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(invalid="ignore"):
        f1 = np.where(np.isfinite(m1), np.exp(m1 - m_safe), 0.0)
        f2 = np.where(np.isfinite(m2), np.exp(m2 - m_safe), 0.0)
    return m, f1 * s1 + f2 * s2, f1 * a1 + f2 * a2


def adaptive_panels(func, a: float, b: float, rtol: float, *, batch: int = 1,
                    edges=None, n_init: int = 16, max_levels: int = 40,
                    max_panels: int = 20000, joint: bool = False) -> PanelResult:
    """Integrate ``B`` integrands over [a, b] by adaptive bisection of G15 panels.

    ``func(r)`` returns ``(log_scale, values)``; ``log_scale`` broadcasts to
    ``(B, len(r))`` and ``values`` is either ``None`` (all ones) or broadcasts
    to ``(B, len(r))``.  A panel is accepted once its 15-point estimate agrees
    with the sum of its two halves; the global stopping rule is
    ``sum |fine - coarse| <= rtol * integral of |f|`` for every item.  With
    ``joint=True`` errors and magnitudes are pooled over the batch (used for
    the real and imaginary parts of one complex integral).
    """
    if edges is None:
        edges = chebyshev_edges(a, b, n_init)
    lo = np.asarray(edges[:-1], dtype=float)
    hi = np.asarray(edges[1:], dtype=float)

    def evaluate(lo, hi):
        mid = 0.5 * (lo + hi)
        mc, sc, _ = _panel_sums(func, lo, hi, batch)
        ml, sl, al = _panel_sums(func, lo, mid, batch)
        mr, sr, ar = _panel_sums(func, mid, hi, batch)
        mf, sf, af = _merge_halves(ml, sl, al, mr, sr, ar)
        return mc, sc, mf, sf, af

    mc, sc, mf, sf, af = evaluate(lo, hi)
    levels = 0
    converged = False
    while True:
        M = np.max(mf, axis=1)
        M_safe = np.where(np.isfinite(M), M, 0.0)
        with np.errstate(invalid="ignore"):
            ff = np.where(np.isfinite(mf), np.exp(mf - M_safe[:, None]), 0.0)
            fc = np.where(np.isfinite(mc), np.exp(mc - M_safe[:, None]), 0.0)
        fine = ff * sf
        err = np.abs(fine - fc * sc)
        total = fine.sum(axis=1)
        abs_total = (ff * af).sum(axis=1)
        err_tot = err.sum(axis=1)
        if joint:
            common = np.exp(M_safe - np.max(M_safe))
            ok = np.full(batch, float(np.sum(err_tot * common)) <= rtol * float(np.sum(abs_total * common)))
        else:
            ok = err_tot <= rtol * abs_total
        if np.all(ok):
            converged = True
            break
        if levels >= max_levels or lo.size >= max_panels:
            break
        levels += 1
        # split panels carrying more than their share of the error budget
        if joint:
            budget = rtol * np.max(abs_total * common) / common[:, None] / lo.size
        else:
            budget = rtol * abs_total[:, None] / lo.size
        bad_items = ~ok
        over = (err > budget) & bad_items[:, None]
        split = np.any(over, axis=0)
        if not np.any(split):
            worst = err[bad_items].max(axis=0)
            split = worst >= 0.5 * worst.max()
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        nmc, nsc, nmf, nsf, naf = evaluate(new_lo, new_hi)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        mc = np.concatenate([mc[:, keep], nmc], axis=1)
        sc = np.concatenate([sc[:, keep], nsc], axis=1)
        mf = np.concatenate([mf[:, keep], nmf], axis=1)
        sf = np.concatenate([sf[:, keep], nsf], axis=1)
        af = np.concatenate([af[:, keep], naf], axis=1)
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
        mc, sc, mf, sf, af = mc[:, order], sc[:, order], mf[:, order], sf[:, order], af[:, order]

    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(abs_total > 0, err_tot / np.where(abs_total > 0, abs_total, 1.0), 0.0)
    return PanelResult(log_scale=M_safe, total=total, abs_total=abs_total, rel_err=rel,
                       levels=levels, converged=converged, n_panels=lo.size,
                       edges=np.append(lo, hi[-1]))


def integrate_log(log_f, a: float, b: float, rtol: float, **kw) -> PanelResult:
    """Integrate a single positive integrand given by its logarithm."""
    return adaptive_panels(lambda r: (log_f(r)[None, :], None), a, b, rtol, batch=1, **kw)


def cutoff_radius(log_envelope, floor: float, r_hi: float = 1.0 - 1e-15) -> float:
    """Smallest grid radius beyond which ``log_envelope`` stays below ``peak + floor``.

    ``log_envelope`` must be an upper bound of the log-integrand that is
    eventually decreasing; the returned radius is conservative by one grid
    step.
    """
    uniform = np.linspace(0.0, 0.9, 901)
    x = np.linspace(1.0, 15.0, 561)
    tail = 1.0 - 10.0 ** (-x)
    grid = np.unique(np.concatenate([uniform, tail, [r_hi]]))
    grid = grid[grid <= r_hi]
    with np.errstate(all="ignore"):
        env = log_envelope(grid)
    env = np.where(np.isnan(env), -np.inf, env)
    peak = np.max(env)
    if not np.isfinite(peak):
        return float(grid[1])
    above = np.nonzero(env >= peak + floor)[0]
    last = above[-1]
    return float(grid[min(last + 1, grid.size - 1)])


def circle_values(coeffs: np.ndarray, radii: np.ndarray, n_angles: int):
    """Values of the polynomial at ``radii[i] * exp(2 pi i m / n_angles)``.

    Returns ``(log_row_scale, values)`` where the true values are
    ``exp(log_row_scale[i]) * values[i, m]``.  Coefficients that are
    negligible (below ``e**-42`` of the row maximum) at the largest radius of
    the batch are dropped before the transform; trapezoid aliasing is
    handled by folding, so ``n_angles`` may be smaller than the degree.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    scale, scaled, _ = _scaled_rows(coeffs, radii)
    return scale, _fold_ifft(scaled, n_angles)


def effective_degree(coeffs: np.ndarray, r: float) -> int:
    """Highest index whose term is within ``e**-42`` of the largest term at radius ``r``."""
    coeffs = np.asarray(coeffs, dtype=complex)
    k = np.arange(coeffs.size)
    with np.errstate(divide="ignore"):
        logmag = np.log(np.abs(coeffs)) + (k * np.log(r) if r > 0 else np.where(k == 0, 0.0, -np.inf))
    if not np.any(np.isfinite(logmag)):
        return 0
    keep = logmag > np.max(logmag) - 42.0
    return int(np.nonzero(keep)[0][-1])


def next_pow2(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(max(n, 1)))))


def fast_len(n: int) -> int:
    """Smallest ``2**a * 3**b >= n`` (cheap FFT sizes)."""
    best = next_pow2(n)
    t = 3
    while t < best:
        best = min(best, t * next_pow2(-(-n // t)))
        t *= 3
    return best


def _scaled_rows(coeffs, radii):
    """Row-normalized terms ``c_k r^k / max_k |c_k r^k|`` and the log row maxima."""
    k = np.arange(coeffs.size)
    with np.errstate(divide="ignore"):
        logc = np.log(np.abs(coeffs))
        logr = np.log(radii)
    logmag = logc[None, :] + k[None, :] * logr[:, None]
    logmag = np.where(k[None, :] == 0, logc[None, :], logmag)
    row_max = np.max(logmag, axis=1)
    row_safe = np.where(np.isfinite(row_max), row_max, 0.0)
    rel = logmag - row_safe[:, None]
    keep = rel > -42.0
    with np.errstate(invalid="ignore", under="ignore"):
        mag = np.where(keep, np.exp(rel), 0.0)
    phase = np.where(coeffs == 0, 0.0, coeffs / np.where(coeffs == 0, 1.0, np.abs(coeffs)))
    nz = np.nonzero(np.any(keep, axis=0))[0]
    deg = int(nz[-1]) if nz.size else 0
    return row_safe, (mag * phase[None, :])[:, : deg + 1], deg


def _fold_ifft(scaled, n_angles):
    rows, width = scaled.shape
    L = -(-width // n_angles)
    padded = np.zeros((rows, L * n_angles), dtype=complex)
    padded[:, :width] = scaled
    folded = padded.reshape(rows, L, n_angles).sum(axis=1)
    return np.fft.ifft(folded, axis=1) * n_angles


def circle_log_means(coeff_sets, radii, combine, angles_for, level: int = 0,
                     rows_per_block: int = 256, budget: int = 1 << 22):
    """Trapezoid means over circles of a function built from several polynomials.

    For every block of radii the polynomials in ``coeff_sets`` are evaluated on
    a common angular grid of ``angles_for(degrees) * 2**level`` points, where
    ``degrees`` are the effective degrees on that block.  ``combine`` maps the
    list of ``log|values|`` arrays (each ``rows x M``) to the log of the
    integrand; the return value is the log of its angular mean per radius.
    """
    coeff_sets = [np.asarray(c, dtype=complex) for c in coeff_sets]
    radii = np.asarray(radii, dtype=float)
    out = np.empty(radii.size)
    for s in range(0, radii.size, rows_per_block):
        rs = radii[s: s + rows_per_block]
        parts = [_scaled_rows(c, rs) for c in coeff_sets]
        M = next_pow2(angles_for([d for _, _, d in parts])) << level
        step = max(1, budget // (M + max(p[1].shape[1] for p in parts)))
        for t in range(0, rs.size, step):
            logs = []
            for scale, scaled, _ in parts:
                vals = _fold_ifft(scaled[t: t + step], M)
                with np.errstate(divide="ignore"):
                    logs.append(np.log(np.abs(vals)) + scale[t: t + step, None])
            lt = combine(logs)
            m = np.max(lt, axis=1, keepdims=True)
            m_safe = np.where(np.isfinite(m), m, 0.0)
            with np.errstate(divide="ignore", under="ignore"):
                mean = np.log(np.sum(np.exp(lt - m_safe), axis=1)) - np.log(M)
            out[s + t: s + t + lt.shape[0]] = np.where(np.isfinite(m[:, 0]), mean + m_safe[:, 0], -np.inf)
    return out


def _batch_scaled_rows(coeff_list, radii):
    """Stacked version of :func:`_scaled_rows`; returns ``(B, R)`` scales and ``(B, R, K)`` terms."""
    B = len(coeff_list)
    K = max(len(c) for c in coeff_list)
    C = np.zeros((B, K), dtype=complex)
    for i, c in enumerate(coeff_list):
        C[i, : len(c)] = c
    k = np.arange(K)
    with np.errstate(divide="ignore"):
        logc = np.log(np.abs(C))
        logr = np.log(radii)
    kr = np.where(k[None, :] == 0, 0.0, k[None, :] * logr[:, None])
    logmag = logc[:, None, :] + kr[None, :, :]
    row_max = np.max(logmag, axis=2)
    row_safe = np.where(np.isfinite(row_max), row_max, 0.0)
    rel = logmag - row_safe[:, :, None]
    keep = rel > -42.0
    with np.errstate(invalid="ignore", under="ignore"):
        mag = np.where(keep, np.exp(rel), 0.0)
    phase = np.where(C == 0, 0.0, C / np.where(C == 0, 1.0, np.abs(C)))
    nz = np.nonzero(np.any(keep, axis=(0, 1)))[0]
    deg = int(nz[-1]) if nz.size else 0
    return row_safe, (mag * phase[:, None, :])[:, :, : deg + 1], deg


def _normalized_power(vals, power):
    """``(log max |v|, (|v| / max |v|)**power)`` along the last axis."""
    a = np.abs(vals)
    top = np.max(a, axis=-1, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    with np.errstate(under="ignore"):
        out = (a / safe) ** power
    with np.errstate(divide="ignore"):
        return np.log(top[..., 0]), out


def circle_power_means(weight_coeffs, weight_power: float, coeff_list, power: float, radii,
                       angles_for, level: int = 0, rows_per_block: int = 64, budget: int = 1 << 21):
    """``log`` of the angular mean of ``|w|**weight_power * |h_b|**power`` per radius.

    ``w`` is shared by the batch ``h_b`` (coefficients in ``coeff_list``), so
    it is transformed once per block of radii.  The angle count is
    ``angles_for([deg_w, deg_h]) * 2**level``.  Returns shape ``(B, R)``.
    """
    wc = np.asarray(weight_coeffs, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    B = len(coeff_list)
    out = np.empty((B, radii.size))
    s = 0
    while s < radii.size:
        rs = radii[s: s + rows_per_block]
        ws, wscaled, dw = _scaled_rows(wc, rs)
        hs, hscaled, dh = _batch_scaled_rows(coeff_list, rs)
        M = fast_len(angles_for([dw, dh])) << level
        rows = max(1, min(rs.size, budget // (B * M)))
        if rows < rs.size:
            rs, ws, wscaled, hs, hscaled = rs[:rows], ws[:rows], wscaled[:rows], hs[:, :rows], hscaled[:, :rows]
        lw, W = _normalized_power(_fold_ifft(wscaled, M), weight_power)
        R, K = rs.size, hscaled.shape[2]
        lh, H = _normalized_power(_fold_ifft(hscaled.reshape(B * R, K), M).reshape(B, R, M), power)
        with np.errstate(under="ignore"):
            mean = np.einsum("brm,rm->br", H, W) / M
        with np.errstate(divide="ignore", invalid="ignore"):
            log_mean = (np.log(mean) + power * (lh + hs) + weight_power * (lw + ws)[None, :])
        out[:, s: s + R] = log_mean
        lost = (mean == 0) & np.isfinite(lh) & np.isfinite(lw)[None, :]
        if np.any(lost):
            # peaks of |w| and |h| are too far apart for the scaled product
            for b, i in zip(*np.nonzero(lost)):
                with np.errstate(divide="ignore"):
                    terms = (power * np.log(np.abs(_fold_ifft(hscaled[b, i: i + 1], M)[0]))
                             + weight_power * np.log(np.abs(_fold_ifft(wscaled[i: i + 1], M)[0])))
                top = np.max(terms)
                out[b, s + i] = (top + np.log(np.mean(np.exp(terms - top))) + power * hs[b, i]
                                 + weight_power * ws[i]) if np.isfinite(top) else -np.inf
        s += R
    return out


class AutocorrCache:
    """Scaled coefficient autocorrelations of a batch of polynomials, keyed by radius nodes.

    For ``h~_j = h_j r^j`` (scaled by the row maximum) stores
    ``A_d = sum_j h~_{j+d} conj(h~_j)`` for ``d >= 0``; these are the Fourier
    coefficients of ``|h|^2`` on the circle and do not depend on the angle
    count, so angular refinement only re-transforms the weight.  Radii are
    processed in blocks so that each block uses its own effective degree.
    """

    def __init__(self, coeff_list, keep: int = 6, rows_per_block: int = 32):
        self.coeff_list = [np.asarray(c, dtype=complex) for c in coeff_list]
        self.keep = keep
        self.rows_per_block = rows_per_block
        self._store = {}

    def get(self, radii):
        """List of ``(start, log_scales (B, R), A (B, R, K), degree)`` blocks."""
        key = radii.tobytes()
        hit = self._store.get(key)
        if hit is None:
            if len(self._store) >= self.keep:
                self._store.pop(next(iter(self._store)))
            hit = self._store[key] = [(s, *self._compute(radii[s: s + self.rows_per_block]))
                                      for s in range(0, radii.size, self.rows_per_block)]
        return hit

    def _compute(self, radii):
        hs, hscaled, dh = _batch_scaled_rows(self.coeff_list, radii)
        K = dh + 1
        F = np.fft.fft(hscaled, n=fast_len(2 * K - 1), axis=2)
        A = np.fft.ifft(np.abs(F) ** 2, axis=2)[:, :, :K]
        return hs, A, dh


def circle_weighted_sq_means(weight_coeffs, weight_power: float, cache: AutocorrCache, radii,
                             angles_for, level: int = 0):
    """``log`` of the angular mean of ``|w|**weight_power * |h_b|**2`` per radius, shape ``(B, R)``.

    The mean is ``sum_d A_d conj(W_d)`` with ``A`` from ``cache`` and ``W_d``
    the trapezoid Fourier coefficients of ``|w|**weight_power`` on
    ``angles_for([deg_w, deg_h]) * 2**level`` points.
    """
    wc = np.asarray(weight_coeffs, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    blocks = cache.get(radii)
    out = np.empty((blocks[0][1].shape[0], radii.size))
    for s, hs, A, dh in blocks:
        K = dh + 1
        R = A.shape[1]
        rs = radii[s: s + R]
        mult = np.full(K, 2.0)
        mult[0] = 1.0
        ws, wscaled, dw = _scaled_rows(wc, rs)
        M = max(fast_len(angles_for([dw, dh])), 2 * K) << level
        lw, W = _normalized_power(_fold_ifft(wscaled, M), weight_power)
        What = np.fft.fft(W, axis=1)[:, :K] / M
        with np.errstate(under="ignore"):
            mean = np.einsum("brd,rd,d->br", A.real, What.real, mult) \
                + np.einsum("brd,rd,d->br", A.imag, What.imag, mult)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, s: s + R] = np.log(np.maximum(mean, 0.0)) + 2 * hs + weight_power * (lw + ws)[None, :]
    return out
