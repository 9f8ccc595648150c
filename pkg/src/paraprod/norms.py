"""Weighted Bergman quasinorms, Bloch-type seminorms and related functionals.

Area measure is normalized, ``dA = dx dy / pi``, so a radial integral
becomes ``int_0^1 2 r (angular mean) dr``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import quadrature as qd
from .series import TruncatedSeries, derivative, golden_section, max_modulus
from .weights import WeightSpec, beta_distance, log_derivatives, phi_inverse
from .words import apply_letter

LOG_TINY = math.log(1e-300)


class NotConverged(RuntimeWarning):
    """A refinement loop stopped before meeting its tolerance."""


class DegeneratePair(ValueError):
    """The two points of a difference quotient coincide."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs shared by all numeric functionals.

    ``refined()`` returns the configuration used for drift checks: twice the
    angular nodes, twice the sup grid and a four times tighter radial
    tolerance.  ``rough_rel_tol`` is the agreement target for integrands
    that are not real-analytic in the angle (odd powers of ``|f|``, powers of
    ``|g|`` with non-even exponent), where the trapezoid rule converges slowly.
    """

    angular_base: int = 16
    radial_rel_tol: float = 1e-10
    max_refine: int = 8
    r_floor_log: float = -700.0
    sup_grid: int = 256
    sup_rel_tol: float = 1e-3
    n_init_panels: int = 16
    max_panels: int = 20000
    rough_rel_tol: float = 1e-6

    def __post_init__(self):
        if self.angular_base < 16:
            raise ValueError("angular_base must be >= 16")
        if not (0 < self.radial_rel_tol <= 1e-3):
            raise ValueError("radial_rel_tol must lie in (0, 1e-3]")

    def refined(self) -> "QuadratureConfig":
        return replace(self, angular_base=2 * self.angular_base,
                       radial_rel_tol=max(self.radial_rel_tol / 4, 1e-13),
                       rough_rel_tol=self.rough_rel_tol / 4,
                       sup_grid=2 * self.sup_grid, n_init_panels=2 * self.n_init_panels)


@dataclass(frozen=True)
class WeightModifier:
    """``omega^q (1 + phi')^beta tau^gamma``; ``q = None`` means ``p / 2``."""

    beta: float = 0.0
    gamma: float = 0.0
    p_half_exponent: float | None = None

    @classmethod
    def plain(cls) -> "WeightModifier":
        return cls()

    @classmethod
    def littlewood_paley(cls, p: float) -> "WeightModifier":
        return cls(beta=-p)

    def q(self, p: float) -> float:
        return p / 2 if self.p_half_exponent is None else self.p_half_exponent


@dataclass
class NormEstimate:
    """A value with refinement metadata."""

    value: float
    last_delta: float
    levels_used: int
    converged: bool
    log_value: float | None = None
    argmax: complex | None = None
    extra: dict = field(default_factory=dict)

    def __str__(self) -> str:
        return f"{self.value:.12g} ± {self.last_delta:.3g} (levels={self.levels_used}, converged={self.converged})"

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.argmax is not None:
            d["argmax"] = [self.argmax.real, self.argmax.imag]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def scaled(self, factor: float) -> "NormEstimate":
        lv = None if self.log_value is None else self.log_value + math.log(factor)
        return replace(self, value=self.value * factor, log_value=lv)


# ---------------------------------------------------------------------------
# radial integration driver


def log_weight(spec: WeightSpec, r, q: float, beta: float = 0.0, gamma: float = 0.0):
    """``log(omega^q (1 + phi')^beta tau^gamma)`` with ``-inf`` beyond the double range."""
    r = np.asarray(r, dtype=float)
    le, l1, l2, _ = log_derivatives(spec, r)
    with np.errstate(over="ignore", invalid="ignore"):
        out = -2.0 * q * np.exp(le)
        if beta:
            out = out + beta * np.logaddexp(0.0, l1)
        if gamma:
            out = out + gamma * (-0.5 * np.logaddexp(0.0, np.logaddexp(l1, l2)))
    return np.where(np.isnan(out), -np.inf, out)


def _log_two_r(r):
    with np.errstate(divide="ignore"):
        return math.log(2.0) + np.log(r)


def _log_abs_sum(coeffs, r):
    """``log sum_k |c_k| r^k`` on an array of radii, computed stably."""
    return _log_abs_sums([coeffs], r, 1)[0]


def _log_sq_mean(coeffs, r):
    """``log sum_k |c_k|^2 r^{2k}`` (the exact angular mean of ``|f|^2``)."""
    return _log_abs_sums([coeffs], r, 2)[0]


def _lse(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        out = np.log(np.sum(np.exp(x - m_safe), axis=axis)) + np.squeeze(m_safe, axis=axis)
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


def _log_abs_sums(coeff_list, r, power: int = 1, chunk: int = 4096):
    """``log sum_k |c_k|^power r^{power k}`` for several coefficient vectors, shape ``(B, len(r))``.

    Each vector is scaled by its largest entry and the sums are one matrix
    product; entries that underflow fall back to a log-sum-exp.
    """
    r = np.asarray(r, dtype=float)
    B = len(coeff_list)
    K = max(len(c) for c in coeff_list)
    with np.errstate(divide="ignore"):
        la = np.full((K, B), -np.inf)
        for i, c in enumerate(coeff_list):
            la[: len(c), i] = power * np.log(np.abs(np.asarray(c)))
        top = np.max(la, axis=0)
        top_safe = np.where(np.isfinite(top), top, 0.0)
        A = np.exp(la - top_safe[None, :])
        lr = power * np.log(r)
    k = np.arange(K)
    out = np.empty((B, r.size))
    for s in range(0, r.size, chunk):
        lrs = lr[s: s + chunk]
        with np.errstate(invalid="ignore", under="ignore"):
            P = np.exp(np.where(k[None, :] == 0, 0.0, k[None, :] * lrs[:, None]))
        with np.errstate(divide="ignore"):
            out[:, s: s + chunk] = (np.log(P @ A) + top_safe[None, :]).T
    out[~np.isfinite(top), :] = -np.inf
    bad = np.isneginf(out) & np.isfinite(top)[:, None]
    if np.any(bad):
        for i in np.nonzero(bad.any(axis=1))[0]:
            cols = np.nonzero(bad[i])[0]
            kk = np.nonzero(np.isfinite(la[:, i]))[0]
            with np.errstate(invalid="ignore"):
                terms = la[kk, i][None, :] + np.where(kk[None, :] == 0, 0.0, kk[None, :] * lr[cols][:, None])
            out[i, cols] = _lse(terms, axis=1)
    return out


def _pth_angles(cfg, p):
    def angles_for(degs):
        return max(cfg.angular_base, (math.ceil(p) + 1) * (degs[0] + 1))
    return angles_for


@dataclass
class _Integral:
    log_value: np.ndarray
    delta: float
    levels: int
    converged: bool


def _radial_integral(spec, log_w, log_env, log_angular, batch, cfg, angular=True, angular_tol=None):
    """``int_0^1 2 r W(r) A_b(r) dr`` for each batch item, in log domain.

    ``log_angular(r, level)`` returns the ``(B, len(r))`` log angular means
    with ``2**level`` times the base number of angles.  With ``angular=False``
    the angular part is exact and only level 0 is used; otherwise the level
    is raised until two consecutive levels agree to ``angular_tol``
    (default ``radial_rel_tol``).
    """
    angular_tol = cfg.radial_rel_tol if angular_tol is None else angular_tol
    def env(r):
        return _log_two_r(r) + log_w(r) + log_env(r)

    b = qd.cutoff_radius(env, cfg.r_floor_log)

    def integrand(level):
        def f(r):
            return _log_two_r(r)[None, :] + log_w(r)[None, :] + log_angular(r, level), None
        return f

    res = qd.adaptive_panels(integrand(0), 0.0, b, cfg.radial_rel_tol, batch=batch,
                             n_init=cfg.n_init_panels, max_panels=cfg.max_panels)
    if not angular:
        return _Integral(res.log_value(), float(np.max(res.rel_err)), res.levels, res.converged)
    levels = res.levels
    delta = math.inf
    for level in range(1, cfg.max_refine + 1):
        res2 = qd.adaptive_panels(integrand(level), 0.0, b, cfg.radial_rel_tol, batch=batch,
                                  edges=res.edges, max_panels=cfg.max_panels)
        l1, l2 = res.log_value(), res2.log_value()
        with np.errstate(invalid="ignore"):
            change = np.where(np.isfinite(l2), np.abs(np.expm1(l1 - l2)), 0.0)
        change = np.where(np.isfinite(l1) | np.isfinite(l2), change, 0.0)
        delta = float(max(np.max(change), np.max(res2.rel_err)))
        levels += 1 + res2.levels
        res = res2
        if np.max(change) <= angular_tol:
            return _Integral(res.log_value(), delta, levels, res.converged)
    return _Integral(res.log_value(), delta, levels, False)


def bergman_norms(fs, spec: WeightSpec, p: float, mod: WeightModifier | None = None,
                  cfg: QuadratureConfig | None = None):
    """Batch version of :func:`bergman_norm`, sharing radial nodes across ``fs``."""
    if p <= 0:
        raise ValueError("p must be positive")
    mod = mod or WeightModifier.plain()
    cfg = cfg or QuadratureConfig()
    fs = list(fs)
    q = mod.q(p)

    def log_w(r):
        return log_weight(spec, r, q, mod.beta, mod.gamma)

    zero = [f.is_zero() for f in fs]
    live = [f for f, z in zip(fs, zero) if not z]
    out = [None] * len(fs)
    if live:
        coeff_list = [f.coeffs[: f.degree + 1] for f in live]

        def log_env(r):
            return p * np.max(_log_abs_sums(coeff_list, r, 1), axis=0)

        if p == 2:
            def log_ang(r, level):
                return _log_abs_sums(coeff_list, r, 2)
        else:
            angles = _pth_angles(cfg, p)

            def log_ang(r, level):
                return np.stack([qd.circle_log_means([c], r, lambda logs: p * logs[0], angles, level)
                                 for c in coeff_list])
        # odd powers of |f| kink at zeros of f, so angular agreement uses the rough tolerance
        even = abs(p / 2 - round(p / 2)) < 1e-12
        ang_tol = cfg.radial_rel_tol if even else max(cfg.radial_rel_tol, cfg.rough_rel_tol)
        res = _radial_integral(spec, log_w, log_env, log_ang, len(live), cfg, angular=(p != 2),
                               angular_tol=ang_tol)
        it = iter(range(len(live)))
        for i, z in enumerate(zero):
            if not z:
                j = next(it)
                lv = float(res.log_value[j]) / p
                out[i] = NormEstimate(math.exp(lv) if lv < 709 else math.inf, res.delta, res.levels,
                                      res.converged and res.delta <= max(ang_tol, 1e-9) * 10,
                                      log_value=lv)
    for i, z in enumerate(zero):
        if z:
            out[i] = NormEstimate(0.0, 0.0, 0, True, log_value=-math.inf)
    for est in out:
        if not est.converged:
            warnings.warn(f"Bergman norm did not converge (delta={est.last_delta:.3g})", NotConverged)
            break
    return out


def bergman_norm(f: TruncatedSeries, spec: WeightSpec, p: float, mod: WeightModifier | None = None,
                 cfg: QuadratureConfig | None = None) -> NormEstimate:
    """``(int |f|^p omega^q (1+phi')^beta tau^gamma dA)^{1/p}``.

    For ``p = 2`` the angular mean is the exact coefficient sum
    ``sum |f_k|^2 r^{2k}``; otherwise a doubling trapezoid rule in angle is
    used.  The radial integral runs over ``[0, b]`` where ``b`` is the radius
    past which the integrand is below ``e^{r_floor_log}`` of its peak.
    """
    return bergman_norms([f], spec, p, mod, cfg)[0]


def lp_ratio(f: TruncatedSeries, spec: WeightSpec, p: float, cfg: QuadratureConfig | None = None) -> float:
    """``(|f(0)|^p + ||f'||^p_{LP}) / ||f||^p`` with the damped derivative weight ``omega^{p/2}(1+phi')^{-p}``."""
    if f.is_zero():
        raise ValueError("lp_ratio needs a nonzero f")
    cfg = cfg or QuadratureConfig()
    df = derivative(f)
    den = bergman_norm(f, spec, p, WeightModifier.plain(), cfg)
    f0 = abs(f.coeffs[0])
    terms = []
    if f0 > 0:
        terms.append(p * math.log(f0))
    if not df.is_zero():
        num = bergman_norm(df, spec, p, WeightModifier.littlewood_paley(p), cfg)
        terms.append(p * num.log_value)
    log_num = float(np.logaddexp.reduce(terms))
    return math.exp(log_num - p * den.log_value)


# ---------------------------------------------------------------------------
# suprema


def _circle_max(funcs, r, M):
    """``(theta, value)`` maximizing ``funcs(z)`` over the circle ``|z| = r``.

    ``funcs`` maps an array of complex points to nonnegative values.
    """
    theta = 2.0 * math.pi * np.arange(M) / M
    vals = funcs(r * np.exp(1j * theta))
    m = int(np.argmax(vals))
    h = 2.0 * math.pi / M

    def neg(t):
        return -float(funcs(np.array([r * complex(math.cos(t), math.sin(t))]))[0])

    # the value error is quadratic in the angle error near a maximum
    t, v = golden_section(neg, theta[m] - h, theta[m] + h, tol=1e-9)
    if -v > vals[m]:
        return t, -v
    return float(theta[m]), float(vals[m])


def _log_one_plus_phi_prime(spec, r):
    return np.logaddexp(0.0, log_derivatives(spec, r)[1])


def _r_where_log1pp_reaches(spec, target: float) -> float:
    """Smallest radius with ``log(1 + phi'(r)) >= target`` (bisection)."""
    hi = 1.0 - 1e-16
    if target <= 0:
        return 0.0
    with np.errstate(all="ignore"):
        if not _log_one_plus_phi_prime(spec, hi) >= target:
            return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        with np.errstate(all="ignore"):
            v = _log_one_plus_phi_prime(spec, mid)
        if v >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-16:
            break
    return hi


def _last_radius_above(log_bound, level: float) -> float:
    """Grid radius past which ``log_bound`` (an upper bound of a quotient) stays below ``level``."""
    grid = np.unique(np.concatenate([np.linspace(0.0, 0.9, 901), 1.0 - 10.0 ** (-np.linspace(1.0, 15.0, 561))]))
    with np.errstate(all="ignore"):
        vals = np.asarray(log_bound(grid), dtype=float)
    vals = np.where(np.isnan(vals), np.inf, vals)
    above = np.nonzero(vals >= level)[0]
    if above.size == 0:
        return float(grid[1])
    return float(grid[min(above[-1] + 1, grid.size - 1)])


def _radius_grid(r_star: float, n: int) -> np.ndarray:
    """Points on ``[0, r_star]`` clustered at both ends plus a uniform layer."""
    i = np.arange(n + 1)
    cheb = 0.5 * r_star * (1.0 - np.cos(np.pi * i / n))
    uni = np.linspace(0.0, r_star, n + 1)
    return np.unique(np.concatenate([cheb, uni]))


def _polish_2d(func, r_lo, r_hi, t_lo, t_hi, n: int = 9, iters: int = 16):
    """Maximize ``func(r, theta)`` on a box by repeated zooming of a small grid.

    Each pass evaluates an ``n x n`` grid and recentres a box half as wide
    on the best node (clipped to the original radial range).
    """
    r0, r1 = r_lo, r_hi
    best = (0.5 * (r_lo + r_hi), 0.5 * (t_lo + t_hi), -math.inf)
    for _ in range(iters):
        rs = np.linspace(r0, r1, n)
        ts = np.linspace(t_lo, t_hi, n)
        R, T = np.meshgrid(rs, ts, indexing="ij")
        v = func(R.ravel(), T.ravel())
        i = int(np.argmax(v))
        if v[i] > best[2]:
            best = (float(R.ravel()[i]), float(T.ravel()[i]), float(v[i]))
        hr = 0.5 * (r1 - r0) / 2
        ht = 0.5 * (t_hi - t_lo) / 2
        r0, r1 = max(r_lo, best[0] - hr), min(r_hi, best[0] + hr)
        t_lo, t_hi = best[1] - ht, best[1] + ht
    return best


def _sup_over_radii(quot, grid, polish_top: int = 3, coarse=None):
    """Grid maximum of ``quot(r)`` followed by golden-section polish of the best cells.

    ``coarse`` optionally evaluates a cheaper lower approximation on the whole grid.
    """
    vals = np.asarray(coarse(grid), dtype=float) if coarse is not None else np.array([quot(r) for r in grid])
    order = np.argsort(vals)[::-1]
    grid_max = float(vals[order[0]])
    best_r, best_v = float(grid[order[0]]), grid_max
    for idx in order[:polish_top]:
        lo = grid[max(idx - 1, 0)]
        hi = grid[min(idx + 1, grid.size - 1)]
        if hi <= lo:
            continue
        r, v = golden_section(lambda x: -quot(x), lo, hi, tol=1e-9)
        if -v > best_v:
            best_r, best_v = r, -v
    return best_r, best_v, grid_max


def bloch_seminorm(g: TruncatedSeries, spec: WeightSpec, q: float = 1.0,
                   cfg: QuadratureConfig | None = None) -> NormEstimate:
    """``(sup_z q |g|^{q-1} |g'| / (1 + phi'(|z|)))^{1/q}``.

    The radius search stops at ``r_star`` where ``1 + phi'`` exceeds the
    global bound ``q (sum|g_k|)^{q-1} sum k|g_k|`` divided by a lower bound
    of the supremum, so nothing beyond it can win.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    cfg = cfg or QuadratureConfig()
    dg = derivative(g)
    if dg.is_zero():
        return NormEstimate(0.0, 0.0, 0, True, log_value=-math.inf)
    scale = float(np.max(np.abs(g.coeffs)))
    c = g.coeffs[: g.degree + 1] / scale
    cd = npoly.polyder(c)
    polyval = npoly.polyval
    M = qd.next_pow2(max(cfg.angular_base, 16 * c.size))

    def numerator(z):
        gz = np.abs(polyval(z, c))
        dz = np.abs(polyval(z, cd))
        if q == 1:
            return dz
        with np.errstate(divide="ignore"):
            return q * np.exp((q - 1) * np.log(gz)) * dz

    theta = 2.0 * math.pi * np.arange(M) / M

    def quot2(rs, ts):
        return numerator(rs * np.exp(1j * ts)) / np.exp(_log_one_plus_phi_prime(spec, rs))

    def coarse(rs):
        rs = np.asarray(rs, dtype=float)
        val = np.empty(rs.size)
        arg = np.empty(rs.size, dtype=int)
        for i in range(0, rs.size, 256):
            z = rs[i: i + 256, None] * np.exp(1j * theta)[None, :]
            v = numerator(z)
            arg[i: i + 256] = np.argmax(v, axis=1)
            val[i: i + 256] = v[np.arange(v.shape[0]), arg[i: i + 256]]
        return val / np.exp(_log_one_plus_phi_prime(spec, rs)), arg

    A = float(np.sum(np.abs(c)))
    B = q * A ** (q - 1) * float(np.sum(np.arange(c.size) * np.abs(c)))
    f_lower = float(np.max(coarse(np.linspace(0.0, 0.999, 64))[0]))
    r_star = _r_where_log1pp_reaches(spec, math.log(B / f_lower))
    grid = _radius_grid(r_star, cfg.sup_grid)
    vals, args = coarse(grid)
    order = np.argsort(vals)[::-1]
    grid_max = float(vals[order[0]])
    r_best, t_best, v_best = float(grid[order[0]]), float(theta[args[order[0]]]), grid_max
    h = 2.0 * math.pi / M
    for idx in order[:3]:
        lo = float(grid[max(idx - 1, 0)])
        hi = float(grid[min(idx + 1, grid.size - 1)])
        r, t, v = _polish_2d(quot2, lo, hi, float(theta[args[idx]]) - h, float(theta[args[idx]]) + h)
        if v > v_best:
            r_best, t_best, v_best = r, t, v
    theta = t_best
    delta = (v_best - grid_max) / v_best if v_best > 0 else 0.0
    value = (v_best ** (1.0 / q)) * scale
    return NormEstimate(value, delta, 1, delta <= cfg.sup_rel_tol,
                        log_value=math.log(value), argmax=r_best * complex(math.cos(theta), math.sin(theta)),
                        extra={"r_star": r_star})


def growth_norm(g: TruncatedSeries, spec: WeightSpec, q: float = 1.0,
                cfg: QuadratureConfig | None = None) -> NormEstimate:
    """``(sup_r M_inf(r, g)^q / phi(r))^{1/q}``."""
    if q <= 0:
        raise ValueError("q must be positive")
    cfg = cfg or QuadratureConfig()
    if g.is_zero():
        return NormEstimate(0.0, 0.0, 0, True, log_value=-math.inf)
    scale = float(np.max(np.abs(g.coeffs)))
    gs = TruncatedSeries(g.coeffs[: g.degree + 1] / scale)

    def quot(r):
        lphi = float(log_derivatives(spec, r)[0])
        return math.exp(q * math.log(max_modulus(gs, r)) - lphi) if max_modulus(gs, r) > 0 else 0.0

    A = float(np.sum(np.abs(gs.coeffs)))
    f_lower = max(quot(r) for r in np.linspace(0.0, 0.999, 64))
    r_star = min(phi_inverse(spec, A ** q / f_lower), 1.0 - 1e-16)
    grid = _radius_grid(r_star, cfg.sup_grid)
    r_best, v_best, grid_max = _sup_over_radii(quot, grid)
    delta = (v_best - grid_max) / v_best
    value = v_best ** (1.0 / q) * scale
    return NormEstimate(value, delta, 1, delta <= cfg.sup_rel_tol, log_value=math.log(value),
                        argmax=complex(r_best))


@dataclass
class PavlTerms:
    lhs: float
    rhs: float
    ratio: float
    degenerate: bool = False


def pavl_terms(g: TruncatedSeries, spec: WeightSpec, alpha: float,
               cfg: QuadratureConfig | None = None) -> PavlTerms:
    """Both sides of ``sup M_inf(r,g)/psi_a(r)  ~  |g(0)| + sup M_inf(r,g')/psi_a'(r)``.

    Here ``psi(r) = r + phi(r)``, ``psi_a = psi^a`` and
    ``psi_a' = a psi^{a-1} (1 + phi')``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    cfg = cfg or QuadratureConfig()
    if g.is_zero():
        return PavlTerms(0.0, 0.0, 1.0, degenerate=True)
    dg = derivative(g)

    def log_psi(r):
        lphi = float(log_derivatives(spec, r)[0])
        return float(np.logaddexp(math.log(r) if r > 0 else -math.inf, lphi))

    def lhs_q(r):
        mm = max_modulus(g, r)
        return math.exp(math.log(mm) - alpha * log_psi(r)) if mm > 0 else 0.0

    def rhs_q(r):
        mm = max_modulus(dg, r)
        if mm == 0:
            return 0.0
        lden = math.log(alpha) + (alpha - 1) * log_psi(r) + float(_log_one_plus_phi_prime(spec, r))
        return math.exp(math.log(mm) - lden)

    A = float(np.sum(np.abs(g.coeffs)))
    Ad = float(np.sum(np.abs(dg.coeffs)))
    coarse = np.linspace(0.0, 0.999, 64)

    def log_psi_vec(r):
        with np.errstate(divide="ignore"):
            return np.logaddexp(np.log(r), log_derivatives(spec, r)[0])

    lo_l = max(lhs_q(r) for r in coarse)
    r_l = _last_radius_above(lambda r: math.log(A) - alpha * log_psi_vec(r), math.log(lo_l))
    _, lhs, _ = _sup_over_radii(lhs_q, _radius_grid(r_l, cfg.sup_grid))
    rhs = abs(g.coeffs[0])
    if not dg.is_zero():
        lo_r = max(rhs_q(r) for r in coarse)
        r_r = _last_radius_above(
            lambda r: math.log(Ad) - math.log(alpha) - (alpha - 1) * log_psi_vec(r)
            - _log_one_plus_phi_prime(spec, r), math.log(lo_r))
        _, sup_r, _ = _sup_over_radii(rhs_q, _radius_grid(r_r, cfg.sup_grid))
        rhs += sup_r
    return PavlTerms(lhs, rhs, lhs / rhs)


def pavl_ratio(g: TruncatedSeries, spec: WeightSpec, alpha: float,
               cfg: QuadratureConfig | None = None) -> float:
    """Ratio of the two sides in :func:`pavl_terms`; 1.0 (with a warning) for ``g = 0``."""
    t = pavl_terms(g, spec, alpha, cfg)
    if t.degenerate:
        warnings.warn("pavl_ratio of the zero function is 0/0; returning 1 by convention")
    return t.ratio


# ---------------------------------------------------------------------------
# mixed functional and Lipschitz quotient


def _as_fraction(sigma) -> Fraction:
    if isinstance(sigma, tuple):
        return Fraction(sigma[0], sigma[1])
    return Fraction(sigma).limit_denominator(10_000)


def q_functional(f: TruncatedSeries, g: TruncatedSeries, spec: WeightSpec, sigma, ell: int, p: float,
                 cfg: QuadratureConfig | None = None) -> NormEstimate:
    """``L^p(omega^{p/2})`` norm of ``|g|^{sigma ell} T_g^ell f``.

    ``sigma`` is a positive rational, given as ``(num, den)``, a Fraction or a
    float.  When ``p / 2`` and ``p * sigma * ell / 2`` are integers the
    angular mean is an exact coefficient sum; otherwise a doubling
    trapezoid rule is used.
    """
    sig = _as_fraction(sigma)
    if sig <= 0 or ell < 1:
        raise ValueError("need sigma > 0 and ell >= 1")
    cfg = cfg or QuadratureConfig()
    h = f
    for _ in range(ell):
        h = apply_letter("T", g, h)
    return q_functionals_from_h([h], g, spec, float(sig) * ell, p, cfg)[0]


def q_functionals_from_h(hs, g, spec, expo: float, p: float, cfg: QuadratureConfig):
    """Norms of ``|g|^expo h`` for a batch of analytic ``h``."""
    hs = list(hs)
    out = [NormEstimate(0.0, 0.0, 0, True, log_value=-math.inf) for _ in hs]
    live = [i for i, h in enumerate(hs) if not h.is_zero()]
    if not live:
        return out
    gc = g.coeffs[: g.degree + 1]
    hcs = [hs[i].coeffs[: hs[i].degree + 1] for i in live]

    def log_w(r):
        return log_weight(spec, r, p / 2)

    def log_env(r):
        lg = _log_abs_sum(gc, r)
        return p * (expo * lg + np.max(_log_abs_sums(hcs, r, 1), axis=0))

    def angles_for(degs):
        dg, dh = degs
        return max(cfg.angular_base, 16 * (dg + 1), math.ceil(p) * (dh + math.ceil(expo) * dg) + 1)

    k, m = p * expo / 2, p / 2
    exact = abs(k - round(k)) < 1e-12 and abs(m - round(m)) < 1e-12
    if exact:
        # |g|^{2k} |h|^{2m} = |g^k h^m|^2, whose angular mean is a coefficient sum
        gk = npoly.polypow(gc, round(k))
        us = [np.convolve(gk, npoly.polypow(c, round(m))) for c in hcs]

        def log_ang(r, level):
            return _log_abs_sums(us, r, 2)
    elif p == 2:
        cache = qd.AutocorrCache(hcs)

        def log_ang(r, level):
            return qd.circle_weighted_sq_means(gc, p * expo, cache, r, angles_for, level)
    else:
        def log_ang(r, level):
            return qd.circle_power_means(gc, p * expo, hcs, p, r, angles_for, level)

    qcfg = cfg if exact else replace(cfg, radial_rel_tol=max(cfg.radial_rel_tol, cfg.rough_rel_tol))
    res = _radial_integral(spec, log_w, log_env, log_ang, len(hcs), qcfg, angular=not exact)
    for j, i in enumerate(live):
        lv = float(res.log_value[j]) / p
        out[i] = NormEstimate(math.exp(lv), res.delta, res.levels, res.converged, log_value=lv)
    return out


def lipschitz_quotient(g: TruncatedSeries, spec: WeightSpec, q: float, z: complex, w: complex) -> float:
    """``| |g(z)|^q - |g(w)|^q | / beta(z, w)``."""
    if z == w:
        raise DegeneratePair("z and w coincide")
    gz, gw = abs(g(z)), abs(g(w))
    return abs(gz ** q - gw ** q) / beta_distance(spec, z, w)


__all__ = [
    "QuadratureConfig", "WeightModifier", "NormEstimate", "NotConverged", "DegeneratePair",
    "bergman_norm", "bergman_norms", "lp_ratio", "bloch_seminorm", "growth_norm", "pavl_ratio",
    "pavl_terms", "q_functional", "q_functionals_from_h", "lipschitz_quotient", "log_weight",
]
