"""Radial weights ``omega = exp(-2 phi)`` with ``phi = exp_n(c / (1 - r^2)^alpha)``.

Everything is computed in log domain first: for level 2 the value of ``phi``
overflows a double long before ``r`` reaches 1, while ``log phi`` stays
finite much longer.  Plain-valued accessors simply exponentiate the logs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

_SPEC_RE = re.compile(r"^w(\d+):([^:]+):([^:]+)$")


class WeightDomainError(ValueError):
    """Raised when a radius lies outside ``[0, 1)``."""


@dataclass(frozen=True)
class WeightSpec:
    """Parameters of ``omega_n`` for ``n = level``."""

    level: int
    alpha: float
    c: float

    def __post_init__(self):
        if int(self.level) != self.level or self.level < 0:
            raise ValueError(f"level must be a non-negative integer, got {self.level!r}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be positive, got {self.c!r}")

    @property
    def flagged(self) -> bool:
        """True for levels above 2, where almost everything underflows."""
        return self.level > 2

    def __str__(self) -> str:
        return f"w{self.level}:{_fmt(self.alpha)}:{_fmt(self.c)}"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_weight(text: str) -> WeightSpec:
    """Parse ``w<level>:<alpha>:<c>``, e.g. ``w1:0.5:2``."""
    m = _SPEC_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad weight spec {text!r}; expected w<level>:<alpha>:<c>")
    try:
        return WeightSpec(int(m.group(1)), float(m.group(2)), float(m.group(3)))
    except ValueError as exc:
        raise ValueError(f"bad weight spec {text!r}: {exc}") from None


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r >= 0)) or np.any(~(r < 1)):
        raise WeightDomainError("radius must lie in [0, 1)")
    return r


def log_derivatives(spec: WeightSpec, r):
    """Return ``(log phi, log phi', log phi'', log(phi'/r))`` at radii ``r``.

    ``log phi'`` is ``-inf`` at ``r = 0``; ``log(phi'/r)`` is finite there.
    Uses ``exp_k = exp(exp_{k-1})`` so that each level adds ``exp_{k-1}`` to
    the log of the derivatives of the previous level.
    """
    r = _check_r(r)
    a, c = float(spec.alpha), float(spec.c)
    t = -np.log1p(-r * r)  # log 1/(1-r^2)
    log_2ac = math.log(2.0 * a * c)
    le = math.log(c) + a * t
    with np.errstate(divide="ignore"):
        lrd = log_2ac + (a + 1.0) * t          # log(u'/r)
        ld1 = lrd + np.log(r)                  # log u'
    ld2 = log_2ac + (a + 2.0) * t + np.log1p((2.0 * a + 1.0) * r * r)
    for _ in range(spec.level):
        with np.errstate(over="ignore"):
            prev = np.exp(le)
        ld2 = prev + np.logaddexp(ld2, 2.0 * ld1)
        ld1 = prev + ld1
        lrd = prev + lrd
        le = prev
    return le, ld1, ld2, lrd


def _exp(x):
    with np.errstate(over="ignore"):
        out = np.exp(x)
    return out if np.ndim(out) else float(out)


def log_phi(spec, r):
    return _scalarize(log_derivatives(spec, r)[0])


def phi(spec: WeightSpec, r):
    """``phi_n(r)``; ``inf`` once it exceeds the double range."""
    return _exp(log_derivatives(spec, r)[0])


def phi_prime(spec: WeightSpec, r):
    return _exp(log_derivatives(spec, r)[1])


def phi_second(spec: WeightSpec, r):
    return _exp(log_derivatives(spec, r)[2])


def log_omega(spec: WeightSpec, r):
    """``log omega(r) = -2 phi(r)``, never formed by exponentiating ``omega``."""
    return _scalarize(-2.0 * _exp(log_derivatives(spec, r)[0]))


def log_tau(spec: WeightSpec, r):
    _, l1, l2, _ = log_derivatives(spec, r)
    return _scalarize(-0.5 * np.logaddexp(0.0, np.logaddexp(l1, l2)))


def tau(spec: WeightSpec, r):
    """``(1 + phi' + phi'')^{-1/2}``."""
    return _exp(log_tau(spec, r))


def log_one_plus_phi_prime(spec: WeightSpec, r):
    return _scalarize(np.logaddexp(0.0, log_derivatives(spec, r)[1]))


def log_delta_phi(spec: WeightSpec, z):
    r = np.abs(np.asarray(z, dtype=complex))
    _, _, l2, lrd = log_derivatives(spec, r)
    return _scalarize(np.logaddexp(l2, lrd))


def delta_phi(spec: WeightSpec, z):
    """Laplacian ``phi''(|z|) + phi'(|z|)/|z|`` of the radial extension (``2 phi''(0)`` at 0)."""
    return _exp(log_delta_phi(spec, z))


def psi(spec: WeightSpec, r):
    """``r + phi(r)``."""
    return np.asarray(r, dtype=float) + phi(spec, r)


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def phi_inverse(spec: WeightSpec, y: float) -> float:
    """Radius with ``phi(r) = y``, or 0 when ``y <= phi(0)``."""
    u = float(y)
    for _ in range(spec.level):
        if u <= 0:
            return 0.0
        u = math.log(u)
    if u <= spec.c:
        return 0.0
    return math.sqrt(-math.expm1(math.log(spec.c / u) / spec.alpha))


@dataclass(frozen=True)
class WeightEval:
    """A weight together with eagerly computed cut-off radii.

    ``r_cut`` is where ``log omega`` first reaches ``-700`` (the working
    ``p = 2`` case); :meth:`r_cut_for` handles other exponents.
    """

    spec: WeightSpec
    floor: float = -700.0
    r_cut: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "r_cut", self.r_cut_for(2.0))

    def r_cut_for(self, p: float) -> float:
        """Radius where ``(p/2) log omega = floor``."""
        return phi_inverse(self.spec, -self.floor / p)

    def phi(self, r):
        return phi(self.spec, r)

    def phi_prime(self, r):
        return phi_prime(self.spec, r)

    def phi_second(self, r):
        return phi_second(self.spec, r)

    def log_omega(self, r):
        return log_omega(self.spec, r)

    def tau(self, r):
        return tau(self.spec, r)

    def delta_phi(self, z):
        return delta_phi(self.spec, z)

    def psi(self, r):
        return psi(self.spec, r)


# ---------------------------------------------------------------------------
# Path metrics

_GL64_X, _GL64_W = np.polynomial.legendre.leggauss(64)


def _log_density(spec, kind):
    if kind == "beta":
        return lambda r: np.logaddexp(0.0, log_derivatives(spec, r)[1])
    if kind == "tau":
        return lambda r: -log_tau(spec, r)
    raise ValueError(kind)


def _radial_primitive(spec, kind, r):
    """Exact ``int_0^r density`` for ``beta``; 64-point Gauss panels otherwise."""
    if kind == "beta":
        return r + phi(spec, r) - phi(spec, 0.0)
    return _segment_lengths(spec, kind, np.array([0j]), np.array([complex(r)]))[0]


def _segment_lengths(spec, kind, P, Q, panels: int = 1):
    """Length of each straight segment ``P[i] -> Q[i]``."""
    P = np.asarray(P, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    logd = _log_density(spec, kind)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mids[:, None] + half[:, None] * _GL64_X[None, :]).ravel()
    w = (half[:, None] * _GL64_W[None, :]).ravel()
    pts = P[:, None] + t[None, :] * (Q - P)[:, None]
    r = np.minimum(np.abs(pts), np.nextafter(1.0, 0.0))
    vals = np.exp(logd(r))
    return np.abs(Q - P) * (vals @ w)


def _same_ray(z, w):
    if z == 0 or w == 0:
        return True
    return abs((z / abs(z)) - (w / abs(w))) < 1e-15


def _path_distance(spec, kind, z, w, K=8, sweeps=200, rel_step=1e-6):
    z, w = complex(z), complex(w)
    if z == w:
        return 0.0
    # canonical ordering makes the result exactly symmetric
    if (w.real, w.imag) < (z.real, z.imag):
        z, w = w, z
    if _same_ray(z, w):
        a, b = sorted((abs(z), abs(w)))
        if kind == "beta":
            return float(b + phi(spec, b) - a - phi(spec, a))
        return float(_segment_lengths(spec, kind, [complex(a)], [complex(b)], panels=4)[0])

    via0 = float(_radial_primitive(spec, kind, abs(z)) + _radial_primitive(spec, kind, abs(w)))
    rmax = max(abs(z), abs(w))
    t = np.arange(1, K + 1) / (K + 1)
    pts = np.concatenate([[z], z + t * (w - z), [w]])
    straight = float(_segment_lengths(spec, kind, pts[:-1], pts[1:]).sum())

    def seg(P, Q):
        return _segment_lengths(spec, kind, P, Q)

    step = 0.5 * abs(w - z) / (K + 1)
    lengths = seg(pts[:-1], pts[1:])
    dirs = np.array([1, -1, 1j, -1j])
    for _ in range(sweeps):
        moved = False
        for parity in (1, 2):
            idx = np.arange(parity, K + 1, 2)
            base = lengths[idx - 1] + lengths[idx]
            cands = pts[idx][None, :] + step * dirs[:, None]
            prev = np.broadcast_to(pts[idx - 1], cands.shape)
            nxt = np.broadcast_to(pts[idx + 1], cands.shape)
            both = seg(np.concatenate([prev.ravel(), cands.ravel()]),
                       np.concatenate([cands.ravel(), nxt.ravel()]))
            lt = (both[: cands.size] + both[cands.size:]).reshape(cands.shape)
            lt = np.where(np.abs(cands) <= rmax, lt, np.inf)
            j = np.argmin(lt, axis=0)
            cols = np.arange(idx.size)
            better = lt[j, cols] < base * (1 - 1e-14)
            best_pt = np.where(better, cands[j, cols], pts[idx])
            if np.any(best_pt != pts[idx]):
                moved = True
                pts[idx] = best_pt
                lengths = seg(pts[:-1], pts[1:])
        if not moved:
            step *= 0.5
            if step < rel_step * abs(w - z):
                break
    refined = float(lengths.sum())
    return min(straight, via0, refined)


def beta_distance(spec: WeightSpec, z, w) -> float:
    """Upper approximation of the path distance with density ``1 + phi'(|z|)``.

    Minimum over the straight segment, the path through the origin and an
    optimized 8-point polyline.  Exact when one point is 0 or both lie on the
    same ray.
    """
    return _path_distance(spec, "beta", z, w)


def tau_distance(spec: WeightSpec, z, w) -> float:
    """Same polyline upper approximation with density ``1 / tau(|z|)``."""
    return _path_distance(spec, "tau", z, w)


# ---------------------------------------------------------------------------
# Self checks


@dataclass
class Check:
    name: str
    grid: list
    values: list
    verdict: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "grid": self.grid, "values": self.values,
                "verdict": "pass" if self.verdict else "fail", "note": self.note}


@dataclass
class CheckReport:
    spec: WeightSpec
    checks: list
    r_cut: float
    eta: float | None

    @property
    def passed(self) -> bool:
        return all(c.verdict for c in self.checks)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.verdict]

    def to_dict(self) -> dict:
        return {"weight": str(self.spec), "r_cut": self.r_cut, "eta": self.eta,
                "passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def default_grid(kmax: int = 20) -> np.ndarray:
    return 1.0 - 2.0 ** (-np.arange(1, kmax + 1, dtype=float))


def _finite(grid, vals):
    keep = np.isfinite(vals)
    return grid[keep], vals[keep]


def _tail(v):
    return v[len(v) // 2:] if len(v) >= 4 else v


def _trend_to(direction, grid, logv, name, min_points=4):
    """``direction`` +1 for ``-> inf``, -1 for ``-> 0`` judged on log values."""
    g, lv = _finite(grid, logv)
    if lv.size < min_points:
        return Check(name, g.tolist(), lv.tolist(), False, "too few finite grid points")
    tail = _tail(lv)
    monotone = bool(np.all(direction * np.diff(tail) > 0))
    moved = bool(direction * (lv[-1] - lv[0]) > math.log(10.0))
    return Check(name, g.tolist(), lv.tolist(), monotone and moved, "log values")


def self_check(spec: WeightSpec, grid=None) -> CheckReport:
    """Grid evidence for the structural properties of the weight.

    Trends along ``r -> 1`` are judged in log domain on the points where the
    log quantities are finite; points past that are dropped.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    _check_r(grid)
    with np.errstate(all="ignore"):
        return _self_check(spec, grid)


def _self_check(spec, grid):
    le, l1, l2, _ = log_derivatives(spec, grid)
    ltau = np.asarray(log_tau(spec, grid))
    l1p = np.logaddexp(0.0, l1)
    log1mr = np.log1p(-grid)
    checks = []

    checks.append(_trend_to(-1, grid, ltau - log1mr, "tau/(1-r) -> 0"))
    checks.append(_trend_to(+1, grid, log1mr + l1, "(1-r)phi' -> inf"))
    checks.append(_trend_to(+1, grid, ltau + l1, "tau*phi' -> inf"))
    with np.errstate(invalid="ignore", divide="ignore"):
        checks.append(_trend_to(+1, grid, le - np.log(-log1mr), "phi/log(1/(1-r)) -> inf"))
    checks.append(_trend_to(-1, grid, ltau, "tau -> 0"))

    # phi'' phi / (1+phi')^2 bounded and settling
    lb = l2 + le - 2 * l1p
    g, lv = _finite(grid, lb)
    vals = np.exp(lv)
    settled = lv.size >= 3 and abs(vals[-1] - vals[-2]) <= 0.05 * vals[-1]
    ok = lv.size >= 3 and bool(np.all(np.isfinite(vals))) and vals.max() / vals.min() < 1e3 and settled
    checks.append(Check("phi''phi/(1+phi')^2 bounded", g.tolist(), vals.tolist(), bool(ok)))

    # tau^-2 comparable to the Laplacian
    ld = np.asarray(log_delta_phi(spec, grid))
    g, lv = _finite(grid, -2 * ltau - ld)
    vals = np.exp(lv)
    ok = lv.size >= 3 and vals.max() / vals.min() < 1e2
    checks.append(Check("tau^-2/Laplacian bounded", g.tolist(), vals.tolist(), bool(ok)))

    # monotonicity of phi, phi', tau on the grid
    mono = (np.all(np.diff(le[np.isfinite(le)]) > 0)
            and np.all(np.diff(l1[np.isfinite(l1)]) >= 0)
            and np.all(np.diff(ltau[np.isfinite(ltau)]) < 0))
    checks.append(Check("phi, phi' increasing; tau decreasing", grid.tolist(), [], bool(mono)))

    checks.append(_local_comparability(spec, grid, ltau, l1p))
    checks.append(_tau_regularity(spec, grid, ltau, log1mr))
    checks.append(_trend_to(+1, grid, log1mr + l1p, "(1-r)psi' -> inf"))
    lq = l2 - 2 * l1p
    chk = _trend_to(-1, grid, lq, "psi''/psi'^2 -> 0")
    g, lv = _finite(grid, lq)
    chk.verdict = chk.verdict and bool(np.all(np.diff(lv) < 0))
    checks.append(chk)

    eta, eta_check = _estimate_eta(grid, ltau, l1p)
    checks.append(eta_check)
    return CheckReport(spec=spec, checks=checks, r_cut=WeightEval(spec).r_cut, eta=eta)


def _local_comparability(spec, grid, ltau, l1p):
    """Variation of tau and 1+phi' over discs ``|z - a| < delta tau(a)``."""
    delta = 0.25 * float(np.min(np.exp(np.log1p(-grid) - ltau)))
    tau_a = np.exp(ltau)
    vals = []
    g_used = []
    for a, ta, lta, lp in zip(grid, tau_a, ltau, l1p):
        if not (np.isfinite(lta) and np.isfinite(lp)):
            continue
        rs = np.clip(np.array([a - delta * ta, a + delta * ta]), 0.0, np.nextafter(1.0, 0.0))
        lt = np.asarray(log_tau(spec, rs))
        lq = np.logaddexp(0.0, log_derivatives(spec, rs)[1])
        if not (np.all(np.isfinite(lt)) and np.all(np.isfinite(lq))):
            continue
        dev = max(np.max(np.abs(lt - lta)), np.max(np.abs(lq - lp)))
        vals.append(float(math.exp(dev)))
        g_used.append(float(a))
    ok = len(vals) >= 3 and max(vals) < 100.0
    return Check(f"local comparability (delta={delta:.4g})", g_used, vals, bool(ok))


def _tau_regularity(spec, grid, ltau, log1mr):
    """Either ``tau (1-r)^{-C}`` increases near 1 or ``tau' log(1/tau) -> 0``."""
    g, lt = _finite(grid, ltau)
    lm = log1mr[np.isfinite(ltau)]
    for C in (1.0, 2.0, 4.0, 8.0):
        tail = _tail(lt - C * lm)
        if tail.size >= 3 and np.all(np.diff(tail) > 0):
            return Check("tau regularity", g.tolist(), (lt - C * lm).tolist(), True,
                         f"tau(1-r)^-{C:g} increasing")
    # d log tau / dr by a centred difference scaled to the distance from 1
    h = 1e-4 * (1.0 - g)
    lp = np.asarray(log_tau(spec, g + h))
    lmn = np.asarray(log_tau(spec, g - h))
    dlog = (lp - lmn) / (2 * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = lt + np.log(np.abs(dlog)) + np.log(-lt)
    chk = _trend_to(-1, g, lv, "tau regularity")
    chk.note = "log |tau' log tau|"
    return chk


def _estimate_eta(grid, ltau, l1p, etas=None, bound=10.0):
    """Smallest grid eta for which ``(1+phi') tau^eta`` is essentially decreasing."""
    etas = np.arange(0.25, 8.01, 0.25) if etas is None else etas
    keep = np.isfinite(ltau) & np.isfinite(l1p)
    worst = []
    for eta in etas:
        lh = l1p[keep] + eta * ltau[keep]
        # sup over t <= s of h(s)/h(t)
        run_min = np.minimum.accumulate(lh)
        worst.append(float(np.exp(np.max(lh - run_min))))
        if worst[-1] <= bound:
            return float(eta), Check("eta: (1+phi')tau^eta essentially decreasing",
                                     [float(e) for e in etas[: len(worst)]], worst, True,
                                     f"eta={eta:g}")
    return None, Check("eta: (1+phi')tau^eta essentially decreasing",
                       [float(e) for e in etas], worst, False)
