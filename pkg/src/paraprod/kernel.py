"""Reproducing kernels of ``A^2_omega`` built from the moments ``alpha_j = 2 int r^{2j+1} omega``."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import quadrature as qd
from .norms import QuadratureConfig, WeightModifier, _log_abs_sum, bergman_norm, log_weight
from .series import TruncatedSeries, evaluate
from .weights import WeightSpec, log_omega, log_tau, parse_weight, tau_distance

MOMENT_CHUNK = 128


class TailTooLarge(RuntimeError):
    """The neglected part of a kernel series exceeds the requested tolerance."""


class MomentError(RuntimeError):
    """Moment quadrature failed to converge or produced a non-monotone table."""


def _moment_chunk(spec: WeightSpec, js: np.ndarray, rtol: float, max_panels: int):
    """``log alpha_j`` for the indices ``js`` with one shared adaptive quadrature."""
    js = np.asarray(js, dtype=float)

    def env(r):
        with np.errstate(divide="ignore"):
            return (2 * js[-1] + 1) * np.log(r) + log_weight(spec, r, 1.0)

    b = qd.cutoff_radius(env, -745.0)
    # the integrand of alpha_0 decays slowest at 0 but every j shares the tail
    b = max(b, qd.cutoff_radius(lambda r: log_weight(spec, r, 1.0), -745.0))

    def f(r):
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        return math.log(2.0) + (2 * js[:, None] + 1) * lr[None, :] + log_weight(spec, r, 1.0)[None, :], None

    # exp of a log-integrand of size L carries relative rounding error ~ eps * L
    size = abs((2 * js[-1] + 1) * math.log(b)) + abs(float(log_weight(spec, np.array([b]), 1.0)[0]))
    rtol = max(rtol, 64 * np.finfo(float).eps * size)
    res = qd.adaptive_panels(f, 0.0, b, rtol, batch=js.size, n_init=64, max_panels=max_panels)
    if not res.converged:
        raise MomentError(f"moment quadrature did not converge for j in [{int(js[0])}, {int(js[-1])}]")
    return res.log_value()


@dataclass
class MomentTable:
    """``log alpha_j`` for ``j = 0..J``."""

    spec: WeightSpec
    log_alpha: np.ndarray
    tol: float = 1e-12

    @property
    def J(self) -> int:
        return self.log_alpha.size - 1

    def alpha(self, j):
        return np.exp(self.log_alpha[j])

    def extend(self, J: int) -> "MomentTable":
        """A table with at least ``J + 1`` entries; existing chunks are reused."""
        if J <= self.J:
            return self
        return moments(self.spec, J, tol=self.tol, base=self)

    def content_hash(self) -> str:
        payload = json.dumps({"spec": str(self.spec), "J": self.J, "tol": self.tol,
                              "log_alpha": [float(x).hex() for x in self.log_alpha]})
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {"spec": str(self.spec), "J": self.J, "tol": self.tol,
                "log_alpha": [float(x) for x in self.log_alpha], "hash": self.content_hash()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MomentTable":
        d = json.loads(text)
        table = cls(parse_weight(d["spec"]), np.array(d["log_alpha"], dtype=float), d.get("tol", 1e-12))
        if "hash" in d and d["hash"] != table.content_hash():
            raise ValueError("moment table hash mismatch")
        return table

    def radius_trend(self) -> np.ndarray:
        """``alpha_j^{-1/j}`` for ``j >= 1``; its limsup is at most 1."""
        j = np.arange(1, self.J + 1)
        return np.exp(-self.log_alpha[1:] / j)


def moments(spec: WeightSpec, J: int, cfg: QuadratureConfig | None = None, tol: float = 1e-12,
            base: MomentTable | None = None) -> MomentTable:
    """Moments ``alpha_0..alpha_J`` by batched log-domain adaptive quadrature.

    Indices are processed in fixed blocks of 128 so a table for ``J`` is a
    prefix of the table for any larger ``J``.  The internal tolerance is ten
    times tighter than ``tol``.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    max_panels = cfg.max_panels if cfg is not None else 20000
    out = np.empty(J + 1)
    start = 0
    if base is not None and base.spec == spec:
        full = (base.J + 1) // MOMENT_CHUNK * MOMENT_CHUNK
        keep = min(full, J + 1)
        out[:keep] = base.log_alpha[:keep]
        start = keep
    for s in range(start, J + 1, MOMENT_CHUNK):
        block = np.arange(s, s + MOMENT_CHUNK)
        vals = _moment_chunk(spec, block, tol / 10, max_panels)
        e = min(s + MOMENT_CHUNK, J + 1)
        out[s:e] = vals[: e - s]
    if not np.all(np.isfinite(out)):
        raise MomentError("non-finite moment")
    if np.any(np.diff(out) >= 0):
        raise MomentError("moments are not strictly decreasing")
    return MomentTable(spec, out, tol)


class MomentCache:
    """Directory of JSON moment tables keyed by ``(spec, tol)``; larger tables serve smaller requests."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.hashes: dict = {}

    def _file(self, spec, tol):
        return os.path.join(self.path, f"moments_{str(spec).replace(':', '_')}_{tol:.0e}.json")

    def get(self, spec: WeightSpec, J: int, tol: float = 1e-12) -> MomentTable:
        fn = self._file(spec, tol)
        table = None
        if os.path.exists(fn):
            with open(fn) as fh:
                table = MomentTable.from_json(fh.read())
        if table is None or table.J < J:
            table = moments(spec, J, tol=tol, base=table)
            with open(fn, "w") as fh:
                fh.write(table.to_json())
        self.hashes[os.path.basename(fn)] = table.content_hash()
        return MomentTable(spec, table.log_alpha[: J + 1].copy(), tol) if table.J > J else table


# ---------------------------------------------------------------------------
# kernel series


@dataclass
class KernelHandle:
    """Truncated kernel ``K_a`` with the bound on its neglected tail."""

    a: complex
    table: MomentTable
    series: TruncatedSeries
    tail_bound: float
    partial: float
    r_eval: float
    offset: bool = False
    log_scale: float = 0.0

    @property
    def cap(self) -> int:
        return self.series.cap


def _log_terms(abs_a: float, table: MomentTable, r_eval: float, power: int = 1):
    j = np.arange(table.J + 1)
    with np.errstate(divide="ignore"):
        lt = j * (power * math.log(abs_a) + math.log(r_eval)) - table.log_alpha if abs_a > 0 else \
            np.where(j == 0, -table.log_alpha[0], -np.inf)
    return lt


def series_tail(abs_a: float, table: MomentTable, cap: int, r_eval: float = 1.0, power: int = 1):
    """``(log partial, log tail bound)`` for ``sum_j |a|^{power j} r^j / alpha_j``.

    The moments are log-convex, so ``alpha_j / alpha_{j+1}`` decreases and the
    ratio at ``cap - 1`` dominates every later ratio: the tail is majorized by
    a geometric series.
    """
    lt = _log_terms(abs_a, table, r_eval, power)
    lp = float(np.logaddexp.reduce(lt[: cap + 1]))
    if abs_a == 0:
        return lp, -math.inf
    if cap < 1:
        return lp, math.inf
    log_ratio = lt[cap] - lt[cap - 1]
    if log_ratio >= 0:
        return lp, math.inf
    ratio = math.exp(log_ratio)
    return lp, float(lt[cap] + log_ratio - math.log1p(-ratio))


def required_cap(abs_a: float, spec: WeightSpec, tol: float = 1e-10, r_eval: float = 1.0,
                 table: MomentTable | None = None, power: int = 1, start: int = 127):
    """Smallest block-aligned cap meeting ``tail <= tol * partial``; returns ``(cap, table)``."""
    cap = start
    while True:
        if table is None or table.J < cap:
            table = moments(spec, cap, base=table) if table is None or table.spec == spec else moments(spec, cap)
        lp, lt = series_tail(abs_a, table, cap, r_eval, power)
        if lt - lp <= math.log(tol):
            return cap, table
        if cap > 1 << 16:
            raise TailTooLarge(f"no cap below {cap} controls the tail for |a|={abs_a}")
        cap = 2 * cap + 1


def kernel_series(a: complex, table: MomentTable, cap: int | None = None, r_eval: float = 1.0,
                  tol: float = 1e-10, normalize: bool = False) -> KernelHandle:
    """Coefficients ``conj(a)^j / alpha_j`` for ``j <= cap`` (default ``J``).

    With ``normalize=True`` the stored coefficients are divided by the largest
    magnitude and ``log_scale`` holds its logarithm, so ``K_a = e^{log_scale} series``.
    """
    a = complex(a)
    if abs(a) >= 1:
        raise ValueError("|a| must be < 1")
    cap = table.J if cap is None else cap
    if cap > table.J:
        raise ValueError(f"cap {cap} exceeds the moment table size {table.J}")
    j = np.arange(cap + 1)
    with np.errstate(divide="ignore"):
        logmag = (j * math.log(abs(a)) if a != 0 else np.where(j == 0, 0.0, -np.inf)) - table.log_alpha[: cap + 1]
    shift = float(np.max(logmag)) if normalize else 0.0
    if not normalize and shift < np.max(logmag) - 700:
        raise OverflowError("kernel coefficients overflow; use normalize=True")
    with np.errstate(under="ignore"):
        coeffs = np.exp(logmag - shift) * np.exp(-1j * j * np.angle(a))
    lp, lt = series_tail(abs(a), table, cap, r_eval)
    tail = math.exp(lt) if lt < 709 else math.inf
    if lt - lp > math.log(tol):
        raise TailTooLarge(f"kernel tail {tail:.3g} exceeds {tol:g} x partial sum at cap {cap}")
    return KernelHandle(a, table, TruncatedSeries(coeffs), tail, math.exp(min(lp, 709.0)), r_eval,
                        log_scale=shift)


def kernel_offset(handle: KernelHandle) -> TruncatedSeries:
    """``z K_a(z)``, up to the factor ``exp(handle.log_scale)``."""
    return TruncatedSeries(np.concatenate([[0.0], handle.series.coeffs]))


def log_abs_eval(coeffs, z: complex) -> float:
    """``log |sum c_k z^k|`` without overflow."""
    c = np.asarray(coeffs, dtype=complex)
    k = np.arange(c.size)
    r = abs(z)
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(c)) + (k * math.log(r) if r > 0 else np.where(k == 0, 0.0, -np.inf))
    m = float(np.max(lm))
    if not math.isfinite(m):
        return -math.inf
    with np.errstate(under="ignore"):
        terms = np.exp(lm - m) * np.exp(1j * (np.angle(c) + k * np.angle(z)))
    return m + math.log(abs(np.sum(terms)))


def parseval_norm(f: TruncatedSeries, table: MomentTable) -> float:
    """``(sum |f_k|^2 alpha_k)^{1/2}``: the plain ``A^2_omega`` norm."""
    c = f.coeffs[: f.degree + 1]
    if c.size > table.J + 1:
        raise ValueError("series degree exceeds the moment table")
    nz = c != 0
    if not np.any(nz):
        return 0.0
    lt = 2 * np.log(np.abs(c[nz])) + table.log_alpha[: c.size][nz]
    return math.exp(0.5 * float(np.logaddexp.reduce(lt)))


# ---------------------------------------------------------------------------
# checks and estimates


def verify_reproducing(f: TruncatedSeries, a: complex, spec: WeightSpec, table: MomentTable,
                       cfg: QuadratureConfig | None = None, numeric: bool = True) -> dict:
    """Residuals of ``<f, K_a> = f(a)``, relative to ``|f(a)| + 1``.

    ``pairing`` uses orthogonality of monomials, ``quadrature`` integrates
    ``f conj(K_a) omega`` over the disc numerically.  ``residual`` is the
    larger of the two.
    """
    cfg = cfg or QuadratureConfig(radial_rel_tol=1e-12)
    a = complex(a)
    deg = f.degree
    if deg > table.J:
        raise ValueError("deg f exceeds the moment table")
    fa = evaluate(f, a)
    scale = abs(fa) + 1.0
    if f.is_zero():
        return {"pairing": 0.0, "quadrature": 0.0, "residual": 0.0}
    j = np.arange(deg + 1)
    # <z^k, K_a> = conj(conj(a)^k / alpha_k) * alpha_k
    kc = kernel_series(a, table, cap=max(deg, 1), tol=math.inf).series.coeffs[: deg + 1]
    pairing = np.sum(f.coeffs[: deg + 1] * np.conj(kc) * np.exp(table.log_alpha[j]))
    out = {"pairing": float(abs(pairing - fa) / scale)}
    if numeric:
        handle = _kernel_for_quadrature(a, spec, table)
        out["quadrature"] = float(abs(_numeric_pairing(f, handle.series, spec, cfg) - fa) / scale)
    else:
        out["quadrature"] = float("nan")
    out["residual"] = float(max(v for v in out.values() if v == v))
    return out


def _kernel_for_quadrature(a, spec, table, tol=1e-14):
    cap, table2 = required_cap(abs(a), spec, tol=tol, table=table)
    return kernel_series(a, table2, cap=cap, tol=tol)


def _numeric_pairing(f: TruncatedSeries, K: TruncatedSeries, spec: WeightSpec, cfg: QuadratureConfig) -> complex:
    """``int f conj(K) omega dA`` with adaptive radial panels.

    The angular mean on ``|z| = r`` is the finite sum ``sum_j f_j conj(K_j) r^{2j}``,
    so only the radial integral is numeric (and independent of the moment table).
    """
    d = f.degree
    c = f.coeffs[: d + 1] * np.conj(K.coeffs[: d + 1])
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return 0.0
    c = c[nz]
    logc = np.log(np.abs(c))
    ph = c / np.abs(c)
    twoj = 2.0 * nz

    def func(r):
        with np.errstate(divide="ignore"):
            lr = np.log(r)
            terms = logc[None, :] + twoj[None, :] * lr[:, None]
            top = np.max(terms, axis=1)
            top = np.where(np.isfinite(top), top, 0.0)
            mean = np.sum(ph[None, :] * np.exp(terms - top[:, None]), axis=1)
            scale = math.log(2.0) + lr + log_weight(spec, r, 1.0) + top
        vals = np.stack([mean.real, mean.imag])
        return np.stack([scale, scale]), vals

    def env(r):
        with np.errstate(divide="ignore"):
            lr = np.log(r)
            terms = logc[None, :] + twoj[None, :] * lr[:, None]
            return lr + log_weight(spec, r, 1.0) + np.logaddexp.reduce(terms, axis=1)

    b = qd.cutoff_radius(env, cfg.r_floor_log)
    res = qd.adaptive_panels(func, 0.0, b, cfg.radial_rel_tol, batch=2, n_init=cfg.n_init_panels,
                             max_panels=cfg.max_panels, joint=True)
    v = res.value()
    return complex(v[0], v[1])


def diagonal_ratio(a: complex, spec: WeightSpec, table: MomentTable, tol: float = 1e-10) -> float:
    """``K_a(a) omega(a) tau(a)^2`` with ``K_a(a) = sum |a|^{2j} / alpha_j``."""
    ra = abs(complex(a))
    lp, lt = series_tail(ra, table, table.J, 1.0, power=2)
    if lt - lp > math.log(tol):
        raise TailTooLarge(f"diagonal series tail too large at J={table.J}")
    return math.exp(lp + log_omega(spec, ra) + 2 * log_tau(spec, ra))


def kernel_norm_ratio(a: complex, spec: WeightSpec, p: float, table: MomentTable,
                      cfg: QuadratureConfig | None = None, tol: float = 1e-10, doubled: bool = False) -> float:
    """``||K_a||_{A^p(omega^{p/2})} omega(a)^{1/2} tau(a)^{2-2/p}``.

    ``doubled`` uses ``2 cap + 1`` kernel terms, for truncation-stability checks.
    """
    ra = abs(complex(a))
    cap, table = required_cap(ra, spec, tol=tol, table=table)
    if doubled:
        cap = 2 * cap + 1
        if table.J < cap:
            table = moments(spec, cap, base=table)
    handle = kernel_series(a, table, cap=cap, tol=tol, normalize=True)
    est = bergman_norm(handle.series, spec, p, WeightModifier.plain(), cfg)
    return math.exp(handle.log_scale + est.log_value + 0.5 * log_omega(spec, ra) + (2 - 2 / p) * log_tau(spec, ra))


@dataclass
class OffDiagProfile:
    a: complex
    points: list
    d_tau: np.ndarray
    normalized: np.ndarray
    eta: float | None = None
    extra: dict = field(default_factory=dict)


def offdiag_profile(a: complex, z_list, spec: WeightSpec, table: MomentTable, tol: float = 1e-10) -> OffDiagProfile:
    """``|K_a(z)| omega(a)^{1/2} omega(z)^{1/2} tau(a) tau(z)`` against the ``d_tau`` upper bound."""
    a = complex(a)
    cap, table = required_cap(abs(a), spec, tol=tol, table=table)
    handle = kernel_series(a, table, cap=cap, tol=tol, normalize=True)
    la = handle.log_scale + 0.5 * log_omega(spec, abs(a)) + log_tau(spec, abs(a))
    d, v = [], []
    for z in z_list:
        z = complex(z)
        lk = log_abs_eval(handle.series.coeffs, z)
        lz = 0.5 * log_omega(spec, abs(z)) + log_tau(spec, abs(z))
        d.append(tau_distance(spec, a, z))
        v.append(math.exp(lk + la + lz))
    prof = OffDiagProfile(a, [complex(z) for z in z_list], np.array(d), np.array(v))
    prof.eta = fit_eta(prof.d_tau, prof.normalized)
    return prof


def fit_eta(d_tau, normalized, d_min: float = 1.0):
    """Decay rate from a least-squares fit ``log value ~ c - eta d`` over ``d >= d_min``."""
    d_tau = np.asarray(d_tau, dtype=float)
    normalized = np.asarray(normalized, dtype=float)
    sel = (d_tau >= d_min) & (normalized > 0)
    if sel.sum() < 3:
        return None
    slope, _ = np.polyfit(d_tau[sel], np.log(normalized[sel]), 1)
    return float(-slope)


__all__ = [
    "MomentTable", "MomentCache", "moments", "KernelHandle", "kernel_series", "kernel_offset",
    "required_cap", "series_tail", "verify_reproducing", "diagonal_ratio", "kernel_norm_ratio",
    "offdiag_profile", "OffDiagProfile", "fit_eta", "parseval_norm", "TailTooLarge", "MomentError",
    "log_abs_eval",
]
