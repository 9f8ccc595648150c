"""Truncated power series ``sum_{k<=D} c_k z^k`` with complex coefficients."""

from __future__ import annotations

import json
import math

import numpy as np


class TruncatedSeries:
    """An analytic function known modulo ``z^{D+1}``.

    Instances are immutable; the coefficient array is copied on construction
    and exposed read-only.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs, cap: int | None = None):
        c = np.array(coeffs, dtype=complex).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        if cap is not None:
            if cap < 0:
                raise ValueError("cap must be >= 0")
            if c.size > cap + 1:
                c = c[: cap + 1]
            elif c.size < cap + 1:
                c = np.concatenate([c, np.zeros(cap + 1 - c.size, dtype=complex)])
        c.setflags(write=False)
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def cap(self) -> int:
        return self._c.size - 1

    @property
    def degree(self) -> int:
        """Index of the last nonzero coefficient (0 for the zero series)."""
        nz = np.nonzero(self._c)[0]
        return int(nz[-1]) if nz.size else 0

    def is_zero(self) -> bool:
        return not np.any(self._c)

    def in_H0(self) -> bool:
        return self._c[0] == 0

    def __len__(self):
        return self._c.size

    def __getitem__(self, k):
        return self._c[k]

    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            c = self._c.copy()
            c[0] += complex(other)
            return TruncatedSeries(c)
        D = min(self.cap, other.cap)
        return TruncatedSeries(self._c[: D + 1] + other._c[: D + 1])

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self._c)

    def __sub__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self + (-complex(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return cauchy_product(self, other, min(self.cap, other.cap))
        return TruncatedSeries(self._c * complex(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __call__(self, z):
        return evaluate(self, z)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.cap == other.cap and np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash((self.cap, self._c.tobytes()))

    def __repr__(self):
        return f"TruncatedSeries({self._c.tolist()!r})"

    def with_cap(self, cap: int) -> "TruncatedSeries":
        return TruncatedSeries(self._c, cap)

    def trimmed(self) -> "TruncatedSeries":
        """Drop trailing zeros (cap becomes the degree)."""
        return TruncatedSeries(self._c[: self.degree + 1])

    def to_json(self) -> str:
        return json.dumps([[float(z.real), float(z.imag)] for z in self._c])

    @classmethod
    def from_json(cls, text: str) -> "TruncatedSeries":
        data = json.loads(text)
        return cls([complex(re, im) for re, im in data])

    @classmethod
    def monomial(cls, k: int, cap: int | None = None, coef=1.0) -> "TruncatedSeries":
        c = np.zeros(k + 1, dtype=complex)
        c[k] = coef
        return cls(c, cap)

    @classmethod
    def constant(cls, value, cap: int = 0) -> "TruncatedSeries":
        return cls([value], cap)


def parse_series(text: str) -> TruncatedSeries:
    """Read ``poly:1,0,2`` (real coefficients in index order) or a JSON ``[[re, im], ...]`` list."""
    text = text.strip()
    if text.startswith("poly:"):
        body = text[5:].strip()
        if not body:
            raise ValueError("empty polynomial")
        return TruncatedSeries([float(x) for x in body.split(",")])
    if text.startswith("["):
        return TruncatedSeries.from_json(text)
    raise ValueError(f"cannot parse series {text!r}; use poly:c0,c1,... or JSON pairs")


def cauchy_product(f: TruncatedSeries, g: TruncatedSeries, cap: int) -> TruncatedSeries:
    """Coefficients of ``f g`` up to ``z^cap``."""
    if cap < 0:
        raise ValueError("cap must be >= 0")
    a = f.coeffs[: cap + 1]
    b = g.coeffs[: cap + 1]
    return TruncatedSeries(np.convolve(a, b)[: cap + 1], cap)


def derivative(f: TruncatedSeries) -> TruncatedSeries:
    """``f'`` with cap ``D - 1`` (cap 0 for constants)."""
    c = f.coeffs
    if c.size == 1:
        return TruncatedSeries([0.0])
    return TruncatedSeries(c[1:] * np.arange(1, c.size))


def primitive0(f: TruncatedSeries) -> TruncatedSeries:
    """The primitive vanishing at 0, with cap ``D + 1``."""
    c = f.coeffs
    out = np.zeros(c.size + 1, dtype=complex)
    out[1:] = c / np.arange(1, c.size + 1)
    return TruncatedSeries(out)


def evaluate(f: TruncatedSeries, z):
    """Horner evaluation; ``z`` may be a scalar or an array."""
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for c in f.coeffs[::-1]:
        acc = acc * z + c
    return complex(acc) if acc.ndim == 0 else acc


def dilate(f: TruncatedSeries, r: float) -> TruncatedSeries:
    """``z -> f(r z)`` for ``0 < r <= 1``."""
    if not (0 < r <= 1):
        raise ValueError("dilation radius must lie in (0, 1]")
    if r == 1:
        return f
    k = np.arange(f.cap + 1)
    return TruncatedSeries(f.coeffs * np.power(float(r), k))


def power(g: TruncatedSeries, k: int, cap: int | None = None) -> TruncatedSeries:
    """``g^k`` truncated at ``cap`` (default: ``k * deg g``) by repeated squaring."""
    if k < 0:
        raise ValueError("power must be >= 0")
    if cap is None:
        cap = k * g.degree
    result = TruncatedSeries([1.0], cap)
    base = g.with_cap(cap)
    while k:
        if k & 1:
            result = cauchy_product(result, base, cap)
        k >>= 1
        if k:
            base = cauchy_product(base, base, cap)
    return result


def pi0(f: TruncatedSeries) -> TruncatedSeries:
    """``f - f(0)``."""
    c = np.array(f.coeffs)
    c[0] = 0
    return TruncatedSeries(c)


def max_modulus(f: TruncatedSeries, r: float, rel_tol: float = 1e-9, max_points: int = 1 << 22) -> float:
    """``max_{|z|=r} |f(z)|`` via a doubling angular grid plus golden-section polish.

    ``r = 1`` is allowed since polynomial symbols are analytic on the closed disc.
    """
    if not (0 <= r <= 1):
        raise ValueError("radius must lie in [0, 1]")
    c = f.coeffs[: f.degree + 1]
    if c.size == 1 or r == 0:
        return float(abs(c[0]))
    scaled = c * np.power(float(r), np.arange(c.size))
    n = 16 * c.size
    prev = None
    while True:
        vals = np.abs(np.fft.fft(scaled, n))
        m = int(np.argmax(vals))
        best = float(vals[m])
        if prev is not None and abs(best - prev) <= rel_tol * max(best, 1e-300):
            break
        if 2 * n > max_points:
            break
        prev = best
        n *= 2
    # fft uses exp(-i k theta), so node m sits at theta = -2 pi m / n
    theta0 = -2.0 * math.pi * m / n
    h = 2.0 * math.pi / n
    poly = np.polynomial.Polynomial(scaled)

    def neg(theta):
        return -abs(poly(complex(math.cos(theta), math.sin(theta))))

    return max(best, -golden_section(neg, theta0 - h, theta0 + h)[1])


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(fun, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Return ``(x, fun(x))`` approximately minimizing a unimodal ``fun`` on ``[a, b]``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return (c, fc) if fc < fd else (d, fd)
