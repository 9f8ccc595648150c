"""The paraproduct letters ``M_g``, ``S_g``, ``T_g`` and words built from them.

Convention: a word ``L = L_1 L_2 ... L_N`` acts right to left,
``L f = L_1(L_2(... L_N f))``, so the leftmost letter is applied last.
The string ``"TS"`` therefore means ``f -> T_g(S_g f)``.

* ``M_g f = f g``
* ``T_g f = int_0^z f g'``
* ``S_g f = int_0^z f' g``
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .series import TruncatedSeries, cauchy_product, derivative, pi0, primitive0

LETTERS = ("M", "S", "T")
MAX_DECOMPOSITION_LENGTH = 8


class SingularSystem(RuntimeError):
    """The basis operators are linearly dependent on the chosen test inputs."""


class NonIntegerCoefficient(RuntimeError):
    """A recovered coefficient is not an integer."""


@dataclass(frozen=True)
class Word:
    """A nonempty string over ``{M, S, T}``; ``letters[0]`` is ``L_1``."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("a word needs at least one letter")
        bad = set(self.letters) - set(LETTERS)
        if bad:
            raise ValueError(f"unknown letters {sorted(bad)} in {self.letters!r}")

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(text.strip().upper())

    @property
    def ell(self) -> int:
        return self.letters.count("M")

    @property
    def m(self) -> int:
        return self.letters.count("S")

    @property
    def n(self) -> int:
        return self.letters.count("T")

    @property
    def N(self) -> int:
        return len(self.letters)

    @property
    def k(self) -> int:
        return self.ell + self.m

    @property
    def counts(self) -> tuple:
        return (self.ell, self.m, self.n)

    @property
    def s(self) -> float:
        """``N / n``; only defined when the word contains a ``T``."""
        if self.n == 0:
            raise ValueError(f"s is undefined for {self.letters!r} (no T letter)")
        return self.N / self.n

    @property
    def delta(self) -> int | None:
        """0 if the last non-``M`` letter is ``T``, 1 if it is ``S``."""
        stripped = self.letters.rstrip("M")
        if not stripped:
            return None
        return 0 if stripped[-1] == "T" else 1

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __str__(self) -> str:
        return self.letters

    def __len__(self) -> int:
        return len(self.letters)


def _as_word(word) -> Word:
    return word if isinstance(word, Word) else Word.parse(word)


def all_words(max_len: int, min_len: int = 1):
    """Every word with ``min_len <= N <= max_len``, in length-then-lexicographic order."""
    for N in range(min_len, max_len + 1):
        for letters in product(LETTERS, repeat=N):
            yield Word("".join(letters))


# ---------------------------------------------------------------------------
# floating-point application


def apply_letter(letter: str, g: TruncatedSeries, f: TruncatedSeries, cap: int | None = None) -> TruncatedSeries:
    """One paraproduct letter; ``cap`` defaults to the exact degree bound ``f.cap + deg g``."""
    if cap is None:
        cap = f.cap + g.degree
    if letter == "M":
        return cauchy_product(f, g, cap)
    if letter == "T":
        dg = derivative(g)
        return primitive0(cauchy_product(f, dg, max(cap - 1, 0))).with_cap(cap)
    if letter == "S":
        df = derivative(f)
        return primitive0(cauchy_product(df, g, max(cap - 1, 0))).with_cap(cap)
    raise ValueError(f"unknown letter {letter!r}")


def apply_word(word, g: TruncatedSeries, f: TruncatedSeries, cap: int | None = None) -> TruncatedSeries:
    """``L_1(L_2(... L_N f))``.

    Every letter raises the degree by at most ``deg g``, so the default cap
    ``f.cap + N deg g`` is exact for polynomial inputs.  All three letters are
    lower triangular in the monomial basis, so truncating at a smaller cap
    after each letter gives the exact low-order coefficients.
    """
    word = _as_word(word)
    if cap is None:
        cap = f.cap + word.N * g.degree
    h = f.with_cap(min(f.cap, cap))
    for letter in reversed(word.letters):
        h = apply_letter(letter, g, h, min(cap, h.cap + g.degree))
    return h.with_cap(cap)


def apply_combination(words, coefficients, g: TruncatedSeries, f: TruncatedSeries, cap: int | None = None) -> TruncatedSeries:
    """``sum_i coefficients[i] * apply_word(words[i], g, f)``."""
    words = [_as_word(w) for w in words]
    if cap is None:
        cap = f.cap + max(w.N for w in words) * g.degree
    acc = TruncatedSeries([0.0], cap)
    for w, c in zip(words, coefficients):
        acc = acc + complex(c) * apply_word(w, g, f, cap)
    return acc


def homogeneity_check(word, g: TruncatedSeries, f: TruncatedSeries, lam: complex) -> float:
    """``max_k |L_{lam g} f - lam^N L_g f|_k`` (zero up to rounding)."""
    word = _as_word(word)
    a = apply_word(word, g * lam, f)
    b = apply_word(word, g, f)
    return float(np.max(np.abs(a.coeffs - (lam ** word.N) * b.coeffs)))


# ---------------------------------------------------------------------------
# exact rational application


def _q_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _q_der(a):
    return [i * a[i] for i in range(1, len(a))] or [Fraction(0)]


def _q_prim(a):
    return [Fraction(0)] + [a[i] / (i + 1) for i in range(len(a))]


def _q_letter(letter, g, f):
    if letter == "M":
        return _q_mul(f, g)
    if letter == "T":
        return _q_prim(_q_mul(f, _q_der(g)))
    return _q_prim(_q_mul(_q_der(f), g))


def q_apply_word(letters: str, g, f):
    """Exact counterpart of :func:`apply_word` on sequences of ``Fraction``."""
    return list(_q_apply_cached(letters, tuple(g), tuple(f)))


@lru_cache(maxsize=200_000)
def _q_apply_cached(letters, g, f):
    if not letters:
        return f
    inner = _q_apply_cached(letters[1:], g, f)
    return tuple(_q_letter(letters[0], g, inner))


def _q_pad(vecs):
    n = max(len(v) for v in vecs)
    return [list(v) + [Fraction(0)] * (n - len(v)) for v in vecs]


def _q_solve(rows, rhs):
    """Exact solution of a consistent overdetermined system; raises if rank deficient.

    Returns ``(x, residual)`` with ``residual`` the max mismatch (a Fraction).
    """
    n = len(rows[0])
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    piv_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                fac = A[i][c]
                A[i] = [x - fac * y for x, y in zip(A[i], A[r])]
        piv_cols.append(c)
        r += 1
    if r < n:
        raise SingularSystem(f"rank {r} < {n}")
    x = [Fraction(0)] * n
    for i, c in enumerate(piv_cols):
        x[c] = A[i][n]
    residual = max((abs(sum(a * xi for a, xi in zip(row, x)) - b) for row, b in zip(rows, rhs)),
                   default=Fraction(0))
    return x, residual


def _monomial(i):
    return [Fraction(0)] * i + [Fraction(1)]


def _to_int(x: Fraction, what: str) -> int:
    if x.denominator != 1:
        raise NonIntegerCoefficient(f"{what} = {x} is not an integer")
    return int(x)


G_SOLVE = (Fraction(1), Fraction(1))              # 1 + z
G_VALIDATE = (Fraction(1), Fraction(1), Fraction(1))  # 1 + z + z^2


@dataclass
class CanonicalForm:
    """``L = S^k T^n + sum_j c_j S^{k-j} T^{n+j}`` (on ``H_0``) and its full-space extension."""

    word: str
    k: int
    n0: int
    c: list
    residual: float
    delta_L: int | None = None
    a: list | None = None
    b: list | None = None
    trivial: bool = False
    note: str = ""

    def basis(self) -> list:
        """Words ``S^{k-j} T^{n+j}`` for ``j = 0..k``."""
        return ["S" * (self.k - j) + "T" * (self.n0 + j) for j in range(self.k + 1)]

    def apply_H0(self, g: TruncatedSeries, f: TruncatedSeries, cap: int | None = None) -> TruncatedSeries:
        """Evaluate the right-hand side on ``f`` (meaningful for ``f(0) = 0``)."""
        return apply_combination(self.basis(), [1] + list(self.c), g, f, cap)

    def apply_full(self, g: TruncatedSeries, f: TruncatedSeries, cap: int | None = None) -> TruncatedSeries:
        if self.a is None:
            raise ValueError("no full-space decomposition recorded")
        basis = self.basis()
        a0 = 1 - self.delta_L
        lhs = apply_combination(basis, [a0] + list(self.a), g, f, cap)
        rhs = apply_combination(basis, [self.delta_L] + list(self.b), g, pi0(f), cap)
        return lhs.with_cap(min(lhs.cap, rhs.cap)) + rhs

    def to_dict(self) -> dict:
        d = {"word": self.word, "leading": {"k": self.k, "n": self.n0}, "c": list(self.c),
             "delta_L": self.delta_L, "residual": self.residual}
        if self.a is not None:
            d["a"] = list(self.a)
            d["b"] = list(self.b)
        if self.trivial:
            d["trivial"] = True
            d["note"] = self.note
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __str__(self) -> str:
        terms = [f"S^{self.k}T^{self.n0}"]
        for j, cj in enumerate(self.c, start=1):
            if cj:
                terms.append(f"{cj:+d} S^{self.k - j}T^{self.n0 + j}")
        return f"{self.word} = " + " ".join(terms)


def _check_word(word: Word):
    if word.N > MAX_DECOMPOSITION_LENGTH:
        raise ValueError(f"words longer than {MAX_DECOMPOSITION_LENGTH} letters are not decomposed")
    if word.m + word.n < 1:
        raise ValueError("the word needs at least one S or T letter")


def _solve_H0(word: Word, g, extra: int):
    k, n = word.k, word.n
    basis = ["S" * (k - j) + "T" * (n + j) for j in range(k + 1)]
    rows, rhs = [], []
    for i in range(1, k + 2 + extra):
        f = _monomial(i)
        cols = _q_pad([q_apply_word(b, g, f) for b in basis] + [q_apply_word(word.letters, g, f)])
        for deg in range(len(cols[0])):
            rows.append([col[deg] for col in cols[:-1]])
            rhs.append(cols[-1][deg])
    return _q_solve(rows, rhs)


def _with_retries(solver, word, g):
    last = None
    for extra in (0, 2, 6):
        try:
            return solver(word, g, extra)
        except SingularSystem as exc:
            last = exc
    raise SingularSystem(f"{word.letters}: {last}")


def _reconstruction_residual(word: Word, coeffs, g, inputs) -> Fraction:
    k, n = word.k, word.n
    basis = ["S" * (k - j) + "T" * (n + j) for j in range(k + 1)]
    worst = Fraction(0)
    for f in inputs:
        vecs = _q_pad([q_apply_word(b, g, f) for b in basis] + [q_apply_word(word.letters, g, f)])
        for deg in range(len(vecs[0])):
            val = sum(cj * v[deg] for cj, v in zip(coeffs, vecs[:-1])) - vecs[-1][deg]
            worst = max(worst, abs(val))
    return worst


def canonical_decomposition_H0(word) -> CanonicalForm:
    """Integers ``c_j`` with ``L = S^k T^n + sum_j c_j S^{k-j} T^{n+j}`` on ``H_0``.

    Solved in exact rational arithmetic with ``g = 1 + z`` and inputs
    ``z, ..., z^{k+1}``; the same solve with ``g = 1 + z + z^2`` must give the
    same integers.  For words without ``T`` a trivial form is returned.
    """
    word = _as_word(word)
    _check_word(word)
    if word.n == 0:
        return CanonicalForm(word.letters, word.k, 0, [], 0.0, word.delta, trivial=True,
                             note="no T letter: bounded iff g is bounded")
    x, res = _with_retries(_solve_H0, word, G_SOLVE)
    y, res2 = _with_retries(_solve_H0, word, G_VALIDATE)
    if res != 0 or res2 != 0:
        raise SingularSystem(f"{word.letters}: inconsistent system (residual {float(max(res, res2))})")
    if x != y:
        raise NonIntegerCoefficient(f"{word.letters}: coefficients depend on g ({x} vs {y})")
    if x[0] != 1:
        raise NonIntegerCoefficient(f"{word.letters}: leading coefficient {x[0]} != 1")
    c = [_to_int(v, f"c_{j}") for j, v in enumerate(x[1:], start=1)]
    inputs = [_monomial(i) for i in range(1, word.k + 3)] + [[Fraction(0), Fraction(2), Fraction(-3), Fraction(1, 2)]]
    residual = _reconstruction_residual(word, x, G_VALIDATE, inputs)
    return CanonicalForm(word.letters, word.k, word.n, c, float(residual), word.delta)


def _solve_full(word: Word, g, extra: int):
    k, n = word.k, word.n
    basis = ["S" * (k - j) + "T" * (n + j) for j in range(k + 1)]
    rows, rhs = [], []
    for i in range(0, k + 2 + extra):
        f = _monomial(i)
        f0 = [Fraction(0)] + f[1:]
        cols = ([q_apply_word(b, g, f) for b in basis]
                + [q_apply_word(b, g, f0) for b in basis]
                + [q_apply_word(word.letters, g, f)])
        cols = _q_pad(cols)
        for deg in range(len(cols[0])):
            rows.append([col[deg] for col in cols[:-1]])
            rhs.append(cols[-1][deg])
    return _q_solve(rows, rhs)


def full_decomposition(word) -> CanonicalForm:
    """Full-space form ``(1-d) S^kT^n + d S^kT^n Pi_0 + sum a_j S^{k-j}T^{n+j} + sum b_j S^{k-j}T^{n+j} Pi_0``.

    ``d`` (``delta_L``) is solved for and then compared with the ending-letter
    rule.  Raises :class:`SingularSystem` when the enlarged basis is
    dependent, which happens for every word without ``T``
    (``S^k`` annihilates constants).
    """
    word = _as_word(word)
    _check_word(word)
    k = word.k
    x, res = _with_retries(_solve_full, word, G_SOLVE)
    y, res2 = _with_retries(_solve_full, word, G_VALIDATE)
    if res != 0 or res2 != 0:
        raise SingularSystem(f"{word.letters}: inconsistent system")
    if x != y:
        raise NonIntegerCoefficient(f"{word.letters}: coefficients depend on g")
    a0, b0 = x[0], x[k + 1]
    if a0 + b0 != 1 or b0 not in (0, 1):
        raise NonIntegerCoefficient(f"{word.letters}: leading pair ({a0}, {b0}) is not (1-d, d)")
    delta = int(b0)
    if word.delta is not None and delta != word.delta:
        raise NonIntegerCoefficient(f"{word.letters}: solved delta {delta} contradicts ending rule {word.delta}")
    a = [_to_int(v, f"a_{j}") for j, v in enumerate(x[1: k + 1], start=1)]
    b = [_to_int(v, f"b_{j}") for j, v in enumerate(x[k + 2:], start=1)]
    c = [ai + bi for ai, bi in zip(a, b)]
    return CanonicalForm(word.letters, k, word.n, c, float(max(res, res2)), delta, a=a, b=b)


def reconstruction_error(form: CanonicalForm, g: TruncatedSeries, f: TruncatedSeries) -> float:
    """Relative coefficient mismatch between ``apply_word`` and the canonical form on ``f``."""
    lhs = apply_word(form.word, g, f)
    rhs = form.apply_H0(g, f, lhs.cap)
    scale = max(float(np.max(np.abs(lhs.coeffs))), float(np.max(np.abs(rhs.coeffs))), 1e-300)
    return float(np.max(np.abs(lhs.coeffs - rhs.coeffs))) / scale


__all__ = [
    "LETTERS", "Word", "all_words", "apply_letter", "apply_word", "apply_combination",
    "homogeneity_check", "canonical_decomposition_H0", "full_decomposition", "CanonicalForm",
    "SingularSystem", "NonIntegerCoefficient", "pi0", "q_apply_word", "reconstruction_error",
]
