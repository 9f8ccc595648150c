"""Experiment runner: restricted operator-norm estimates and report assembly.

Every experiment returns an :class:`ExperimentReport` whose rows are plain
dicts.  Rows are pure functions of ``(config, seed)`` and are sorted by key
before serialization, so reports do not depend on the evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import __version__
from .kernel import (diagonal_ratio, kernel_norm_ratio, kernel_offset, kernel_series, moments,
                     offdiag_profile, required_cap, verify_reproducing)
from .norms import (NormEstimate, NotConverged, QuadratureConfig, WeightModifier, bergman_norms,
                    bloch_seminorm, q_functionals_from_h)
from .series import TruncatedSeries, derivative, dilate, max_modulus, power
from .weights import WeightSpec, log_derivatives, parse_weight, self_check
from .words import (Word, all_words, apply_letter, apply_word, canonical_decomposition_H0,
                    reconstruction_error)

LAMBDA_SPOT = 1.7 * complex(math.cos(0.3), math.sin(0.3))


# ---------------------------------------------------------------------------
# symbols and test functions


@dataclass(frozen=True)
class SymbolFamily:
    """Seeded random polynomial symbols.

    Each symbol has a degree drawn uniformly from ``1..max_degree`` and
    coefficients ``(X + iY) / (sqrt(2) (k + 1))`` with ``X, Y`` standard
    normal, drawn from ``numpy.random.default_rng(seed)``.
    """

    seed: int = 7
    count: int = 30
    max_degree: int = 6

    def __post_init__(self):
        if self.count < 1 or self.max_degree < 1:
            raise ValueError("count and max_degree must be >= 1")

    def symbols(self) -> list:
        return list(_family_symbols(self.seed, self.count, self.max_degree))


@lru_cache(maxsize=64)
def _family_symbols(seed, count, max_degree):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        deg = int(rng.integers(1, max_degree + 1))
        k = np.arange(deg + 1)
        c = (rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)) / (math.sqrt(2.0) * (k + 1))
        if np.any(c[1:] != 0):
            out.append(TruncatedSeries(c))
    return tuple(out)


@dataclass(frozen=True)
class TestFunction:
    kind: str
    label: str
    f: TruncatedSeries


@dataclass(frozen=True)
class TestFunctionSet:
    """Normalized test functions vanishing at 0.

    ``monomial``: ``z^k`` for ``k = 1..K``; ``kernel``: ``z K_a`` for ``a``
    on a polar grid; ``random``: seeded polynomials with zero constant term.
    """

    __test__ = False  # not a pytest class

    kinds: tuple = ("monomial", "kernel", "random")
    K: int = 8
    kernel_radii: tuple = (0.3, 0.6, 0.8)
    kernel_angles: int = 8
    n_random: int = 4
    random_degree: int = 8
    seed: int = 0

    def __post_init__(self):
        bad = set(self.kinds) - {"monomial", "kernel", "random"}
        if bad or not self.kinds:
            raise ValueError(f"unknown test kinds {sorted(bad)}")

    def members(self, spec: WeightSpec, p: float, cfg: QuadratureConfig | None = None) -> list:
        return list(_members(self, spec, float(p), cfg or QuadratureConfig()))


@lru_cache(maxsize=32)
def _moment_table(spec: WeightSpec, J: int):
    return moments(spec, J)


@lru_cache(maxsize=64)
def _members(tests: TestFunctionSet, spec, p, cfg):
    raw = []
    if "monomial" in tests.kinds:
        raw += [("monomial", f"z^{k}", TruncatedSeries.monomial(k)) for k in range(1, tests.K + 1)]
    if "kernel" in tests.kinds:
        table = _moment_table(spec, 127)
        for r in tests.kernel_radii:
            cap, table = required_cap(r, spec, table=table)
            _note(table)
            for j in range(tests.kernel_angles):
                a = r * complex(math.cos(2 * math.pi * j / tests.kernel_angles),
                                math.sin(2 * math.pi * j / tests.kernel_angles))
                h = kernel_series(a, table, cap=cap, normalize=True)
                raw.append(("kernel", f"a={a.real:.4f}{a.imag:+.4f}j", kernel_offset(h)))
    if "random" in tests.kinds:
        rng = np.random.default_rng(tests.seed)
        for i in range(tests.n_random):
            c = rng.standard_normal(tests.random_degree + 1) + 1j * rng.standard_normal(tests.random_degree + 1)
            c[0] = 0
            raw.append(("random", f"rand{i}", TruncatedSeries(c)))
    norms = bergman_norms([f for _, _, f in raw], spec, p, WeightModifier.plain(), cfg)
    return tuple(TestFunction(kind, label, f * math.exp(-n.log_value)) for (kind, label, f), n in zip(raw, norms))


# ---------------------------------------------------------------------------
# restricted operator norm


def _as_words(word):
    if isinstance(word, (list, tuple)):
        return [w if isinstance(w, Word) else Word.parse(w) for w in word]
    return [word if isinstance(word, Word) else Word.parse(word)]


def _apply_sum(words, g, f):
    out = None
    for w in words:
        h = apply_word(w, g, f)
        out = h if out is None else _add(out, h)
    return out


def _add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    cap = max(a.cap, b.cap)
    return a.with_cap(cap) + b.with_cap(cap)


def _max_estimate(ests, members) -> NormEstimate:
    i = int(np.argmax([e.log_value for e in ests]))
    best = ests[i]
    return NormEstimate(best.value, max(e.last_delta for e in ests), max(e.levels_used for e in ests),
                        all(e.converged for e in ests), log_value=best.log_value,
                        extra={"kind": members[i].kind, "label": members[i].label})


def test_norms(word, g: TruncatedSeries, spec: WeightSpec, p: float, tests: TestFunctionSet,
               cfg: QuadratureConfig | None = None) -> list:
    """``||L f||`` for every member ``f`` of the test set; ``word`` may be a list (summed)."""
    cfg = cfg or QuadratureConfig()
    members = tests.members(spec, p, cfg)
    words = _as_words(word)
    return bergman_norms([_apply_sum(words, g, m.f) for m in members], spec, p, WeightModifier.plain(), cfg)


test_norms.__test__ = False


def estimate_restricted_opnorm(word, g: TruncatedSeries, spec: WeightSpec, p: float,
                               tests: TestFunctionSet, cfg: QuadratureConfig | None = None) -> NormEstimate:
    """Largest ``||L f||`` over the normalized test functions (a lower bound for the restricted norm).

    ``extra`` records the kind and label of the maximizing test function.
    """
    cfg = cfg or QuadratureConfig()
    members = tests.members(spec, p, cfg)
    return _max_estimate(test_norms(word, g, spec, p, tests, cfg), members)


# ---------------------------------------------------------------------------
# reports


PRIMARY_COLUMNS = ["experiment", "weight", "p", "word", "N", "n", "s", "symbol_id",
                   "theory", "estimate", "ratio", "refinement_delta"]


@dataclass
class ExperimentReport:
    """Rows, a summary and named pass/fail gates."""

    name: str
    config: dict
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    gates: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=_row_key)

    def to_jsonl(self) -> str:
        lines = [json.dumps(_jsonable(r), sort_keys=True) for r in self.sorted_rows()]
        lines.append(json.dumps(_jsonable({"record": "summary", "experiment": self.name,
                                           "summary": self.summary, "gates": self.gates,
                                           "passed": self.passed}), sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = [_flatten(_jsonable(r)) for r in self.sorted_rows()]
        extra = sorted({k for r in rows for k in r} - set(PRIMARY_COLUMNS))
        cols = [c for c in PRIMARY_COLUMNS if any(c in r for r in rows)] + extra
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        return buf.getvalue()

    def manifest(self, seed=None, cache_hashes=None) -> dict:
        return {"experiment": self.name, "config": _jsonable(self.config), "seed": seed,
                "version": __version__, "moment_cache": cache_hashes or _table_hashes(),
                "passed": self.passed}


def _row_key(row):
    return tuple(str(row.get(k, "")) for k in ("record", "weight", "p", "word", "symbol_id", "key"))


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, name + "."))
        elif isinstance(v, list):
            out[name] = json.dumps(v)
        else:
            out[name] = v
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, WeightSpec):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "__dataclass_fields__"):
        return _jsonable(asdict(x))
    return x


_USED_TABLES: dict = {}


def _note(table):
    """Record a moment table for the manifest."""
    _USED_TABLES[f"{table.spec}:J={table.J}"] = table.content_hash()
    return table


def _table_hashes() -> dict:
    return dict(sorted(_USED_TABLES.items()))


def _band(values) -> float:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        return math.inf
    return float(v.max() / v.min())


def _rel(a, b) -> float:
    if a == b:
        return 0.0
    return abs(a / b - 1.0) if b != 0 else math.inf


def _map(fn, items, threads: int = 1):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def _symbol_id(i: int) -> str:
    return f"g{i:03d}"


# ---------------------------------------------------------------------------
# theory side


@lru_cache(maxsize=4096)
def _bloch_cached(g: TruncatedSeries, spec: WeightSpec, q: float, cfg: QuadratureConfig) -> NormEstimate:
    return bloch_seminorm(g, spec, q, cfg)


def word_theory(word: Word, g: TruncatedSeries, spec: WeightSpec, cfg: QuadratureConfig) -> float:
    """``||g||_{B^s}^N`` for words with a ``T``; ``(sup_{|z|<=1} |g|)^N`` otherwise."""
    if word.n == 0:
        return max_modulus(g, 1.0) ** word.N
    return _bloch_cached(g, spec, float(word.s), cfg).value ** word.N


def default_words() -> list:
    """One word ``M^l S^m T^n`` per count class with ``n >= 1`` and length <= 4, plus ``M``, ``S``, ``MS``."""
    out = []
    for L in range(1, 5):
        for n in range(1, L + 1):
            for ell in range(L - n, -1, -1):
                m = L - n - ell
                out.append("M" * ell + "S" * m + "T" * n)
    return out + ["M", "S", "MS"]


# ---------------------------------------------------------------------------
# Operator experiments


@dataclass(frozen=True)
class _T11Job:
    spec: WeightSpec
    p: float
    word: str
    sid: str
    g: TruncatedSeries
    tests: TestFunctionSet
    cfg: QuadratureConfig
    refine: bool
    radii: tuple


def _t11_row(job: _T11Job) -> dict:
    w = Word(job.word)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NotConverged)
        theory = word_theory(w, job.g, job.spec, job.cfg)
        est = estimate_restricted_opnorm(w, job.g, job.spec, job.p, job.tests, job.cfg)
        row = _base_row("theorem11", job.spec, job.p, w, job.sid, theory, est.value)
        row["kind"] = est.extra["kind"]
        row["label"] = est.extra["label"]
        if job.refine:
            rc = job.cfg.refined()
            th2 = word_theory(w, job.g, job.spec, rc)
            est2 = estimate_restricted_opnorm(w, job.g, job.spec, job.p, job.tests, rc)
            row["ratio_refined"] = est2.value / th2 if th2 > 0 else math.nan
            row["refinement_delta"] = _rel(row["ratio_refined"], row["ratio"])
        dil = {}
        for r in job.radii:
            dil[str(r)] = estimate_restricted_opnorm(w, dilate(job.g, r), job.spec, job.p, job.tests, job.cfg).value
        row["dilation"] = dil
        row["dilation_ok"] = all(v <= (1 + 1e-6) * est.value for v in dil.values())
    row["flags"] = sorted({str(c.message) for c in caught if issubclass(c.category, NotConverged)})
    if theory == 0:
        row["flags"].append("zero theory")
    return row


def _base_row(experiment, spec, p, word: Word, sid, theory, estimate) -> dict:
    return {"experiment": experiment, "weight": str(spec), "p": p, "word": word.letters,
            "N": word.N, "n": word.n, "s": (word.s if word.n else None), "symbol_id": sid,
            "theory": theory, "estimate": estimate,
            "ratio": estimate / theory if theory > 0 else math.nan, "refinement_delta": None}


def theorem11_experiment(spec: WeightSpec, p: float, words: list, family: SymbolFamily,
                         cfg: QuadratureConfig | None = None, tests: TestFunctionSet | None = None,
                         *, refine: bool = True, dilation_radii=(0.9, 0.99), band_limit: float = 50.0,
                         drift_limit: float = 0.05, threads: int = 1) -> ExperimentReport:
    """Restricted-norm estimates of ``L_g`` against ``||g||^N`` for every (word, symbol) pair."""
    t0 = time.perf_counter()
    cfg = cfg or QuadratureConfig()
    tests = tests or TestFunctionSet()
    words = [Word.parse(w).letters for w in words]
    for w in words:
        if len(w) > 5:
            raise ValueError(f"word {w} is longer than 5 letters")
    syms = family.symbols()
    jobs = [_T11Job(spec, float(p), w, _symbol_id(i), g, tests, cfg, refine, tuple(dilation_radii))
            for w in words for i, g in enumerate(syms)]
    rows = _map(_t11_row, jobs, threads)
    spot = _homogeneity_row("theorem11", lambda g: (word_theory(Word(words[0]), g, spec, cfg),
                                                    estimate_restricted_opnorm(words[0], g, spec, p, tests, cfg).value),
                            syms[0], Word(words[0]).N, spec, p, words[0])
    report = ExperimentReport("theorem11", {"weight": str(spec), "p": p, "words": words, "family": family,
                                            "tests": tests, "cfg": cfg, "dilation_radii": list(dilation_radii)},
                              rows + [spot])
    cells = {}
    for r in rows:
        cells.setdefault(r["word"], []).append(r["ratio"])
    bands = {w: _band(v) for w, v in cells.items()}
    drifts = [r["refinement_delta"] for r in rows if r["refinement_delta"] is not None]
    ratios = [r["ratio"] for r in rows]
    report.summary = {"min_ratio": float(np.nanmin(ratios)), "max_ratio": float(np.nanmax(ratios)),
                      "stability": max(drifts) if drifts else None, "cell_bands": bands,
                      "cell_max": {w: float(max(v)) for w, v in cells.items()},
                      "homogeneity_deviation": spot["deviation"]}
    report.gates = {"positive": all(0 < x < math.inf for x in ratios),
                    "band": max(bands.values()) <= band_limit,
                    "homogeneity": spot["deviation"] <= 1e-11,
                    "dilation": all(r["dilation_ok"] for r in rows)}
    if refine:
        report.gates["drift"] = max(drifts) < drift_limit
    report.seconds = time.perf_counter() - t0
    return report


def _homogeneity_row(experiment, fn, g, N, spec, p, word, lam: complex = LAMBDA_SPOT) -> dict:
    """Theory and estimate for ``g`` and ``lam g``; both must scale by ``|lam|^N``."""
    th, es = fn(g)
    th2, es2 = fn(g * lam)
    f = abs(lam) ** N
    dev = max(_rel(th2, f * th) if th else abs(th2), _rel(es2, f * es) if es else abs(es2))
    return {"record": "homogeneity", "experiment": experiment, "weight": str(spec), "p": p,
            "word": word, "N": N, "symbol_id": "g000", "lambda": lam, "theory": th2, "estimate": es2,
            "ratio": es2 / th2 if th2 else math.nan, "theory_base": th, "estimate_base": es,
            "deviation": dev}


def radicality_experiment(spec: WeightSpec, family: SymbolFamily, pairs, cfg: QuadratureConfig | None = None,
                          *, drift_limit: float = 0.05, threads: int = 1) -> ExperimentReport:
    """Family maxima of ``||g||_{B^{q1}} / ||g||_{B^{q2}}`` for ``q1 < q2``."""
    t0 = time.perf_counter()
    cfg = cfg or QuadratureConfig()
    pairs = [(float(a), float(b)) for a, b in pairs]
    for a, b in pairs:
        if not (1 <= a < b):
            raise ValueError(f"need 1 <= q1 < q2, got ({a}, {b})")
    syms = family.symbols()
    qs = sorted({q for pr in pairs for q in pr})
    rc = cfg.refined()
    vals = _map(_bloch_job, [(g, spec, q, c) for g in syms for q in qs for c in (cfg, rc)], threads)
    table = {}
    it = iter(vals)
    for i in range(len(syms)):
        for q in qs:
            table[(i, q, 0)] = next(it)
            table[(i, q, 1)] = next(it)
    rows = []
    for a, b in pairs:
        for i in range(len(syms)):
            num, den = table[(i, a, 0)], table[(i, b, 0)]
            ratio = num / den
            ratio2 = table[(i, a, 1)] / table[(i, b, 1)]
            rows.append({"experiment": "radicality", "weight": str(spec), "word": f"B{a:g}/B{b:g}",
                         "symbol_id": _symbol_id(i), "q1": a, "q2": b, "theory": den, "estimate": num,
                         "ratio": ratio, "ratio_refined": ratio2, "refinement_delta": _rel(ratio2, ratio),
                         "N": 1})
    spot = _homogeneity_row("radicality", lambda g: (bloch_seminorm(g, spec, pairs[0][1], cfg).value,
                                                     bloch_seminorm(g, spec, pairs[0][0], cfg).value),
                            syms[0], 1, spec, None, f"B{pairs[0][0]:g}/B{pairs[0][1]:g}")
    summary, drift_ok, finite = {}, True, True
    for a, b in pairs:
        sel = [r for r in rows if r["q1"] == a and r["q2"] == b]
        mx = max(r["ratio"] for r in sel)
        mx2 = max(r["ratio_refined"] for r in sel)
        key = f"({a:g},{b:g})"
        summary[key] = {"max": mx, "max_refined": mx2, "drift": _rel(mx2, mx),
                        "min": min(r["ratio"] for r in sel)}
        drift_ok &= _rel(mx2, mx) < drift_limit
        finite &= math.isfinite(mx) and mx > 0
    chain = _chain_check(rows, pairs)
    summary["chain_violations"] = chain
    summary["homogeneity_deviation"] = spot["deviation"]
    report = ExperimentReport("radicality", {"weight": str(spec), "pairs": pairs, "family": family, "cfg": cfg},
                              rows + [spot], summary)
    report.gates = {"finite": finite, "drift": drift_ok, "chain": chain == 0,
                    "homogeneity": spot["deviation"] <= 1e-11}
    report.seconds = time.perf_counter() - t0
    return report


def _bloch_job(args):
    g, spec, q, cfg = args
    return _bloch_cached(g, spec, q, cfg).value


def _chain_check(rows, pairs, tol=1e-12) -> int:
    """Per-symbol ``ratio(a, c) <= ratio(a, b) ratio(b, c) (1 + tol)`` wherever all three pairs are present."""
    by = {(r["q1"], r["q2"], r["symbol_id"]): r["ratio"] for r in rows}
    bad = 0
    ps = set(pairs)
    for a, b in ps:
        for b2, c in ps:
            if b2 == b and (a, c) in ps:
                for (x, y, sid), v in by.items():
                    if (x, y) == (a, c):
                        if v > by[(a, b, sid)] * by[(b, c, sid)] * (1 + tol):
                            bad += 1
    return bad


def _validate_combo(L0: Word, rest: list):
    if L0.n == 0:
        raise ValueError(f"{L0} needs a T letter")
    for w in rest:
        if w.n == 0:
            raise ValueError(f"{w} needs a T letter")
        if not (w.N < L0.N and w.s < L0.s):
            raise ValueError(f"{w} is not dominated by {L0}: need N_j < {L0.N} and s_j < {L0.s:g}")


def corollary13_experiment(spec: WeightSpec, p: float, combos, family: SymbolFamily,
                           cfg: QuadratureConfig | None = None, tests: TestFunctionSet | None = None,
                           *, drift_limit: float = 0.05, threads: int = 1) -> ExperimentReport:
    """Compare ``L_0 + sum_j L_j`` with ``L_0`` alone; ``combos`` is a list of ``(L0, [L1, ...])``."""
    t0 = time.perf_counter()
    cfg = cfg or QuadratureConfig()
    tests = tests or TestFunctionSet()
    parsed = []
    for L0, rest in combos:
        L0 = Word.parse(L0) if isinstance(L0, str) else L0
        rest = [Word.parse(w) if isinstance(w, str) else w for w in rest]
        _validate_combo(L0, rest)
        parsed.append((L0, rest))
    syms = family.symbols()
    jobs = [(spec, float(p), L0.letters, tuple(w.letters for w in rest), _symbol_id(i), g, tests, cfg)
            for L0, rest in parsed for i, g in enumerate(syms)]
    rows = _map(_c13_row, jobs, threads)
    L0, rest = parsed[0]

    def spot_fn(g):
        return (estimate_restricted_opnorm(L0, g, spec, p, tests, cfg).value,
                estimate_restricted_opnorm([L0] + rest, g, spec, p, tests, cfg).value)

    spot = _homogeneity_row("corollary13", spot_fn, syms[0], L0.N, spec, p, _combo_name(L0, rest))
    # the lower-order terms are not N_0-homogeneous, so only the L_0 column is checked
    spot["deviation"] = _rel(spot["theory"], abs(LAMBDA_SPOT) ** L0.N * spot["theory_base"])
    summary = {}
    for L0, rest in parsed:
        name = _combo_name(L0, rest)
        sel = [r for r in rows if r["word"] == name]
        up = [r["ratio"] for r in sel]
        summary[name] = {"max_ratio": max(up), "min_ratio": min(up),
                         "max_inverse": max(1 / x for x in up), "drift": max(r["refinement_delta"] for r in sel)}
    summary["homogeneity_deviation"] = spot["deviation"]
    report = ExperimentReport("corollary13", {"weight": str(spec), "p": p, "combos": [_combo_name(a, b) for a, b in parsed],
                                              "family": family, "tests": tests, "cfg": cfg}, rows + [spot], summary)
    report.gates = {"finite": all(0 < r["ratio"] < math.inf for r in rows),
                    "drift": all(r["refinement_delta"] < drift_limit for r in rows),
                    "triangle": all(r["triangle_ok"] for r in rows),
                    "homogeneity": spot["deviation"] <= 1e-11}
    report.seconds = time.perf_counter() - t0
    return report


def _combo_name(L0: Word, rest) -> str:
    return "+".join([L0.letters] + [w.letters for w in rest])


def _c13_row(job) -> dict:
    spec, p, L0, rest, sid, g, tests, cfg = job
    words = [Word(L0)] + [Word(w) for w in rest]
    out = {}
    for tag, c in (("base", cfg), ("refined", cfg.refined())):
        members = tests.members(spec, p, c)
        n0 = test_norms(words[0], g, spec, p, tests, c)
        ns = test_norms(words, g, spec, p, tests, c)
        nj = [test_norms(w, g, spec, p, tests, c) for w in words[1:]]
        e0 = _max_estimate(n0, members)
        es = _max_estimate(ns, members)
        tri = True
        if p >= 1:
            for i in range(len(members)):
                lower = n0[i].value - sum(x[i].value for x in nj)
                tri &= ns[i].value >= lower * (1 - 1e-9) - 1e-300
        out[tag] = (e0.value, es.value, tri)
    th, es, tri = out["base"]
    th2, es2, tri2 = out["refined"]
    row = _base_row("corollary13", spec, p, words[0], sid, th, es)
    row["word"] = _combo_name(words[0], words[1:])
    row["ratio_refined"] = es2 / th2
    row["refinement_delta"] = _rel(row["ratio_refined"], row["ratio"])
    row["triangle_ok"] = tri and tri2
    return row


def prop61_experiment(spec: WeightSpec, p: float, sigmas, ells, family: SymbolFamily,
                      cfg: QuadratureConfig | None = None, tests: TestFunctionSet | None = None,
                      *, drift_limit: float = 0.05, threads: int = 1) -> ExperimentReport:
    """``Q f = |g|^{sigma l} T_g^l f`` against ``||g||_{B^{sigma+1}}^{(sigma+1) l}``, plus the ``S^m T^n`` bridge."""
    t0 = time.perf_counter()
    cfg = cfg or QuadratureConfig()
    tests = tests or TestFunctionSet()
    sig = [Fraction(s).limit_denominator(1000) if not isinstance(s, Fraction) else s for s in sigmas]
    syms = family.symbols()
    jobs = [(spec, float(p), s, int(ell), _symbol_id(i), g, tests, cfg)
            for s in sig for ell in ells for i, g in enumerate(syms)]
    rows = _map(_p61_row, jobs, threads)
    s0, l0 = sig[0], int(ells[0])
    spot = _homogeneity_row("prop61", lambda g: (_q_theory(g, spec, s0, l0, cfg), _q_estimate(g, spec, p, s0, l0, tests, cfg)),
                            syms[0], int((s0 + 1) * l0) if ((s0 + 1) * l0).denominator == 1 else float((s0 + 1) * l0),
                            spec, p, f"Q[{s0},{l0}]")
    summary = {}
    gates = {"finite": True, "drift": True}
    for fam in ("upper", "lower", "bridge"):
        vals = [r[fam] for r in rows if r.get(fam) is not None]
        drifts = [r[f"{fam}_drift"] for r in rows if r.get(fam) is not None]
        if not vals:
            continue
        summary[fam] = {"max": max(vals), "min": min(vals), "band": _band(vals), "drift": max(drifts)}
        gates["finite"] &= all(0 < v < math.inf for v in vals)
        gates["drift"] &= max(drifts) < drift_limit
    summary["homogeneity_deviation"] = spot["deviation"]
    gates["homogeneity"] = spot["deviation"] <= 1e-11
    report = ExperimentReport("prop61", {"weight": str(spec), "p": p, "sigmas": [str(s) for s in sig],
                                         "ells": list(ells), "family": family, "tests": tests, "cfg": cfg},
                              rows + [spot], summary, gates)
    report.seconds = time.perf_counter() - t0
    return report


def _q_theory(g, spec, sigma: Fraction, ell: int, cfg) -> float:
    return _bloch_cached(g, spec, float(sigma + 1), cfg).value ** float((sigma + 1) * ell)


def _q_estimate(g, spec, p, sigma: Fraction, ell: int, tests, cfg) -> float:
    members = tests.members(spec, p, cfg)
    hs = []
    for m in members:
        h = m.f
        for _ in range(ell):
            h = apply_letter("T", g, h)
        hs.append(h)
    ests = q_functionals_from_h(hs, g, spec, float(sigma) * ell, p, cfg)
    return max(e.value for e in ests)


def _p61_row(job) -> dict:
    spec, p, sigma, ell, sid, g, tests, cfg = job
    res = {}
    m = sigma * ell
    bridge_word = "S" * int(m) + "T" * ell if m.denominator == 1 else None
    for tag, c in (("base", cfg), ("refined", cfg.refined())):
        th = _q_theory(g, spec, sigma, ell, c)
        es = _q_estimate(g, spec, p, sigma, ell, tests, c)
        br = estimate_restricted_opnorm(bridge_word, g, spec, p, tests, c).value if bridge_word else None
        res[tag] = (th, es, br)
    (th, es, br), (th2, es2, br2) = res["base"], res["refined"]
    row = {"experiment": "prop61", "weight": str(spec), "p": p, "word": f"Q[{sigma},{ell}]",
           "sigma": str(sigma), "ell": ell, "N": float((sigma + 1) * ell), "symbol_id": sid,
           "theory": th, "estimate": es, "ratio": es / th if th > 0 else math.nan,
           "bridge_word": bridge_word}
    if th == 0 or es == 0:
        row["flags"] = ["degenerate symbol"]
        return row
    row["upper"] = es / th
    row["lower"] = th / es
    row["upper_drift"] = _rel(es2 / th2, row["upper"])
    row["lower_drift"] = row["upper_drift"]
    row["refinement_delta"] = row["upper_drift"]
    if br is not None:
        row["bridge_estimate"] = br
        row["bridge"] = es / br
        row["bridge_drift"] = _rel(es2 / br2, row["bridge"])
    return row


# ---------------------------------------------------------------------------
# acceptance-level experiments on the other modules


def identities_experiment(count: int = 50, seed: int = 11, max_degree: int = 8, m_max: int = 4,
                          tol: float = 1e-13) -> ExperimentReport:
    """``M = S + T + f(0) g(0)`` and ``S^m T = T_{g^{m+1}} / (m+1)`` on random pairs."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        dg, df = (int(x) for x in rng.integers(1, max_degree + 1, size=2))
        g = TruncatedSeries(rng.standard_normal(dg + 1) + 1j * rng.standard_normal(dg + 1))
        f = TruncatedSeries(rng.standard_normal(df + 1) + 1j * rng.standard_normal(df + 1))
        M = apply_letter("M", g, f)
        S = apply_letter("S", g, f)
        T = apply_letter("T", g, f)
        lhs = M - S - T - f.coeffs[0] * g.coeffs[0]
        scale = max(np.max(np.abs(M.coeffs)), np.max(np.abs(S.coeffs)), np.max(np.abs(T.coeffs)))
        row = {"experiment": "identities", "symbol_id": _symbol_id(i), "key": "MST",
               "residual": float(np.max(np.abs(lhs.coeffs)) / scale)}
        worst = 0.0
        for m in range(m_max + 1):
            a = apply_word("S" * m + "T", g, f)
            b = apply_letter("T", power(g, m + 1), f) * (1.0 / (m + 1))
            cap = max(a.cap, b.cap)
            d = a.with_cap(cap) - b.with_cap(cap)
            sc = max(np.max(np.abs(a.coeffs)), np.max(np.abs(b.coeffs)))
            worst = max(worst, float(np.max(np.abs(d.coeffs)) / sc))
        row["power_residual"] = worst
        rows.append(row)
    rep = ExperimentReport("identities", {"count": count, "seed": seed, "max_degree": max_degree, "m_max": m_max}, rows)
    rep.summary = {"max_residual": max(r["residual"] for r in rows),
                   "max_power_residual": max(r["power_residual"] for r in rows)}
    rep.gates = {"MST": rep.summary["max_residual"] <= tol, "power": rep.summary["max_power_residual"] <= tol}
    rep.seconds = time.perf_counter() - t0
    return rep


def decomposition_experiment(max_len: int = 5, n_inputs: int = 10, seed: int = 3,
                             tol: float = 1e-11) -> ExperimentReport:
    """Integer canonical forms for every word with a ``T`` letter, checked on fresh inputs."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    rows = []
    for w in all_words(max_len):
        if w.n == 0:
            continue
        form = canonical_decomposition_H0(w)
        worst = 0.0
        for _ in range(n_inputs):
            dg, df = (int(x) for x in rng.integers(1, 6, size=2))
            g = TruncatedSeries(rng.standard_normal(dg + 1) + 1j * rng.standard_normal(dg + 1))
            c = rng.standard_normal(df + 1) + 1j * rng.standard_normal(df + 1)
            c[0] = 0
            worst = max(worst, reconstruction_error(form, g, TruncatedSeries(c)))
        rows.append({"experiment": "decomposition", "word": w.letters, "N": w.N, "n": w.n,
                     "c": form.c, "exact_residual": form.residual, "reconstruction": worst})
    c1 = {r["word"]: (r["c"][0] if r["c"] else 0) for r in rows}
    rep = ExperimentReport("decomposition", {"max_len": max_len, "n_inputs": n_inputs, "seed": seed}, rows)
    rep.summary = {"words": len(rows), "max_reconstruction": max(r["reconstruction"] for r in rows),
                   "c1_TS": c1.get("TS"), "c1_MT": c1.get("MT")}
    rep.gates = {"exact": all(r["exact_residual"] == 0 for r in rows),
                 "reconstruction": rep.summary["max_reconstruction"] <= tol,
                 "spot_TS": c1.get("TS") == -1, "spot_MT": c1.get("MT") == 1}
    rep.seconds = time.perf_counter() - t0
    return rep


def reproducing_experiment(spec: WeightSpec, a_list=(0.0, 0.3, 0.6, 0.8), kmax: int = 20, J: int = 255,
                           tol: float = 1e-8, moment_tol: float = 1e-11) -> ExperimentReport:
    """Reproducing-property residuals and moment stability under ``J -> 2J``."""
    t0 = time.perf_counter()
    table = _note(moments(spec, J))
    table2 = _note(moments(spec, 2 * J + 1))
    drift = float(np.max(np.abs(np.expm1(table2.log_alpha[: J + 1] - table.log_alpha))))
    rows = []
    for a in a_list:
        for k in range(kmax + 1):
            res = verify_reproducing(TruncatedSeries.monomial(k), a, spec, table)
            rows.append({"experiment": "reproducing", "weight": str(spec), "key": f"a={a:g},k={k:02d}",
                         "a": a, "k": k, **res})
    rep = ExperimentReport("reproducing", {"weight": str(spec), "a": list(a_list), "kmax": kmax, "J": J}, rows)
    rep.summary = {"max_pairing": max(r["pairing"] for r in rows),
                   "max_quadrature": max(r["quadrature"] for r in rows), "moment_drift": drift,
                   "moment_hash": table.content_hash()}
    rep.gates = {"pairing": rep.summary["max_pairing"] <= 1e-14,
                 "quadrature": rep.summary["max_quadrature"] <= tol, "moments": drift <= moment_tol}
    rep.seconds = time.perf_counter() - t0
    return rep


def _offdiag_points(n_angles: int, n_radii: int) -> list:
    """Points on ``|z| = 0.5`` over angles in ``[0, 3]`` plus real points in ``[0.2, 0.85]``."""
    ring = [0.5 * complex(math.cos(t), math.sin(t)) for t in np.linspace(0.0, 3.0, n_angles)]
    return ring + [complex(r) for r in np.linspace(0.2, 0.85, n_radii)]


def kernel_estimates_experiment(specs, ps=(1.0, 2.0, 4.0), a_grid=None, cfg: QuadratureConfig | None = None,
                                band_limit: float = 5.0, stability: float = 0.01,
                                eta_stability: float = 0.25) -> ExperimentReport:
    """Diagonal and norm ratios of the kernel over a radius grid, with truncation doubling."""
    t0 = time.perf_counter()
    a_grid = list(np.linspace(0.0, 0.9, 10) if a_grid is None else a_grid)
    rows = []
    summary = {}
    gates = {"band": True, "stability": True}
    for spec in specs:
        table = moments(spec, 127)
        dvals = []
        for a in a_grid:
            cap, table = required_cap(a, spec, table=table)
            t1 = moments(spec, cap, base=table)
            t2 = moments(spec, 2 * cap + 1, base=table)
            _note(t1)
            _note(t2)
            d1 = diagonal_ratio(a, spec, t1)
            d2 = diagonal_ratio(a, spec, t2)
            dvals.append(d1)
            rows.append({"experiment": "kernel-estimates", "weight": str(spec), "p": None, "key": f"diag,a={a:.3f}",
                         "a": a, "cap": cap, "quantity": "diagonal", "ratio": d1, "ratio_doubled": d2,
                         "refinement_delta": _rel(d2, d1)})
            table = t2
        cells = {"diagonal": dvals}
        for p in ps:
            vals = []
            for a in a_grid:
                v1 = kernel_norm_ratio(a, spec, p, table, cfg)
                v2 = kernel_norm_ratio(a, spec, p, table, cfg, doubled=True)
                vals.append(v1)
                rows.append({"experiment": "kernel-estimates", "weight": str(spec), "p": p, "key": f"norm,a={a:.3f}",
                             "a": a, "quantity": "norm", "ratio": v1, "ratio_doubled": v2,
                             "refinement_delta": _rel(v2, v1)})
            cells[f"p={p:g}"] = vals
        prof = offdiag_profile(0.5, _offdiag_points(9, 4), spec, table)
        prof2 = offdiag_profile(0.5, _offdiag_points(17, 8), spec, table)
        summary[str(spec)] = {k: {"band": _band(v), "min": min(v), "max": max(v)} for k, v in cells.items()}
        summary[str(spec)]["eta"] = prof.eta
        summary[str(spec)]["eta_doubled"] = prof2.eta
        gates["band"] &= all(_band(v) <= band_limit for v in cells.values())
    gates["stability"] = all(r["refinement_delta"] <= stability for r in rows)
    gates["eta_positive"] = all((s.get("eta") or 0) > 0 for s in summary.values())
    gates["eta_stable"] = all(s["eta"] is not None and s["eta_doubled"] is not None
                              and _rel(s["eta_doubled"], s["eta"]) <= eta_stability for s in summary.values())
    rep = ExperimentReport("kernel-estimates", {"weights": [str(s) for s in specs], "p": list(ps),
                                                "a_grid": a_grid}, rows, summary, gates)
    rep.seconds = time.perf_counter() - t0
    return rep


def littlewood_paley_experiment(specs, ps, family: SymbolFamily, cfg: QuadratureConfig | None = None,
                                band_limit: float = 20.0, drift_limit: float = 0.05) -> ExperimentReport:
    """``(|f(0)|^p + ||f'||^p_LP) / ||f||^p`` over a symbol family."""
    t0 = time.perf_counter()
    cfg = cfg or QuadratureConfig()
    syms = family.symbols()
    rows, summary = [], {}
    gates = {"band": True, "drift": True}
    for spec in specs:
        for p in ps:
            base = _lp_parts(syms, spec, p, cfg)
            ref = _lp_parts(syms, spec, p, cfg.refined())
            vals = []
            for i, ((num, den), (num2, den2)) in enumerate(zip(base, ref)):
                ratio = (num / den) ** p
                ratio2 = (num2 / den2) ** p
                vals.append(ratio)
                rows.append({"experiment": "littlewood-paley", "weight": str(spec), "p": p, "symbol_id": _symbol_id(i),
                             "theory": den, "estimate": num, "ratio": ratio, "ratio_refined": ratio2,
                             "refinement_delta": _rel(ratio2, ratio), "N": 1})
            cell = f"{spec},p={p:g}"
            drift = max(r["refinement_delta"] for r in rows[-len(syms):])
            summary[cell] = {"band": _band(vals), "min": min(vals), "max": max(vals), "drift": drift}
            gates["band"] &= _band(vals) <= band_limit
            gates["drift"] &= drift < drift_limit
    lam_parts = _lp_parts([syms[0] * LAMBDA_SPOT], specs[0], ps[0], cfg)[0]
    base_parts = _lp_parts([syms[0]], specs[0], ps[0], cfg)[0]
    dev = max(_rel(lam_parts[0], abs(LAMBDA_SPOT) * base_parts[0]), _rel(lam_parts[1], abs(LAMBDA_SPOT) * base_parts[1]))
    rows.append({"record": "homogeneity", "experiment": "littlewood-paley", "weight": str(specs[0]), "p": ps[0],
                 "symbol_id": "g000", "lambda": LAMBDA_SPOT, "theory": lam_parts[1], "estimate": lam_parts[0],
                 "ratio": (lam_parts[0] / lam_parts[1]) ** ps[0], "deviation": dev, "N": 1})
    summary["homogeneity_deviation"] = dev
    gates["homogeneity"] = dev <= 1e-11
    rep = ExperimentReport("littlewood-paley", {"weights": [str(s) for s in specs], "p": list(ps),
                                                "family": family, "cfg": cfg}, rows, summary, gates)
    rep.seconds = time.perf_counter() - t0
    return rep


def _lp_parts(fs, spec, p, cfg):
    """``((|f(0)|^p + ||f'||^p_LP)^{1/p}, ||f||)`` for each ``f``."""
    den = bergman_norms(fs, spec, p, WeightModifier.plain(), cfg)
    num = bergman_norms([derivative(f) for f in fs], spec, p, WeightModifier.littlewood_paley(p), cfg)
    out = []
    for f, d, n in zip(fs, den, num):
        terms = [p * n.log_value]
        if f.coeffs[0] != 0:
            terms.append(p * math.log(abs(f.coeffs[0])))
        out.append((math.exp(float(np.logaddexp.reduce(terms)) / p), d.value))
    return out


def weights_experiment(specs, fd_tol: float = 1e-6) -> ExperimentReport:
    """Trend self-checks plus finite-difference checks of the closed-form derivatives."""
    t0 = time.perf_counter()
    rows = []
    gates = {}
    for spec in specs:
        rep = self_check(spec)
        rows.append({"experiment": "weights", "weight": str(spec), "key": "self_check", "passed": rep.passed,
                     "failures": rep.failures(), "eta": rep.eta, "r_cut": rep.r_cut})
        fd = derivative_fd_errors(spec)
        rows.append({"experiment": "weights", "weight": str(spec), "key": "finite_differences", **fd})
        gates[f"{spec}:trends"] = rep.passed
        gates[f"{spec}:derivatives"] = max(fd["phi_prime"], fd["phi_second"]) <= fd_tol
    out = ExperimentReport("weights", {"weights": [str(s) for s in specs]}, rows, {}, gates)
    out.summary = {"max_fd_error": max(max(r["phi_prime"], r["phi_second"]) for r in rows if "phi_prime" in r)}
    out.seconds = time.perf_counter() - t0
    return out


def derivative_fd_errors(spec: WeightSpec, radii=(0.1, 0.3, 0.5, 0.7, 0.8)) -> dict:
    """Relative errors of ``phi'`` and ``phi''`` against 5-point differences of ``log phi`` and ``log phi'``.

    ``(log phi)' = phi'/phi`` and ``(log phi')' = phi''/phi'``; differencing
    the logs keeps every quantity in range for the iterated levels.
    """
    errs1, errs2 = [], []
    for r in radii:
        h = 1e-3 * (1 - r)
        x = r + h * np.array([-2.0, -1.0, 1.0, 2.0])
        le, l1, l2, _ = log_derivatives(spec, np.concatenate([x, [r]]))
        d_le = (le[0] - 8 * le[1] + 8 * le[2] - le[3]) / (12 * h)
        d_l1 = (l1[0] - 8 * l1[1] + 8 * l1[2] - l1[3]) / (12 * h)
        errs1.append(abs(d_le / math.exp(l1[4] - le[4]) - 1))
        errs2.append(abs(d_l1 / math.exp(l2[4] - l1[4]) - 1))
    return {"phi_prime": float(max(errs1)), "phi_second": float(max(errs2)), "radii": list(radii)}


# ---------------------------------------------------------------------------
# registry used by the command line


DEFAULT_WEIGHTS = ("w0:1:1", "w0:2:1", "w1:1:1")


def _family(args, default_count: int) -> SymbolFamily:
    return SymbolFamily(args.seed, args.count or default_count, args.degree)


def _run_theorem11(args):
    spec = parse_weight(args.weight)
    return theorem11_experiment(spec, args.p, args.words or default_words(),
                                _family(args, 30), _cfg(args),
                                threads=args.threads)


def _run_radicality(args):
    return radicality_experiment(parse_weight(args.weight), _family(args, 50),
                                 [(1, 2), (1.5, 3), (2, 4)], _cfg(args), threads=args.threads)


def _run_corollary13(args):
    return corollary13_experiment(parse_weight(args.weight), args.p, [("SST", ["T"]), ("STT", ["T"]), ("SSTT", ["STT", "T"])],
                                  _family(args, 30), _cfg(args), threads=args.threads)


def _run_prop61(args):
    return prop61_experiment(parse_weight(args.weight), args.p, [Fraction(1, 2), Fraction(1), Fraction(2)], [1, 2],
                             _family(args, 30), _cfg(args), threads=args.threads)


def _run_identities(args):
    return identities_experiment(seed=args.seed)


def _run_decomposition(args):
    return decomposition_experiment(seed=args.seed)


def _run_reproducing(args):
    return reproducing_experiment(parse_weight(args.weight))


def _run_kernel_estimates(args):
    return kernel_estimates_experiment([parse_weight(args.weight)], cfg=_cfg(args))


def _run_littlewood_paley(args):
    return littlewood_paley_experiment([parse_weight(args.weight)], [args.p],
                                       _family(args, 50), _cfg(args))


def _run_weights(args):
    return weights_experiment([parse_weight(args.weight)])


def _cfg(args) -> QuadratureConfig:
    return QuadratureConfig(radial_rel_tol=args.tol) if getattr(args, "tol", None) else QuadratureConfig()


EXPERIMENTS = {
    "theorem11": _run_theorem11,
    "radicality": _run_radicality,
    "corollary13": _run_corollary13,
    "prop61": _run_prop61,
    "identities": _run_identities,
    "decomposition": _run_decomposition,
    "reproducing": _run_reproducing,
    "kernel-estimates": _run_kernel_estimates,
    "littlewood-paley": _run_littlewood_paley,
    "weights": _run_weights,
}


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(_jsonable(config), sort_keys=True).encode()).hexdigest()[:16]


__all__ = [
    "SymbolFamily", "TestFunctionSet", "TestFunction", "ExperimentReport", "estimate_restricted_opnorm",
    "test_norms", "word_theory", "default_words", "theorem11_experiment", "radicality_experiment",
    "corollary13_experiment", "prop61_experiment", "identities_experiment", "decomposition_experiment",
    "reproducing_experiment", "kernel_estimates_experiment", "littlewood_paley_experiment",
    "weights_experiment", "derivative_fd_errors", "EXPERIMENTS", "LAMBDA_SPOT",
]
