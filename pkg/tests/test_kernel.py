import math

import numpy as np
import pytest

from conftest import random_series
from oracles import ALPHA_W011, ALPHA_W021, ALPHA_W111
from paraprod.kernel import (MomentCache, MomentTable, TailTooLarge, diagonal_ratio, fit_eta, kernel_norm_ratio,
                             kernel_offset, kernel_series, log_abs_eval, moments, offdiag_profile, parseval_norm,
                             required_cap, verify_reproducing)
from paraprod.norms import bergman_norm
from paraprod.series import TruncatedSeries
from paraprod.weights import parse_weight

W011, W111, W021 = parse_weight("w0:1:1"), parse_weight("w1:1:1"), parse_weight("w0:2:1")


@pytest.fixture(scope="module")
def table():
    return moments(W011, 255)


class TestMoments:
    @pytest.mark.parametrize("spec,ref", [(W011, ALPHA_W011), (W111, ALPHA_W111), (W021, ALPHA_W021)])
    def test_oracle(self, spec, ref):
        t = moments(spec, max(ref))
        for j, a in ref.items():
            assert math.isclose(t.alpha(j), a, rel_tol=1e-11)

    def test_decreasing_and_radius_trend(self, table):
        assert np.all(np.diff(table.log_alpha) < 0)
        # alpha_j^{-1/j} decreases towards 1 from above
        trend = table.radius_trend()[10:]
        assert np.all(np.diff(trend) < 0) and trend[-1] > 1

    def test_prefix_stable_under_doubling(self, table):
        big = table.extend(2 * table.J + 1)
        assert big.J == 511
        rel = np.abs(np.expm1(big.log_alpha[: table.J + 1] - table.log_alpha))
        assert np.max(rel) <= 1e-11

    def test_agrees_with_quadrature_norm(self, table):
        for j in (0, 7, 40):
            assert math.isclose(bergman_norm(TruncatedSeries.monomial(j), W011, 2).value ** 2,
                                table.alpha(j), rel_tol=1e-10)

    def test_json_roundtrip(self, table):
        back = MomentTable.from_json(table.to_json())
        assert np.array_equal(back.log_alpha, table.log_alpha) and back.spec == table.spec
        assert back.content_hash() == table.content_hash()

    def test_cache(self, tmp_path):
        cache = MomentCache(str(tmp_path))
        t1 = cache.get(W011, 10)
        t2 = cache.get(W011, 5)
        assert t2.J == 5 and np.array_equal(t2.log_alpha, t1.log_alpha[:6])
        assert len(list(tmp_path.iterdir())) == 1
        assert cache.hashes

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            moments(W011, -1)


class TestKernel:
    def test_origin(self, table):
        h = kernel_series(0, table, cap=10)
        assert math.isclose(h.series.coeffs[0].real, 1 / ALPHA_W011[0], rel_tol=1e-11)
        assert np.all(h.series.coeffs[1:] == 0)

    def test_conjugate_symmetry(self, table):
        a, b = 0.3 + 0.2j, -0.1 + 0.5j
        ka = kernel_series(a, table, cap=table.J).series
        kb = kernel_series(b, table, cap=table.J).series
        assert math.isclose(abs(ka(b) - np.conj(kb(a))), 0.0, abs_tol=1e-9 * abs(ka(b)))

    def test_rotation(self, table):
        a, u = 0.5, np.exp(1.1j)
        k1 = kernel_series(a, table).series
        k2 = kernel_series(u * a, table).series
        assert math.isclose(abs(k1(0.3)), abs(k2(u * 0.3)), rel_tol=1e-10)

    def test_parseval_norm_is_diagonal_value(self, table):
        a = 0.6
        h = kernel_series(a, table)
        assert math.isclose(parseval_norm(h.series, table) ** 2, h.series(a).real, rel_tol=1e-10)

    def test_cauchy_schwarz(self, table):
        a, z = 0.4, 0.5j
        ka = kernel_series(a, table).series
        kz = kernel_series(z, table).series
        assert abs(ka(z)) ** 2 <= ka(a).real * kz(z).real

    def test_tail_errors(self, table):
        with pytest.raises(TailTooLarge):
            kernel_series(0.99, table, cap=20)
        with pytest.raises(ValueError):
            kernel_series(1.0, table)
        with pytest.raises(ValueError):
            kernel_series(0.1, table, cap=table.J + 1)

    def test_required_cap_grows(self):
        c1, _ = required_cap(0.3, W011)
        c2, _ = required_cap(0.9, W011)
        assert c1 <= c2

    def test_normalized_series(self, table):
        h = kernel_series(0.7, table, normalize=True)
        plain = kernel_series(0.7, table)
        assert np.allclose(h.series.coeffs * math.exp(h.log_scale), plain.series.coeffs, rtol=1e-12)
        off = kernel_offset(h)
        assert off.coeffs[0] == 0 and off.coeffs[1] == h.series.coeffs[0]

    def test_log_abs_eval(self):
        c = np.array([1, 2, 3j])
        assert math.isclose(log_abs_eval(c, 0.5), math.log(abs(1 + 1 + 0.75j)), rel_tol=1e-14)


class TestReproducing:
    @pytest.mark.parametrize("a", [0, 0.3, 0.6, 0.8])
    def test_monomials(self, a, table):
        for k in (0, 1, 5, 20):
            res = verify_reproducing(TruncatedSeries.monomial(k), a, W011, table)
            assert res["pairing"] <= 1e-12 and res["quadrature"] <= 1e-8

    def test_random_polynomial(self, table, rng):
        f = random_series(rng, 6)
        assert verify_reproducing(f, 0.5 - 0.3j, W011, table)["residual"] <= 1e-8


class TestEstimates:
    def test_origin_closed_forms(self, table):
        a0 = ALPHA_W011[0]
        assert math.isclose(diagonal_ratio(0, W011, table), math.exp(-2) / (3 * a0), rel_tol=1e-10)
        want = a0 ** -0.5 * math.exp(-1) * 3 ** -0.5
        assert math.isclose(kernel_norm_ratio(0, W011, 2, table), want, rel_tol=1e-9)

    def test_p2_matches_diagonal(self, table):
        # ||K_a||_2^2 = K_a(a), so the p = 2 ratio squared equals the diagonal ratio
        a = 0.6
        assert math.isclose(kernel_norm_ratio(a, W011, 2, table) ** 2, diagonal_ratio(a, W011, table), rel_tol=1e-8)

    def test_truncation_doubling(self, table):
        a = 0.8
        r1 = kernel_norm_ratio(a, W011, 1, table)
        r2 = kernel_norm_ratio(a, W011, 1, table, doubled=True)
        assert abs(r1 / r2 - 1) <= 0.01

    def test_offdiag_decay(self, table):
        a = 0.5
        zs = [0.5 * np.exp(1j * t) for t in np.linspace(0.2, np.pi, 8)]
        prof = offdiag_profile(a, zs, W011, table)
        assert np.all(prof.normalized > 0) and prof.d_tau.size == 8
        assert prof.normalized[-1] < prof.normalized[0]

    def test_fit_eta(self):
        d = np.linspace(1, 5, 9)
        assert math.isclose(fit_eta(d, 3 * np.exp(-0.7 * d)), 0.7, rel_tol=1e-12)
        assert fit_eta([0.1, 0.2], [1, 1]) is None
