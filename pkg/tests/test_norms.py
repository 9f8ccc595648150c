import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_series
from oracles import (ALPHA_W011, ALPHA_W021, ALPHA_W111, BLOCH_Z_Q2_ARGMAX_W011, BLOCH_Z_Q2_SQ_W011,
                     LP_NUM_Z_P2_W011, NORM1_Z_W011, NORM4_1PZ_W011)
from paraprod.norms import (DegeneratePair, QuadratureConfig, WeightModifier, bergman_norm, bergman_norms,
                            bloch_seminorm, growth_norm, lipschitz_quotient, lp_ratio, pavl_ratio,
                            pavl_terms, q_functional)
from paraprod.series import TruncatedSeries, dilate
from paraprod.weights import parse_weight, phi

W011, W111, W021 = parse_weight("w0:1:1"), parse_weight("w1:1:1"), parse_weight("w0:2:1")
ONE, Z = TruncatedSeries([1]), TruncatedSeries.monomial(1)


def mono(k):
    return TruncatedSeries.monomial(k)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            QuadratureConfig(angular_base=8)
        with pytest.raises(ValueError):
            QuadratureConfig(radial_rel_tol=0.1)

    def test_refined(self):
        c = QuadratureConfig().refined()
        assert c.angular_base == 32 and c.sup_grid == 512 and c.radial_rel_tol == 2.5e-11


class TestBergman:
    @pytest.mark.parametrize("spec,table", [(W011, ALPHA_W011), (W111, ALPHA_W111), (W021, ALPHA_W021)])
    def test_monomials_against_oracle(self, spec, table):
        for j, alpha in table.items():
            est = bergman_norm(mono(j), spec, 2)
            assert est.converged
            assert math.isclose(est.value ** 2, alpha, rel_tol=1e-10)

    def test_parseval(self, rng):
        f = random_series(rng, 5)
        direct = bergman_norm(f, W011, 2).value ** 2
        alphas = [bergman_norm(mono(j), W011, 2).value ** 2 for j in range(6)]
        assert math.isclose(direct, sum(abs(c) ** 2 * a for c, a in zip(f.coeffs, alphas)), rel_tol=1e-9)

    def test_other_exponents(self):
        assert math.isclose(bergman_norm(TruncatedSeries([1, 1]), W011, 4).value ** 4, NORM4_1PZ_W011, rel_tol=1e-9)
        assert math.isclose(bergman_norm(Z, W011, 1).value, NORM1_Z_W011, rel_tol=1e-9)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_homogeneity(self, p, rng):
        f = random_series(rng, 4)
        lam = 2.5 - 1.5j
        a = bergman_norm(f * lam, W011, p).value
        b = abs(lam) * bergman_norm(f, W011, p).value
        assert math.isclose(a, b, rel_tol=1e-12)

    def test_rotation_invariance(self, rng):
        f = random_series(rng, 4)
        rot = TruncatedSeries(f.coeffs * np.exp(0.9j * np.arange(f.coeffs.size)))
        assert math.isclose(bergman_norm(f, W011, 3).value, bergman_norm(rot, W011, 3).value, rel_tol=1e-9)

    def test_batch_matches_single(self, rng):
        fs = [random_series(rng, d) for d in (1, 3, 6)]
        for a, f in zip(bergman_norms(fs, W011, 3), fs):
            assert math.isclose(a.value, bergman_norm(f, W011, 3).value, rel_tol=1e-6)

    def test_zero(self):
        assert bergman_norm(TruncatedSeries([0]), W011, 2).value == 0.0

    def test_minkowski(self, rng):
        f, g = random_series(rng, 3), random_series(rng, 4)
        assert bergman_norm(f + g, W011, 3).value <= bergman_norm(f, W011, 3).value + bergman_norm(g, W011, 3).value

    def test_modifier(self):
        est = bergman_norm(ONE, W011, 2, WeightModifier.littlewood_paley(2))
        assert math.isclose(est.value ** 2, LP_NUM_Z_P2_W011, rel_tol=1e-9)
        assert WeightModifier(p_half_exponent=1.0).q(4) == 1.0


class TestLittlewoodPaley:
    def test_constant(self):
        assert math.isclose(lp_ratio(ONE, W011, 2), 1 / ALPHA_W011[0], rel_tol=1e-9)

    def test_z(self):
        assert math.isclose(lp_ratio(Z, W011, 2), LP_NUM_Z_P2_W011 / ALPHA_W011[1], rel_tol=1e-9)

    def test_homogeneous_degree_zero(self, rng):
        f = random_series(rng, 4)
        assert math.isclose(lp_ratio(f * 3j, W011, 3), lp_ratio(f, W011, 3), rel_tol=1e-10)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            lp_ratio(TruncatedSeries([0]), W011, 2)


class TestSuprema:
    def test_bloch_z(self):
        assert math.isclose(bloch_seminorm(Z, W011, 1).value, 1.0, rel_tol=1e-12)
        est = bloch_seminorm(Z, W011, 2)
        assert math.isclose(est.value, math.sqrt(BLOCH_Z_Q2_SQ_W011), rel_tol=1e-8)
        assert abs(abs(est.argmax) - BLOCH_Z_Q2_ARGMAX_W011) < 1e-4

    def test_bloch_constant_and_q(self):
        assert bloch_seminorm(TruncatedSeries([3]), W011).value == 0.0
        with pytest.raises(ValueError):
            bloch_seminorm(Z, W011, 0.5)

    def test_bloch_homogeneity(self, rng):
        g = random_series(rng, 4)
        for q in (1, 2, 3):
            a = bloch_seminorm(g * 2.0, W011, q).value
            assert math.isclose(a, 2 * bloch_seminorm(g, W011, q).value, rel_tol=1e-9)

    def test_growth(self):
        assert math.isclose(growth_norm(ONE, W011).value, 1.0, rel_tol=1e-12)
        assert math.isclose(growth_norm(ONE, W111).value, 1 / math.e, rel_tol=1e-12)
        assert growth_norm(TruncatedSeries([0]), W011).value == 0.0

    def test_growth_dominates_point_values(self, rng):
        g = random_series(rng, 5)
        val = growth_norm(g, W011).value
        for r in (0.0, 0.3, 0.7, 0.95):
            z = r * np.exp(2j * np.pi * rng.uniform(size=64))
            assert np.max(np.abs(g(z))) / phi(W011, r) <= val * (1 + 1e-9)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_pavl_constant(self, alpha):
        assert math.isclose(pavl_ratio(TruncatedSeries([2.0]), W011, alpha), 1.0, rel_tol=1e-12)
        assert math.isclose(pavl_ratio(TruncatedSeries([2.0]), W111, alpha), math.e ** -alpha, rel_tol=1e-12)

    def test_pavl_zero(self):
        with pytest.warns(UserWarning):
            assert pavl_ratio(TruncatedSeries([0]), W011, 1.0) == 1.0
        assert pavl_terms(TruncatedSeries([0]), W011, 1.0).degenerate

    def test_pavl_homogeneous(self, rng):
        g = random_series(rng, 4)
        assert math.isclose(pavl_ratio(g * 5, W011, 1.0), pavl_ratio(g, W011, 1.0), rel_tol=1e-9)


class TestQFunctional:
    def test_oracle(self):
        est = q_functional(ONE, Z, W011, 1, 1, 2)
        assert math.isclose(est.value, math.sqrt(ALPHA_W011[2]), rel_tol=1e-10)

    def test_rough_path_matches_exact(self, rng):
        # |z|^{1/2} |h|^2 with g = z: the rough path must agree with the monomial moment sum
        f = mono(2)
        est = q_functional(f, Z, W011, (1, 4), 1, 2)
        # T_z z^2 = z^3 / 3, and |z|^{1/2} |z^3/3|^2 has radial profile r^{6.5} / 9
        ref = bergman_norm(TruncatedSeries([0, 0, 0, 1 / 3]), W011, 2).value
        assert 0 < est.value < ref
        assert est.converged

    def test_sigma_forms_agree(self):
        a = q_functional(Z, Z, W011, (1, 2), 1, 2).value
        b = q_functional(Z, Z, W011, 0.5, 1, 2).value
        assert a == b

    def test_homogeneity(self, rng):
        f, g = random_series(rng, 3), random_series(rng, 3)
        a = q_functional(f * 2, g, W011, 1, 2, 2).value
        assert math.isclose(a, 2 * q_functional(f, g, W011, 1, 2, 2).value, rel_tol=1e-12)

    def test_rejects(self):
        with pytest.raises(ValueError):
            q_functional(Z, Z, W011, 0, 1, 2)
        with pytest.raises(ValueError):
            q_functional(Z, Z, W011, 1, 0, 2)


class TestLipschitz:
    def test_radial_example(self):
        # |z| between 0 and 1/2, distance 1/2 + phi(1/2) - phi(0) = 5/6
        assert math.isclose(lipschitz_quotient(Z, W011, 1, 0.5, 0), 0.6, rel_tol=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegeneratePair):
            lipschitz_quotient(Z, W011, 1, 0.3, 0.3)

    @pytest.mark.slow
    @pytest.mark.parametrize("q", [1, 2])
    def test_bounded_by_bloch(self, q, rng):
        g = random_series(rng, 3)
        bound = bloch_seminorm(g, W011, q)
        r = rng.uniform(0, 0.9, (500, 2))
        t = rng.uniform(0, 2 * np.pi, (500, 2))
        pts = r * np.exp(1j * t)
        quots = [lipschitz_quotient(g, W011, q, z, w) for z, w in pts if z != w]
        assert max(quots) <= bound.value ** q * (1 + 2e-2)
        z0 = bound.argmax
        near = [lipschitz_quotient(g, W011, q, z0, z0 + 1e-4 * np.exp(1j * a))
                for a in np.linspace(0, 2 * np.pi, 32, endpoint=False)]
        assert max(near) >= 0.9 * bound.value ** q


class TestDilation:
    @settings(max_examples=10)
    @given(st.floats(0.1, 0.99))
    def test_dilation_shrinks_norm(self, r):
        f = TruncatedSeries([0.3, 1.0, -0.5, 0.2j])
        assert bergman_norm(dilate(f, r), W011, 2).value <= bergman_norm(f, W011, 2).value * (1 + 1e-12)
