import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import complexes, random_series, series_strategy
from paraprod.series import (TruncatedSeries, cauchy_product, derivative, dilate, evaluate, max_modulus,
                             parse_series, pi0, power, primitive0)


def coeffs(f):
    return np.asarray(f.coeffs)


class TestTruncatedSeries:
    def test_cap_pads_and_truncates(self):
        assert TruncatedSeries([1, 2], cap=4).cap == 4
        assert list(TruncatedSeries([1, 2, 3], cap=1).coeffs) == [1, 2]

    def test_immutable(self):
        f = TruncatedSeries([1, 2])
        with pytest.raises(ValueError):
            f.coeffs[0] = 5

    def test_degree_and_h0(self):
        f = TruncatedSeries([0, 1, 0, 0])
        assert f.degree == 1 and f.cap == 3 and f.in_H0()
        assert TruncatedSeries([0, 0]).is_zero()

    def test_json_roundtrip(self):
        f = TruncatedSeries([1 + 2j, -0.5, 3j])
        assert TruncatedSeries.from_json(f.to_json()) == f
        assert json.loads(f.to_json())[0] == [1.0, 2.0]

    def test_parse_shorthand(self):
        assert list(parse_series("poly:1,0,2").coeffs) == [1, 0, 2]
        assert parse_series("[[0, 1], [2, 0]]").coeffs[0] == 1j
        with pytest.raises(ValueError):
            parse_series("1+z")

    def test_negative_cap_rejected(self):
        with pytest.raises(ValueError):
            TruncatedSeries([1], cap=-1)


class TestCauchyProduct:
    def test_square(self):
        f = TruncatedSeries([1, 1])
        assert list(cauchy_product(f, f, 2).coeffs) == [1, 2, 1]

    def test_hand_convolution(self):
        out = cauchy_product(TruncatedSeries([1, 1, 1]), TruncatedSeries([1, -1]), 3)
        assert list(out.coeffs) == [1, 0, 0, -1]

    @given(series_strategy())
    def test_unit(self, f):
        assert np.array_equal(cauchy_product(f, TruncatedSeries([1]), f.cap).coeffs, f.coeffs)

    @given(series_strategy(max_degree=5), series_strategy(max_degree=5))
    def test_exact_degree(self, f, g):
        if f.is_zero() or g.is_zero():
            return
        h = cauchy_product(f, g, f.degree + g.degree)
        assert h.degree == f.degree + g.degree

    def test_operator_truncates_to_smaller_cap(self):
        assert (TruncatedSeries([1, 1], cap=5) * TruncatedSeries([1, 1])).cap == 1


class TestCalculus:
    def test_examples(self):
        assert list(derivative(TruncatedSeries([0, 0, 0, 1])).coeffs) == [0, 0, 3]
        assert derivative(TruncatedSeries([7])).is_zero()
        assert list(primitive0(TruncatedSeries([1])).coeffs) == [0, 1]
        assert list(primitive0(TruncatedSeries([0, 1])).coeffs) == [0, 0, 0.5]
        assert list(primitive0(TruncatedSeries([0, 0, 3])).coeffs) == [0, 0, 0, 1]

    @given(series_strategy())
    def test_derivative_inverts_primitive(self, f):
        assert np.allclose(derivative(primitive0(f)).coeffs, f.coeffs, rtol=0, atol=1e-15)

    @given(series_strategy(), series_strategy(), complexes)
    def test_linearity(self, f, g, lam):
        cap = max(f.cap, g.cap)
        f, g = f.with_cap(cap), g.with_cap(cap)
        lhs = derivative(f + g * lam).coeffs
        rhs = derivative(f).coeffs + lam * derivative(g).coeffs
        assert np.allclose(lhs, rhs, rtol=4 * np.finfo(float).eps, atol=1e-13)


class TestEvaluateDilatePower:
    def test_examples(self):
        assert evaluate(TruncatedSeries([1, 1]), 0.5) == 1.5
        assert abs(evaluate(TruncatedSeries.monomial(4), 1j) - 1) < 1e-15

    def test_matches_direct_sum(self, rng):
        for _ in range(20):
            f = random_series(rng, 12)
            z = 0.99 * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
            direct = sum(c * z ** k for k, c in enumerate(f.coeffs))
            assert abs(evaluate(f, z) - direct) <= 1e-12 * np.sum(np.abs(f.coeffs))

    def test_dilate(self):
        f = TruncatedSeries([1, 2, 3])
        assert dilate(f, 1) == f
        assert list(dilate(TruncatedSeries.monomial(2), 0.5).coeffs) == [0, 0, 0.25]
        assert np.allclose(dilate(dilate(f, 0.3), 0.7).coeffs, dilate(f, 0.21).coeffs, rtol=1e-15)
        with pytest.raises(ValueError):
            dilate(f, 0)

    def test_power(self):
        g = TruncatedSeries([1, 1])
        assert list(power(g, 0).coeffs) == [1]
        assert list(power(g, 2).coeffs) == [1, 2, 1]
        assert list(power(TruncatedSeries.monomial(1), 3).coeffs) == [0, 0, 0, 1]

    @given(series_strategy(max_degree=4), st.integers(0, 5))
    def test_power_matches_repeated_product(self, g, k):
        ref = TruncatedSeries([1])
        for _ in range(k):
            ref = cauchy_product(ref, g, ref.cap + g.cap)
        got = power(g, k, cap=ref.cap)
        assert np.allclose(got.coeffs, ref.coeffs, rtol=1e-12, atol=1e-9 * (1 + np.max(np.abs(ref.coeffs))))

    def test_pi0(self):
        assert pi0(TruncatedSeries([3])).is_zero()
        f = TruncatedSeries([0, 1, 2])
        assert pi0(f) == f
        g = TruncatedSeries([5, 1])
        assert pi0(pi0(g)) == pi0(g)


class TestMaxModulus:
    def test_examples(self):
        assert abs(max_modulus(TruncatedSeries.monomial(5), 0.7) - 0.7 ** 5) < 1e-15
        assert max_modulus(TruncatedSeries([2 - 1j]), 0.4) == abs(2 - 1j)
        assert abs(max_modulus(TruncatedSeries([1, 1]), 0.5) - 1.5) < 1e-12

    def test_dense_grid_oracle(self, rng):
        theta = np.linspace(0, 2 * np.pi, 200001)
        for _ in range(5):
            f = random_series(rng, 6)
            r = rng.uniform(0.2, 0.95)
            dense = np.max(np.abs(evaluate(f, r * np.exp(1j * theta))))
            got = max_modulus(f, r)
            assert got >= dense * (1 - 1e-12)
            assert got <= dense * (1 + 1e-8)

    @given(series_strategy(max_degree=6))
    def test_nondecreasing_in_r(self, f):
        vals = [max_modulus(f, r) for r in np.linspace(0, 0.99, 12)]
        assert all(b >= a * (1 - 1e-9) for a, b in zip(vals, vals[1:]))
