import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import TAU_DIST_0_HALF_W011
from paraprod.weights import (WeightDomainError, WeightEval, beta_distance, delta_phi, log_derivatives,
                              log_omega, parse_weight, phi, phi_inverse, phi_prime, phi_second, psi,
                              self_check, tau, tau_distance)

W011 = parse_weight("w0:1:1")
W111 = parse_weight("w1:1:1")
ACCEPTANCE = ["w0:1:1", "w0:2:0.5", "w1:1:1", "w2:1:1"]


def mp_phi(level, a, c, r):
    x = c / (1 - r ** 2) ** a
    for _ in range(level):
        x = mp.e ** x
    return x


class TestParse:
    def test_roundtrip(self):
        s = parse_weight("w1:0.5:2")
        assert (s.level, s.alpha, s.c) == (1, 0.5, 2.0)
        assert parse_weight(str(s)) == s

    @pytest.mark.parametrize("bad", ["w0:1", "x0:1:1", "w0:-1:1", "w0:1:0", "w-1:1:1", "w0:a:1"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_weight(bad)

    def test_domain(self):
        with pytest.raises(WeightDomainError):
            phi(W011, 1.0)
        with pytest.raises(WeightDomainError):
            phi(W011, -0.1)


class TestValues:
    def test_at_origin(self):
        assert phi(W011, 0.0) == 1.0
        assert log_omega(W011, 0.0) == -2.0
        assert math.isclose(log_omega(W111, 0.0), -2 * math.e, rel_tol=1e-15)
        assert math.isclose(phi(W111, 0.0), math.e, rel_tol=1e-15)
        assert phi_prime(W011, 0.0) == 0.0
        assert math.isclose(tau(W011, 0.0), 3 ** -0.5, rel_tol=1e-15)
        assert math.isclose(delta_phi(W011, 0.0), 4.0, rel_tol=1e-15)
        assert math.isclose(psi(W011, 0.0), 1.0)

    @pytest.mark.parametrize("spec", ACCEPTANCE)
    @pytest.mark.parametrize("r", [0.1, 0.5, 0.9, 0.99])
    def test_against_mpmath(self, spec, r):
        s = parse_weight(spec)
        mp.mp.dps = 40
        rr = mp.mpf(r)
        f = lambda x: mp_phi(s.level, s.alpha, s.c, x)
        want = [f(rr), mp.diff(f, rr), mp.diff(f, rr, 2)]
        got = log_derivatives(s, r)[:3]
        for g, w in zip(got, want):
            assert abs(g - float(mp.log(w))) <= 1e-12 * max(1.0, abs(float(mp.log(w))))

    def test_finite_differences(self):
        # 5-point differences of log phi and log phi' against the closed-form ratios
        r = np.linspace(0.05, 0.95, 19)
        h = 1e-3 * (1 - r)

        def d(f):
            return (-f(r + 2 * h) + 8 * f(r + h) - 8 * f(r - h) + f(r - 2 * h)) / (12 * h)

        for spec in map(parse_weight, ACCEPTANCE):
            le, l1, l2, _ = log_derivatives(spec, r)
            fd1 = d(lambda x: log_derivatives(spec, x)[0])
            fd2 = d(lambda x: log_derivatives(spec, x)[1])
            assert np.max(np.abs(fd1 / np.exp(l1 - le) - 1)) < 1e-6
            assert np.max(np.abs(fd2 / np.exp(l2 - l1) - 1)) < 1e-6

    def test_huge_values_stay_in_log_domain(self):
        r = 0.9999
        assert math.isinf(phi(W111, r))
        le = log_derivatives(W111, r)[0]
        assert math.isfinite(le) and le > 700

    @given(st.floats(0.0, 0.999))
    def test_monotone(self, r):
        r2 = r + (1 - r) / 2
        assert phi(W011, r2) >= phi(W011, r)
        assert tau(W011, r2) <= tau(W011, r)

    @given(st.floats(1.0, 1e6))
    def test_phi_inverse(self, y):
        r = phi_inverse(W011, y)
        assert math.isclose(phi(W011, r), y, rel_tol=1e-9)
        assert phi_inverse(W011, 0.5) == 0.0

    def test_r_cut(self):
        ev = WeightEval(W011)
        assert math.isclose(log_omega(W011, ev.r_cut), -700.0, rel_tol=1e-9)
        assert ev.r_cut_for(4.0) < ev.r_cut


class TestDistances:
    def test_radial_beta_is_exact(self):
        assert math.isclose(beta_distance(W011, 0.5, 0), 0.5 + 4 / 3 - 1, rel_tol=1e-14)
        assert math.isclose(beta_distance(W011, 0.5j, 0.2j), 0.3 + 4 / 3 - 1 / 0.96, rel_tol=1e-13)

    def test_tau_distance_oracle(self):
        assert math.isclose(tau_distance(W011, 0, 0.5), TAU_DIST_0_HALF_W011, rel_tol=1e-10)

    def test_zero_and_symmetry(self):
        z, w = 0.3 + 0.4j, -0.5 + 0.1j
        assert beta_distance(W011, z, z) == 0.0
        assert beta_distance(W011, z, w) == beta_distance(W011, w, z)

    def test_triangle_and_euclidean_bound(self, rng):
        for _ in range(10):
            pts = (rng.uniform(0, 0.8, 3) * np.exp(2j * np.pi * rng.uniform(size=3)))
            a, b, c = pts
            d = lambda x, y: beta_distance(W011, x, y)
            assert d(a, c) <= (d(a, b) + d(b, c)) * (1 + 1e-6)
            assert d(a, b) >= abs(a - b) * (1 - 1e-12)

    def test_rotation_invariance(self):
        # the polyline search moves along fixed axes, so agreement is approximate
        z, w = 0.3 + 0.4j, -0.5 + 0.1j
        u = np.exp(0.7j)
        assert math.isclose(beta_distance(W011, z, w), beta_distance(W011, u * z, u * w), rel_tol=1e-3)


class TestSelfCheck:
    @pytest.mark.parametrize("spec", ACCEPTANCE)
    def test_passes(self, spec):
        rep = self_check(parse_weight(spec))
        assert rep.passed, rep.failures()
        assert rep.eta is not None and rep.eta > 0
        assert rep.to_dict()["weight"] == spec

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            self_check(W011, [0.5, 0.4])
