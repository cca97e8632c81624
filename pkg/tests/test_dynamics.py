import math

import gmpy2
import pytest
from gmpy2 import mpfr

from quadnest.dynamics import (distortion, find_attracting_cycle,
                               find_fixed_points, invariant_interval, iterate)
from quadnest.errors import (NotDiffeomorphic, ParamOutOfRange, QuadnestError)
from quadnest.precision import PrecisionInterval, working_precision


class TestInvariantInterval:
    def test_beta_closed_forms(self):
        assert float(invariant_interval("2").beta) == 2.0
        assert float(invariant_interval(0).beta) == 1.0
        assert float(invariant_interval("-0.25").beta) == 0.5

    def test_out_of_range(self):
        with pytest.raises(ParamOutOfRange):
            invariant_interval(3)
        with pytest.raises(ParamOutOfRange):
            invariant_interval("-0.3")


class TestIterate:
    def test_chebyshev_orbit(self):
        m = invariant_interval(2)
        s = iterate(m, 0, 3)
        assert [float(p) for p in s.points] == [0.0, 2.0, -2.0, -2.0]

    def test_logderiv_closed_form(self):
        m = invariant_interval(2)
        s = iterate(m, 2, 2)
        with working_precision(256):
            assert abs(s.logderiv_prefix[2] - gmpy2.log(16)) < mpfr(2) ** -240

    def test_zero_hit_flags_undefined(self):
        m = invariant_interval(1)
        s = iterate(m, 0, 4)   # 0 -> 1 -> 0 -> 1 -> 0
        assert s.undefined_from == 1
        assert s.logderiv_prefix[1] is None

    def test_high_precision_reiteration_oracle(self):
        # chaotic parameter, long orbit: agreement within 2^(-bits/2) per
        # coordinate against a fresh run at 4x precision
        bits = 32768
        n = 10_000
        m = invariant_interval("1.5", bits)
        s = iterate(m, 0, n)
        m4 = invariant_interval("1.5", 4 * bits)
        s4 = iterate(m4, 0, n)
        with working_precision(4 * bits):
            tol = mpfr(2) ** (-(bits // 2))
            for k in (1, 10, 100, 1000, 5000, n):
                assert abs(s.points[k] - s4.points[k]) < tol

    def test_chain_rule_against_product_oracle(self, rng):
        bits = 4096
        m = invariant_interval("1.77", bits)
        x0 = float(rng.uniform(-0.5, 0.5))
        n = 500
        s = iterate(m, x0, n)
        # independent oracle: product of factors at double precision
        m2 = invariant_interval("1.77", 2 * bits)
        with working_precision(2 * bits):
            x = mpfr(x0, 2 * bits)   # float -> mpfr is exact
            prod = mpfr(1)
            for _ in range(n):
                prod *= abs(-2 * x)
                x = m2.a - x * x
            oracle = gmpy2.log(prod)
            assert abs(s.logderiv_prefix[n] - oracle) < mpfr(2) ** (-(bits // 2))


class TestDistortion:
    def test_identity(self):
        m = invariant_interval("1.7")
        with working_precision(256):
            J = PrecisionInterval.of("0.2", "0.4", 256)
        assert float(distortion(m, J, 0)) == 1.0

    def test_linear_branch_ratio(self):
        m = invariant_interval(2)
        with working_precision(256):
            J = PrecisionInterval.of("1.1", "1.2", 256)
        d = float(distortion(m, J, 1, pieces=256))
        assert 12 / 11 <= d <= (12 / 11) * (1 + 1e-6)

    def test_at_least_one(self):
        m = invariant_interval("1.9")
        with working_precision(256):
            J = PrecisionInterval.of("0.5", "0.52", 256)
        assert float(distortion(m, J, 3)) >= 1.0

    def test_refinement_monotone(self):
        m = invariant_interval("1.9")
        with working_precision(256):
            J = PrecisionInterval.of("0.5", "0.54", 256)
            whole = float(distortion(m, J, 2, pieces=64))
            mid = (J.lo + J.hi) / 2
            left = float(distortion(m, PrecisionInterval(J.lo, mid), 2, pieces=32))
            right = float(distortion(m, PrecisionInterval(mid, J.hi), 2, pieces=32))
        assert whole >= max(left, right) - 1e-30

    def test_critical_preimage_detected(self):
        m = invariant_interval(2)
        with working_precision(256):
            J = PrecisionInterval.of("-0.5", "0.5", 256)
        with pytest.raises(NotDiffeomorphic):
            distortion(m, J, 1)


class TestFixedPoints:
    def test_closed_form_a2(self):
        q, p = find_fixed_points(invariant_interval(2))
        assert float(q) == -2.0 and float(p) == 1.0

    def test_parabolic_value(self):
        _, p = find_fixed_points(invariant_interval("0.75"))
        assert float(p) == 0.5

    def test_against_independent_root_finder(self):
        # bisection on x^2 + x - a over floats, far from the quadratic formula
        a = 0.5
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = (lo + hi) / 2
            if mid * mid + mid - a < 0:
                lo = mid
            else:
                hi = mid
        _, p = find_fixed_points(invariant_interval("0.5"))
        assert abs(float(p) - lo) < 1e-12
        assert abs(float(p) - 0.36603) < 1e-5

    def test_fixed_point_residual_invariant(self, rng):
        for _ in range(10):
            a = float(rng.uniform(-0.2, 2.0))
            m = invariant_interval(repr(a))
            q, p = find_fixed_points(m)
            with working_precision(m.precision_bits):
                for r in (q.value, p.value):
                    res = abs((m.a - r * r) - r)
                    assert res < mpfr(2) ** (-m.precision_bits + 8)


class TestAttractingCycle:
    def test_superattracting_fixed_point(self):
        rep = find_attracting_cycle(invariant_interval(0), 8, 1000)
        assert rep.period == 1
        assert float(rep.multiplier.hi) == 0.0

    def test_superattracting_two_cycle(self):
        rep = find_attracting_cycle(invariant_interval(1), 8, 1000)
        assert rep.period == 2
        assert sorted(round(float(p), 12) for p in rep.points) == [0.0, 1.0]
        assert float(rep.multiplier.hi) == 0.0

    def test_chebyshev_has_none(self):
        assert find_attracting_cycle(invariant_interval(2), 8, 1000) is None

    def test_attracting_fixed_point(self):
        rep = find_attracting_cycle(invariant_interval("0.5"), 8, 1000)
        assert rep.period == 1
        assert float(rep.multiplier.hi) < 1
        assert abs(float(rep.multiplier.hi) - (2 * 0.36603)) < 1e-4

    def test_period_three_window(self):
        rep = find_attracting_cycle(invariant_interval("1.76"), 16, 100_000)
        assert rep is not None and rep.period == 3
        assert float(rep.multiplier.hi) < 1
