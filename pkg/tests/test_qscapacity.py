import math

import numpy as np
import pytest
from gmpy2 import mpfr

from quadnest.constants import (faithful_constants, k_of_gamma,
                                practical_constants)
from quadnest.errors import (CoverViolation, GammaOutOfRange,
                             HypothesisViolated, QuadnestError,
                             VerificationFailed)
from quadnest.qscapacity import (CapacityBound, IntervalSet, QsTestMap,
                                 capacity_bounds, pullback_capacity_bound,
                                 tree_decompose_bound)


def random_interval_set(rng, max_parts=5, bits=192):
    cuts = np.sort(rng.uniform(0, 1, size=2 * int(rng.integers(1, max_parts + 1))))
    parts = [(cuts[2 * i], cuts[2 * i + 1]) for i in range(len(cuts) // 2)
             if cuts[2 * i + 1] > cuts[2 * i]]
    return IntervalSet.of((0, 1), parts, bits)


class TestKOfGamma:
    def test_identity_at_one(self):
        assert k_of_gamma(1.0) == 1.0

    def test_monotone(self):
        gs = [1.0, 1.3, 2.0, 5.0]
        ks = [k_of_gamma(g) for g in gs]
        assert ks == sorted(ks)

    def test_out_of_range(self):
        with pytest.raises(GammaOutOfRange):
            k_of_gamma(0.9)

    def test_power_map_endpoint_ratios(self):
        # x -> x^kappa on [0,1] satisfies the two-sided bound with k = kappa:
        # direct endpoint computation on anchored subintervals
        for kappa in (1.5, 2.0, 3.0):
            k = kappa
            for t in (0.1, 0.45, 0.9):
                ratio = t ** kappa
                assert (1 / k) * t ** k <= ratio <= (k * t) ** (1 / k)


class TestQsTestMap:
    def test_two_sided_inequality_random_pairs(self, rng):
        maps = [QsTestMap("affine", 2.0),
                QsTestMap("power", 2.0, (1.7, "left")),
                QsTestMap("power", 2.0, (0.6, "right")),
                QsTestMap("interior-power", 2.0, (0.4, 1.5)),
                QsTestMap("pl", 1.5, ((0.3, 0.7),
                                      (1.0, 1.5 ** (1 / 1.5), 1.0)))]
        for h in maps:
            k = mpfr(h.k)
            for _ in range(200):
                a = rng.uniform(0, 0.98)
                b = rng.uniform(a + 0.01, 1.0)
                r = mpfr(b) - mpfr(a)
                hr = h.ratio(a, b)
                assert hr >= (r ** k) / k * (1 - 1e-12)
                assert hr <= (k * r) ** (1 / k) * (1 + 1e-12)

    def test_violating_map_rejected(self):
        with pytest.raises(VerificationFailed):
            QsTestMap("pl", 1.2, ((0.5,), (10.0, 1.0)))

    def test_monotone_normalized(self):
        h = QsTestMap("interior-power", 3.0, (0.3, 2.0))
        assert float(h(0)) == 0.0 and float(h(1)) == 1.0
        vals = [float(h(t / 20)) for t in range(21)]
        assert vals == sorted(vals)


class TestCapacityBounds:
    def test_full_set(self):
        X = IntervalSet.of((0, 1), [(0.0, 1.0)])
        cb = capacity_bounds(X, 3.0, 2)
        assert float(cb.lower) == 1.0 and float(cb.upper) == 1.0

    def test_empty_set(self):
        X = IntervalSet.of((0, 1), [])
        cb = capacity_bounds(X, 3.0, 2)
        assert float(cb.lower) == 0.0 and float(cb.upper) == 0.0

    def test_gamma_one_collapse(self, rng):
        for _ in range(30):
            X = random_interval_set(rng)
            cb = capacity_bounds(X, 1.0, 2)
            mr = X.measure_ratio()
            assert abs(cb.lower - mr) <= mpfr(2) ** -60
            assert abs(cb.upper - mr) <= mpfr(2) ** -60

    def test_effort_zero_trivial(self):
        X = IntervalSet.of((0, 1), [(0.2, 0.3)])
        cb = capacity_bounds(X, 2.0, 0)
        assert float(cb.upper) == 1.0
        assert abs(float(cb.lower) - 0.1) < 1e-15

    def test_left_half_large_gamma(self):
        X = IntervalSet.of((0, 1), [(0.0, 0.5)])
        prev = 0.0
        for effort in (1, 2, 3):
            cb = capacity_bounds(X, 8.0, effort)
            assert float(cb.lower) > 0.5
            assert float(cb.upper) < 1.0
            assert float(cb.lower) >= prev - 1e-15
            prev = float(cb.lower)

    def test_lower_bound_vs_dense_power_sweep(self, rng):
        # independent oracle: dense sweep over anchored power maps
        for _ in range(10):
            X = random_interval_set(rng, max_parts=3)
            gamma = float(rng.uniform(1.2, 4.0))
            k = k_of_gamma(gamma)
            parts, _ = X.normalized()
            best = 0.0
            for i in range(-60, 61):
                kappa = k ** (i / 60)
                for side in ("left", "right"):
                    tot = 0.0
                    for a, b in parts:
                        fa, fb = float(a), float(b)
                        if side == "left":
                            tot += fa ** kappa * -1 + fb ** kappa
                        else:
                            tot += (1 - fa) ** kappa - (1 - fb) ** kappa
                    best = max(best, tot)
            cb = capacity_bounds(X, gamma, 3)
            # production lower bound must at least match the coarse sweep
            # up to the grid resolution and never exceed the upper bound
            assert float(cb.lower) >= best - 0.02
            assert float(cb.lower) <= float(cb.upper) + 1e-15

    def test_sandwich_and_monotonicity(self, rng):
        for _ in range(100):
            X = random_interval_set(rng)
            gamma = float(rng.uniform(1.0, 6.0))
            e = int(rng.integers(0, 3))
            lo1 = capacity_bounds(X, gamma, e)
            lo2 = capacity_bounds(X, gamma, e + 1)
            assert lo1.lower <= lo1.upper
            assert lo2.lower <= lo2.upper
            # nested candidate grids make effort-monotonicity exact
            assert lo2.lower >= lo1.lower
            assert lo2.upper <= lo1.upper

    def test_monotone_in_gamma(self, rng):
        for _ in range(25):
            X = random_interval_set(rng)
            g1 = float(rng.uniform(1.0, 3.0))
            g2 = g1 + float(rng.uniform(0.1, 2.0))
            c1 = capacity_bounds(X, g1, 2)
            c2 = capacity_bounds(X, g2, 2)
            assert c1.lower <= c2.upper

    def test_monotone_in_set(self, rng):
        for _ in range(25):
            X = random_interval_set(rng, max_parts=3)
            # Y: fatten every part of X within the ambient (still disjoint)
            parts = [(float(p.lo), float(p.hi)) for p in X.parts]
            fat = []
            for i, (lo, hi) in enumerate(parts):
                room_lo = parts[i - 1][1] if i else 0.0
                room_hi = parts[i + 1][0] if i + 1 < len(parts) else 1.0
                fat.append(((lo + room_lo) / 2, (hi + room_hi) / 2))
            Y = IntervalSet.of((0, 1), fat)
            gamma = float(rng.uniform(1.0, 5.0))
            cx = capacity_bounds(X, gamma, 2)
            cy = capacity_bounds(Y, gamma, 2)
            from quadnest.precision import working_precision
            with working_precision(192):
                slack = mpfr(2) ** -100
                assert cx.lower <= cy.lower + slack
                assert cx.upper <= cy.upper + slack

    def test_invalid_sets(self):
        with pytest.raises(QuadnestError):
            IntervalSet.of((0, 1), [(0.5, 0.7), (0.6, 0.9)])
        with pytest.raises(QuadnestError):
            IntervalSet.of((0, 1), [(-0.1, 0.2)])


class TestTreeDecompose:
    def test_idempotent_on_identity_cover(self, rng):
        X = random_interval_set(rng, max_parts=2)
        cover = IntervalSet.of((0, 1), [(0.0, 1.0)])
        direct = capacity_bounds(X, 2.0, 2)
        tb = tree_decompose_bound(X, cover, {0: direct}, 2.0)
        assert abs(float(tb) - float(direct.upper)) < 1e-12

    def test_empty_set_zero(self):
        X = IntervalSet.of((0, 1), [])
        cover = IntervalSet.of((0, 1), [(0.0, 0.4)])
        assert float(tree_decompose_bound(X, cover, {}, 2.0)) == 0.0

    def test_two_piece_vs_direct(self):
        cover = IntervalSet.of((0, 1), [(0.0, 0.45), (0.55, 1.0)])
        X = IntervalSet.of((0, 1), [(0.1, 0.2), (0.6, 0.7)])
        pieces = {
            0: capacity_bounds(IntervalSet.of((0.0, 0.45), [(0.1, 0.2)]), 2.0, 2),
            1: capacity_bounds(IntervalSet.of((0.55, 1.0), [(0.6, 0.7)]), 2.0, 2),
        }
        tb = tree_decompose_bound(X, cover, pieces, 2.0)
        direct = capacity_bounds(X, 2.0, 2)
        assert tb >= direct.lower

    def test_cover_violation(self):
        X = IntervalSet.of((0, 1), [(0.5, 0.6)])
        cover = IntervalSet.of((0, 1), [(0.0, 0.4)])
        with pytest.raises(CoverViolation):
            tree_decompose_bound(X, cover, {}, 2.0)


class TestPullbackBound:
    def test_practical_example(self):
        consts = practical_constants(a_tilde=0.5, b_tilde=2.0)
        val = pullback_capacity_bound(1e-9, 1, consts)
        assert abs(val - 10 ** (-9 * 0.125)) < 1e-12

    def test_decreases_with_delta(self):
        consts = practical_constants()
        vals = [pullback_capacity_bound(d, 1, consts)
                for d in (1e-3, 1e-6, 1e-9, 1e-12)]
        assert vals == sorted(vals, reverse=True)
        assert vals[-1] < 1e-3

    def test_faithful_hypothesis_violated(self):
        fc = faithful_constants()
        with pytest.raises(HypothesisViolated):
            pullback_capacity_bound(0.5, 5, fc)

    def test_trace_recorded(self):
        consts = practical_constants(a_tilde=0.5, b_tilde=2.0)
        trace = {}
        pullback_capacity_bound(1e-6, 1, consts, trace)
        assert "exponent" in trace and abs(trace["exponent"] - 0.125) < 1e-12
        assert "ln_neighborhood_V" in trace


class TestSerialization:
    def test_capacity_report_dict(self):
        X = IntervalSet.of((0, 1), [(0.2, 0.4)])
        cb = capacity_bounds(X, 2.0, 2)
        d = cb.to_dict()
        assert set(d) == {"gamma", "lower", "upper", "effort",
                          "family_descriptor", "gap_count"}
        assert d["gap_count"] == 2
