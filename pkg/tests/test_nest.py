import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from quadnest.dynamics import invariant_interval, orbit_point
from quadnest.errors import (BudgetExceeded, InvalidAddress,
                             NoOrientationReversingPoint, OrbitEntersNest,
                             ParabolicObstruction)
from quadnest.nest import (NestBudgets, Termination, TreeAddress,
                           build_first_level, build_nest, build_next_level,
                           detect_central_and_simple, discover_branches,
                           hyperbolic_outside, landing_components,
                           landing_time, nest_report_to_dict)
from quadnest.precision import PrecisionInterval, working_precision


def grid_scan_oracle(a_float: float, p_float: float, n_points: int,
                     time_budget: int):
    """Brute-force first-return scan on [-p, p] at float64.

    Returns the sorted list of (approx_lo, approx_hi, time) blocks of
    constant first-return time detected on the grid (block boundaries are
    grid-resolution only).
    """
    cell = 2 * p_float / n_points
    xs = -p_float + (np.arange(n_points) + 0.5) * cell
    times = np.zeros(n_points, dtype=np.int64)
    cur = a_float - xs * xs
    for t in range(1, time_budget + 1):
        inside = (np.abs(cur) < p_float) & (times == 0)
        times[inside] = t
        cur = a_float - cur * cur
    blocks = []
    start = 0
    for i in range(1, n_points + 1):
        if i == n_points or times[i] != times[start]:
            blocks.append((xs[start], xs[i - 1], int(times[start])))
            start = i
    return [b for b in blocks if b[2] > 0]


class TestTreeAddress:
    def test_sigma_maps(self):
        d = TreeAddress((3, -1, 2))
        assert d.sigma_plus().entries == (3, -1)
        assert d.sigma_minus().entries == (-1, 2)

    def test_zero_rejected(self):
        with pytest.raises(InvalidAddress):
            TreeAddress((1, 0))
        with pytest.raises(InvalidAddress):
            TreeAddress(()).sigma_plus()


class TestFirstLevel:
    def test_chebyshev_interval(self):
        rs = build_first_level(invariant_interval(2),
                               NestBudgets(time_budget=8))
        assert float(rs.interval.lo) == -1.0 and float(rs.interval.hi) == 1.0
        assert rs.central is None

    def test_attracting_param_refused(self):
        with pytest.raises(NoOrientationReversingPoint):
            build_first_level(invariant_interval("0.5"))

    def test_parabolic_param_refused(self):
        with pytest.raises(ParabolicObstruction):
            build_first_level(invariant_interval("0.75"))

    def test_matches_grid_scan(self, nest19):
        rs = nest19.levels[0]
        a, p = 1.9, float(rs.interval.hi)
        blocks = grid_scan_oracle(a, p, 100_000, 20)
        # the oracle sees the central block (containing 0) plus the branches
        noncentral = [b for b in blocks if not (b[0] <= 0 <= b[1])]
        central = [b for b in blocks if b[0] <= 0 <= b[1]]
        assert len(noncentral) == len(rs.branches)
        assert len(central) == 1 and central[0][2] == rs.central.return_time
        got = sorted((float(b.domain.lo), b.return_time) for b in rs.branches)
        exp = sorted((b[0], b[2]) for b in noncentral)
        for (glo, gt), (elo, et) in zip(got, exp):
            assert gt == et
            assert abs(glo - elo) < 2 * (2 * p / 100_000)

    def test_v1_is_four(self, nest19):
        assert nest19.levels[0].v == 4
        assert nest19.levels[0].central.return_time == 4


class TestDiscoverBranches:
    def test_chebyshev_budget8_against_scan(self):
        m = invariant_interval(2)
        with working_precision(256):
            I = PrecisionInterval.of(-1, 1, 256)
        rs = discover_branches(m, I, time_budget=8)
        blocks = grid_scan_oracle(2.0, 1.0, 200_000, 8)
        assert len(blocks) == len(rs.branches)   # no central at a=2
        got = sorted((float(b.domain.lo), b.return_time) for b in rs.branches)
        for (glo, gt), (elo, _, et) in zip(got, sorted(blocks)):
            assert gt == et and abs(glo - elo) < 3e-5

    def test_disjoint_and_bounded(self):
        m = invariant_interval(2)
        with working_precision(256):
            I = PrecisionInterval.of(-1, 1, 256)
        rs = discover_branches(m, I, time_budget=10)
        doms = sorted(rs.branches, key=lambda b: float(b.domain.lo))
        total = 0.0
        for i, b in enumerate(doms):
            total += float(b.domain.width())
            assert I.contains_interval(b.domain)
            if i:
                assert doms[i - 1].domain.hi <= b.domain.lo
        assert total + rs.uncovered <= float(I.width()) + 1e-20

    def test_count_budget_exceeded_carries_partial(self):
        m = invariant_interval(2)
        with working_precision(256):
            I = PrecisionInterval.of(-1, 1, 256)
        with pytest.raises(BudgetExceeded) as ei:
            discover_branches(m, I, time_budget=64, count_budget=4)
        assert ei.value.partial is not None
        assert ei.value.uncovered > 0

    def test_near_superattracting_probe(self):
        # close to the period-3 superattracting parameter the level-1
        # structure resolves completely: a probe, recorded not asserted deeply
        m = invariant_interval("1.754877")
        with working_precision(256):
            p = (-1 + gmpy2.sqrt(1 + 4 * m.a)) / 2
            I = PrecisionInterval(-p, p)
        rs = discover_branches(m, I, time_budget=64)
        assert rs.central is not None and rs.central.return_time == 3
        assert rs.uncovered < 1e-12

    def test_asymmetric_interval_rejected(self):
        m = invariant_interval(2)
        with working_precision(256):
            I = PrecisionInterval.of("0.1", "0.9", 256)
        with pytest.raises(Exception):
            discover_branches(m, I, time_budget=4)


class TestLandingMachinery:
    def test_empty_address_components(self, nest19):
        rs = nest19.levels[0]
        Id, Cd = landing_components(rs, [])
        assert float(Id.lo) == float(rs.interval.lo)
        assert float(Cd.hi) == float(rs.central.domain.hi)

    def test_single_entry_is_branch_domain(self, nest19):
        rs = nest19.levels[0]
        for j in (1, 2, -1, -2):
            Id, _ = landing_components(rs, [j])
            br = rs.branch(j)
            with working_precision(256):
                assert abs(Id.lo - br.domain.lo) < mpfr(2) ** -200
                assert abs(Id.hi - br.domain.hi) < mpfr(2) ** -200

    def test_component_forward_iteration_oracle(self, nest19):
        # grid points of C^(j) must land in I^0 after exactly r_n(j) steps
        rs = nest19.levels[0]
        w = rs.central.domain.hi
        with working_precision(256):
            for j in (1, -2):
                _, Cd = landing_components(rs, [j])
                r = rs.branch(j).return_time
                for t in range(1, 8):
                    x = Cd.lo + (Cd.hi - Cd.lo) * t / 8
                    y = orbit_point(rs.param.a, x, r)
                    assert -w <= y <= w

    def test_landing_time_sums(self, nest19):
        rs = nest19.levels[0]
        assert landing_time(rs, []) == 0
        assert landing_time(rs, [2]) == rs.branch(2).return_time
        d = [2, 1, -1, -2, 1]
        total = sum(rs.branch(j).return_time for j in d)
        assert landing_time(rs, d) == total
        # address semantics: l(d) = l(sigma+ d) + r(last)
        assert landing_time(rs, d) == landing_time(rs, d[:-1]) + \
            rs.branch(d[-1]).return_time

    def test_landing_time_by_forward_counting(self, nest19):
        # count raw iterates of a point in C^d until it enters I^0
        rs = nest19.levels[0]
        d = [2, 1, -1]
        Id, Cd = landing_components(rs, d)
        w = rs.central.domain.hi
        expected = landing_time(rs, d)
        with working_precision(256):
            x = Cd.mid()
            steps = 0
            while not (-w <= x <= w):
                x = rs.param.a - x * x
                steps += 1
                assert steps <= expected
        assert steps == expected

    def test_invalid_addresses(self, nest19):
        rs = nest19.levels[0]
        with pytest.raises(InvalidAddress):
            landing_components(rs, [0])
        with pytest.raises(InvalidAddress):
            landing_time(rs, [77])


class TestDeeperLevels:
    def test_nesting_and_symmetry(self, nest19):
        levels = nest19.levels
        for i in range(len(levels) - 1):
            cur, nxt = levels[i], levels[i + 1]
            assert float(nxt.interval.lo) == -float(cur.central.domain.hi)
            assert float(nxt.interval.hi) == float(cur.central.domain.hi)
            assert float(nxt.interval.width()) < float(cur.interval.width())
        for rs in levels:
            with working_precision(256):
                off = abs(rs.interval.lo + rs.interval.hi)
                assert off <= mpfr(2) ** -240 * rs.interval.width()

    def test_v_recursion(self, nest19):
        l1, l2 = nest19.levels[0], nest19.levels[1]
        assert l2.v == l1.v + landing_time(l1, l1.dstar)
        assert l1.s == len(l1.dstar)

    def test_c_matches_grid_scan(self, nest19):
        # the central block of the scan approximates I_2
        rs = nest19.levels[0]
        p = float(rs.interval.hi)
        blocks = grid_scan_oracle(1.9, p, 200_000, 10)
        central = [b for b in blocks if b[0] <= 0 <= b[1]][0]
        c_scan = (central[1] - central[0]) / (2 * p)
        assert abs(c_scan - rs.c) < 2e-4

    def test_branch_times_consistent_with_structure(self, nest19):
        l1, l2 = nest19.levels[0], nest19.levels[1]
        for br in l2.branches[:20]:
            assert br.source_address is not None
            expected = l1.v + sum(l1.branch(j).return_time
                                  for j in br.source_address)
            assert br.return_time == expected

    def test_branch_forward_maps_into_level(self, nest19):
        # midpoint of a level-2 branch returns to I_2 at its recorded time
        l2 = nest19.levels[1]
        with working_precision(256):
            for br in list(l2.branches)[:6]:
                x = br.domain.mid()
                y = orbit_point(l2.param.a, x, br.return_time)
                assert l2.interval.contains(y)
                # and not before (first return)
                z = x
                for t in range(1, br.return_time):
                    z = l2.param.a - z * z
                    assert not (l2.interval.lo < z < l2.interval.hi)

    def test_gape_contains_next_interval(self, nest19):
        for i in range(1, len(nest19.levels)):
            rs = nest19.levels[i]
            if rs.gape is None or rs.central is None:
                continue
            assert rs.gape.contains_interval(rs.central.domain)

    def test_gape_dichotomy(self, nest19, nest18):
        for rep in (nest19, nest18):
            for rs in rep.levels:
                if rs.gape is None:
                    continue
                g = rs.gape
                for br in rs.branches:
                    inside = g.contains_interval(br.domain)
                    outside = not g.intersects(br.domain)
                    boundary_graze = (
                        abs(float(br.domain.lo) - float(g.hi)) < 1e-25 or
                        abs(float(br.domain.hi) - float(g.lo)) < 1e-25)
                    assert inside or outside or boundary_graze

    def test_tiling_bound(self, nest19):
        for rs in nest19.levels:
            with working_precision(256):
                total = mpfr(0)
                for b in rs.branches:
                    total += b.domain.hi - b.domain.lo
                if rs.central is not None:
                    total += rs.central.domain.hi - rs.central.domain.lo
                width = rs.interval.hi - rs.interval.lo
                assert total <= width * (1 + mpfr(2) ** -64)
                assert abs(total + mpfr(rs.uncovered) - width) <= \
                    width * mpfr(2) ** -64

    def test_boundary_anchoring(self, nest19):
        # branch endpoints map to the level boundary at the return time
        for rs in nest19.levels[:2]:
            beta = rs.interval.hi
            with working_precision(256):
                for br in list(rs.branches)[:10]:
                    for e in (br.domain.lo, br.domain.hi):
                        y = orbit_point(rs.param.a, e, br.return_time)
                        assert min(abs(y - beta), abs(y + beta)) < mpfr(2) ** -180

    def test_build_next_level_public(self, m19):
        rs1 = build_first_level(m19)
        rs2 = build_next_level(rs1)
        assert rs2.level == 2
        assert rs2.v == 15


class TestVerdictsAndReports:
    def test_simple_detection(self, nest19):
        v = detect_central_and_simple(nest19, window=2)
        assert v.verdict == "Simple"
        assert v.central_flags == (False, False)

    def test_cascade_detection(self):
        rep = build_nest(invariant_interval("1.401155"), 6)
        assert rep.termination is Termination.RENORMALIZATION_DETECTED
        assert "period 2" in rep.termination_detail

    def test_empty_report_undetermined(self):
        rep = build_nest(invariant_interval("0.5"), 3)
        v = detect_central_and_simple(rep)
        assert v.verdict == "Undetermined"

    def test_hyperbolic_outside_positive(self):
        rs = build_first_level(invariant_interval(2), NestBudgets(time_budget=8))
        val = hyperbolic_outside(rs, "1.5", 20)
        assert float(val) > 0.3

    def test_hyperbolic_outside_degenerate_zero(self, nest19):
        assert float(hyperbolic_outside(nest19.levels[0], "0.9", 0)) == 0.0

    def test_orbit_enters_nest_matches_scan(self, nest19):
        rs = nest19.levels[0]
        x0 = 0.9
        with pytest.raises(OrbitEntersNest) as ei:
            hyperbolic_outside(rs, repr(x0), 50)
        # brute-force first-entry index
        w = float(rs.central.domain.hi)
        x, k = x0, 0
        while not (-w <= x <= w):
            x = 1.9 - x * x
            k += 1
        assert ei.value.entry_time == k

    def test_json_report_schema(self, nest19):
        d = nest_report_to_dict(nest19)
        assert d["termination"] == "DepthReached"
        assert len(d["levels"]) == 3
        lv1 = d["levels"][0]
        for key in ("interval", "branches", "central", "c", "v", "tau", "s",
                    "gape", "uncovered", "dstar"):
            assert key in lv1
        assert lv1["branches"][0].keys() == {"index", "lo", "hi", "time",
                                             "orientation"}
        # decimal strings round-trip at the working precision
        with working_precision(256):
            lo = mpfr(lv1["interval"]["lo"], 256)
            assert lo == nest19.levels[0].interval.lo

    def test_deterministic_rebuild(self, m19, nest19):
        rep2 = build_nest(invariant_interval("1.9"), 3)
        d1, d2 = nest_report_to_dict(nest19), nest_report_to_dict(rep2)
        assert d1 == d2
