"""Quasisymmetric test maps and certified bounds for γ-capacities.

The γ-capacity p_γ(X|I) = sup_h |h(X)|/|h(I)| over γ-quasisymmetric maps is
a sup over an infinite-dimensional family and cannot be computed exactly.
This module returns certified two-sided bounds:

* lower bound: the best ratio achieved by an explicit test family (affine,
  boundary- and interior-anchored power laws, and slope-bounded piecewise
  linear maps adapted to the set), every member of which satisfies the
  two-sided distortion inequality
      (1/k)(|J|/|I|)^k <= |h(J)|/|h(I)| <= (k |J|/|I|)^(1/k)
  with k = k(γ);

* upper bound: the gap bound (no γ-qs map can shrink a complementary gap
  below (1/k) g^k of the total) combined with the hull bound, both of which
  hold for every map satisfying the inequality and are monotone under set
  inclusion.

k(γ) is the family-consistent constant from ``constants.k_of_gamma``; all
downstream uses in the nest statistics are one-sided (upper bounds on bad
sets), which the gap/hull bound serves, while the lower bound quantifies the
slack.  Arithmetic runs in mpfr so the γ=1 collapse to normalized measure is
exact to well below 2^-60.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

from .constants import PaperConstants, k_of_gamma
from .errors import (CoverViolation, GammaOutOfRange, HypothesisViolated,
                     QuadnestError, VerificationFailed)
from .precision import PrecisionInterval, ctx_down, ctx_up, to_mpfr, working_precision

_CAP_BITS = 192


@dataclass(frozen=True)
class IntervalSet:
    """A finite disjoint union of closed subintervals of an ambient interval."""

    ambient: PrecisionInterval
    parts: tuple

    def __post_init__(self):
        prev_hi = None
        for p in self.parts:
            if not self.ambient.contains_interval(p):
                raise QuadnestError(f"part {p} outside ambient {self.ambient}")
            if prev_hi is not None and p.lo < prev_hi:
                raise QuadnestError("parts must be sorted and disjoint")
            prev_hi = p.hi

    @staticmethod
    def of(ambient, parts, bits: int = _CAP_BITS) -> "IntervalSet":
        amb = ambient if isinstance(ambient, PrecisionInterval) \
            else PrecisionInterval.of(*ambient, bits)
        ps = tuple(p if isinstance(p, PrecisionInterval)
                   else PrecisionInterval.of(*p, bits)
                   for p in sorted(parts, key=lambda q: float(q[0]) if not isinstance(q, PrecisionInterval) else float(q.lo)))
        return IntervalSet(amb, ps)

    def measure_ratio(self, bits: int = _CAP_BITS) -> mpfr:
        """|X| / |ambient| at round-to-nearest."""
        with working_precision(bits):
            total = mpfr(0)
            for p in self.parts:
                total += p.hi - p.lo
            return total / (self.ambient.hi - self.ambient.lo)

    def normalized(self, bits: int = _CAP_BITS):
        """Parts as (a_i, b_i) in [0, 1] and the gap lengths between them."""
        with working_precision(bits):
            lo, hi = self.ambient.lo, self.ambient.hi
            width = hi - lo
            parts = [((p.lo - lo) / width, (p.hi - lo) / width)
                     for p in self.parts]
            gaps = []
            prev = mpfr(0)
            for a, b in parts:
                if a > prev:
                    gaps.append(a - prev)
                prev = b
            if prev < 1:
                gaps.append(1 - prev)
            return parts, gaps


@dataclass(frozen=True)
class CapacityBound:
    """Certified enclosure lower <= p_γ(X|I) <= upper."""

    gamma: float
    lower: mpfr
    upper: mpfr
    effort: int = 0
    family_descriptor: str = ""
    gap_count: int = 0

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "lower": float(self.lower),
                "upper": float(self.upper), "effort": self.effort,
                "family_descriptor": self.family_descriptor,
                "gap_count": self.gap_count}


class QsTestMap:
    """A test homeomorphism of [0, 1], normalized to h(0)=0, h(1)=1.

    kinds: "affine"; "power" (exponent κ, anchored at the left or right
    endpoint); "interior-power" (power law centered at an interior anchor);
    "pl" (piecewise linear with slope ratio at most k^(1/k), the bound under
    which such maps satisfy the two-sided k-inequality).

    Construction verifies the k(γ) inequality on a grid of subintervals and
    raises VerificationFailed otherwise.
    """

    def __init__(self, kind: str, gamma_budget: float, params=(),
                 verify_grid: int = 24, _skip_verify: bool = False):
        if gamma_budget < 1:
            raise GammaOutOfRange("gamma_budget must be >= 1")
        self.kind = kind
        self.gamma_budget = float(gamma_budget)
        self.k = k_of_gamma(gamma_budget)
        self.params = params
        if kind == "pl":
            bps, slopes = params
            if len(slopes) != len(bps) + 1:
                raise QuadnestError("pl map needs one slope per cell")
            pts = [mpfr(0)] + [to_mpfr(b, _CAP_BITS) for b in bps] + [mpfr(1)]
            with working_precision(_CAP_BITS):
                total = mpfr(0)
                images = [mpfr(0)]
                for i, s in enumerate(slopes):
                    total += to_mpfr(s, _CAP_BITS) * (pts[i + 1] - pts[i])
                    images.append(total)
                self._pl_pts = pts
                self._pl_img = [im / total for im in images]
        if not _skip_verify:
            self._verify(verify_grid)

    def __call__(self, t):
        with working_precision(_CAP_BITS):
            t = to_mpfr(t, _CAP_BITS)
            if self.kind == "affine":
                return t
            if self.kind == "power":
                kappa, side = self.params
                kp = to_mpfr(kappa, _CAP_BITS)
                if side == "left":
                    return t ** kp
                return 1 - (1 - t) ** kp
            if self.kind == "interior-power":
                c, kappa = self.params
                cv, kp = to_mpfr(c, _CAP_BITS), to_mpfr(kappa, _CAP_BITS)
                scale = cv ** kp + (1 - cv) ** kp
                if t >= cv:
                    return (cv ** kp + (t - cv) ** kp) / scale
                return (cv ** kp - (cv - t) ** kp) / scale
            if self.kind == "pl":
                pts, img = self._pl_pts, self._pl_img
                for i in range(len(pts) - 1):
                    if t <= pts[i + 1]:
                        seg = pts[i + 1] - pts[i]
                        frac = (t - pts[i]) / seg if seg > 0 else mpfr(0)
                        return img[i] + frac * (img[i + 1] - img[i])
                return mpfr(1)
            raise QuadnestError(f"unknown test-map kind {self.kind}")

    def ratio(self, a, b) -> mpfr:
        """|h([a, b])| for normalized a <= b."""
        return self(b) - self(a)

    def _verify(self, grid: int):
        k = to_mpfr(self.k, _CAP_BITS)
        with working_precision(_CAP_BITS):
            slack = gmpy2.exp2(-_CAP_BITS // 2)
            for i in range(grid):
                for j in range(i + 1, grid + 1):
                    a = mpfr(i) / grid
                    b = mpfr(j) / grid
                    r = b - a
                    hr = self.ratio(a, b)
                    lo_bound = (r ** k) / k
                    hi_bound = (k * r) ** (1 / k)
                    if hr < lo_bound - slack or hr > hi_bound + slack:
                        raise VerificationFailed(
                            f"{self.kind}{self.params} violates the k({self.gamma_budget}) "
                            f"inequality on [{float(a)}, {float(b)}]")

    def __repr__(self):
        return f"QsTestMap({self.kind}, k={self.k:.3g}, params={self.params})"


@lru_cache(maxsize=4096)
def _cached_map(kind: str, gamma: float, params) -> QsTestMap:
    return QsTestMap(kind, gamma, params,
                     verify_grid=16 if kind == "interior-power" else 24,
                     _skip_verify=kind != "interior-power")


def _candidate_maps(X_norm, gamma: float, effort: int):
    """The (nested-in-effort) family searched for the lower bound."""
    k = k_of_gamma(gamma)
    yield _cached_map("affine", gamma, ())
    if k <= 1:
        return
    # power-law exponents on a dyadic grid of [1/k, k], nested as effort grows
    denom = 2 ** min(effort, 5)
    exps = sorted({k ** (i / denom) for i in range(-denom, denom + 1)})
    for kappa in exps:
        if abs(kappa - 1) < 1e-12:
            continue
        for side in ("left", "right"):
            yield _cached_map("power", gamma, (kappa, side))
    # slope-bounded piecewise-linear stretch of the parts
    parts, _ = X_norm
    if parts and effort >= 1:
        M = k ** (1.0 / k)
        bps = []
        slopes = [1.0]
        for a, b in parts:
            if a > 0:
                bps.append(a)
                slopes.append(M)
            elif slopes:
                slopes[-1] = M
            if b < 1:
                bps.append(b)
                slopes.append(1.0)
        if bps:
            try:
                yield QsTestMap("pl", gamma, (tuple(bps), tuple(slopes)),
                                _skip_verify=True)
            except QuadnestError:
                pass
    # interior-anchored power laws (grid-verified at construction)
    if effort >= 2 and parts:
        denom2 = 2 ** min(effort - 1, 3)
        anchors = (0.25, 0.5, 0.75) if effort >= 3 else (0.5,)
        for c in anchors:
            for kappa in sorted({k ** (i / denom2) for i in range(-denom2, denom2 + 1)}):
                if abs(kappa - 1) < 1e-12:
                    continue
                try:
                    yield _cached_map("interior-power", gamma, (c, kappa))
                except VerificationFailed:
                    continue


def capacity_bounds(X: IntervalSet, gamma: float, effort: int = 2) -> CapacityBound:
    """Certified two-sided bounds for p_γ(X|I).

    effort=0 returns the trivial [|X|/|I|, 1].  γ=1 collapses exactly to the
    normalized measure (1-qs maps preserve ratios in this family).  The
    lower bound is nondecreasing and the upper bound nonincreasing in effort.
    """
    if gamma < 1:
        raise GammaOutOfRange(f"gamma must be >= 1, got {gamma}")
    mr = X.measure_ratio()
    if not X.parts:
        return CapacityBound(gamma, mpfr(0), mpfr(0), effort, "empty", 0)
    if effort == 0:
        return CapacityBound(gamma, mr, mpfr(1), 0, "trivial", 0)
    norm = X.normalized()
    parts, gaps = norm
    if gamma == 1.0:
        return CapacityBound(gamma, mr, mr, effort, "affine (1-qs collapse)",
                             len(gaps))
    k = k_of_gamma(gamma)
    with working_precision(_CAP_BITS):
        best = mpfr(0)
        best_desc = "affine"
        for h in _candidate_maps(norm, gamma, effort):
            total = mpfr(0)
            for a, b in parts:
                total += h.ratio(a, b)
            if total > best:
                best = total
                best_desc = h.kind
        # gap bound, rounded conservatively: sum of (1/k) g^k rounded down
        dn, up = ctx_down(_CAP_BITS), ctx_up(_CAP_BITS)
        kv = to_mpfr(k, _CAP_BITS)
        gap_sum = mpfr(0)
        for g in gaps:
            gap_sum = dn.add(gap_sum, dn.div(dn.exp(dn.mul(kv, dn.log(g))), kv))
        gap_bound = up.sub(mpfr(1), gap_sum)
        # hull bound: X inside its convex hull H, |h(X)| <= (k |H|)^(1/k)
        hull = parts[-1][1] - parts[0][0]
        hull_bound = up.exp(up.div(up.log(up.mul(kv, hull)), kv))
        upper = min(mpfr(1), gap_bound, hull_bound)
        lower = min(best, upper)
        return CapacityBound(gamma, max(lower, mr), upper, effort,
                             f"affine+power+pl (best: {best_desc}); k(g)=g",
                             len(gaps))


def tree_decompose_bound(X: IntervalSet, cover: IntervalSet, per_piece: dict,
                         gamma: float, effort: int = 2) -> mpfr:
    """Upper bound p_γ(X|I) <= p_γ(∪ cover | I) · max_j p_γ(X ∩ J_j | J_j).

    ``per_piece`` maps cover-part index -> CapacityBound for X ∩ part
    relative to the part.  Raises CoverViolation when X is not contained in
    the union of the cover parts.
    """
    for p in X.parts:
        if not any(cp.contains_interval(p) for cp in cover.parts):
            raise CoverViolation(f"part {p} not inside any cover piece")
    cover_bound = capacity_bounds(cover, gamma, effort).upper
    with working_precision(_CAP_BITS):
        if not per_piece:
            return mpfr(0)
        worst = max(to_mpfr(b.upper if isinstance(b, CapacityBound) else b,
                            _CAP_BITS)
                    for b in per_piece.values())
        return min(mpfr(1), ctx_up(_CAP_BITS).mul(cover_bound, worst))


def pullback_capacity_bound(delta: float, n: int, consts: PaperConstants,
                            trace: dict | None = None) -> float:
    """Capacity bound for the central-branch pullback of a small set.

    Given p_{γ̃_n}(X | I_n) < δ with δ < n^{-b}, the pullback
    (R_n|_{I_{n+1}})^{-1}(X) has p_{γ_{n+1}}-capacity below δ^(ã³).  Raises
    HypothesisViolated outside that regime.  ``trace`` (optional dict) gets
    the internal construction constants in log form.
    """
    if not 0 < delta < 1:
        raise QuadnestError("delta must be in (0, 1)")
    if n < 1:
        raise QuadnestError("n must be >= 1")
    ln_delta = math.log(delta)
    # hypothesis: δ < n^{-b}  <=>  ln δ < -b ln n
    if n == 1:
        hyp_ok = True   # n^{-b} = 1: any δ < 1 qualifies
    else:
        ln_rhs = -math.exp(consts.ln_b) * math.log(n) if consts.ln_b < 700 \
            else -math.inf
        hyp_ok = ln_delta < ln_rhs
    if not hyp_ok:
        raise HypothesisViolated(
            f"pullback bound needs delta < n^-b; got delta={delta}, n={n}")
    a3 = math.exp(3 * consts.ln_a_tilde)
    if trace is not None:
        trace["ln_neighborhood_V"] = consts.a_tilde * ln_delta \
            if consts.ln_a_tilde > -700 else 0.0
        trace["ln_subdivision_count"] = (
            consts.b_tilde * math.log(max(n, 2)) - consts.a_tilde * ln_delta
            if consts.ln_b_tilde < 700 else math.inf)
        trace["exponent"] = a3
    return math.exp(a3 * ln_delta)
