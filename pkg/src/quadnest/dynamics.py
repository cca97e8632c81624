"""Exact-enough evaluation of the quadratic family f_a(x) = a - x^2.

Orbits, derivatives along orbits, certified distortion bounds, fixed points
and attracting-cycle certification.  Scalar work is round-to-nearest at the
parameter's precision; everything advertised as certified goes through
outward-rounded interval arithmetic.

Raw-mpfr helpers (``orbit_point`` and friends) assume the caller holds a
``working_precision`` block; the public operations set it up themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .errors import (InconclusiveCycle, NotDiffeomorphic, ParamOutOfRange,
                     QuadnestError, VerificationFailed)
from .precision import (DEFAULT_PRECISION, PrecisionInterval, PrecisionReal,
                        ctx_up, deriv_enclosure, point_enclosure, quad_image,
                        to_mpfr, working_precision)


@dataclass(frozen=True)
class MapParam:
    """A parameter a in [-1/4, 2] together with its invariant interval [-beta, beta].

    beta is the positive number with f_a([-beta, beta]) contained in itself;
    -beta is a fixed point of f_a.  (beta solves beta^2 - beta - a = 0, i.e.
    beta = (1 + sqrt(1+4a))/2.)
    """

    a: mpfr
    beta: mpfr
    precision_bits: int

    @property
    def interval(self) -> PrecisionInterval:
        neg = ctx_up(self.precision_bits).minus(self.beta)
        return PrecisionInterval(neg, self.beta)

    def __repr__(self):
        return f"MapParam(a={float(self.a):.8g}, beta={float(self.beta):.8g}, bits={self.precision_bits})"


def invariant_interval(a, precision_bits: int = DEFAULT_PRECISION) -> MapParam:
    """Build the MapParam for ``a``, verifying invariance of [-beta, beta].

    Raises ParamOutOfRange for a outside [-1/4, 2] and VerificationFailed if
    the outward-rounded containment check f(I) in I fails beyond boundary
    rounding slack.
    """
    with working_precision(precision_bits):
        av = to_mpfr(a, precision_bits)
        if not (mpfr("-0.25") <= av <= 2):
            raise ParamOutOfRange(f"a={av} outside [-1/4, 2]")
        beta = (1 + gmpy2.sqrt(1 + 4 * av)) / 2
        # Invariance check: the true image satisfies f(I) in I with the
        # boundary fixed point -beta attained, so the outward image may
        # exceed I by rounding only.  Allow a few ulps of slack.
        iv = PrecisionInterval(-beta, beta)
        img = quad_image(av, iv, precision_bits)
        slack = gmpy2.exp2(-precision_bits + 8) * max(beta, mpfr(1))
        if img.lo < -beta - slack or img.hi > beta + slack:
            raise VerificationFailed(
                f"f(I) not contained in I at {precision_bits} bits: image {img}")
        return MapParam(av, beta, precision_bits)


# ---------------------------------------------------------------------------
# raw-mpfr orbit helpers (caller holds working_precision)
# ---------------------------------------------------------------------------

def orbit_point(a: mpfr, x: mpfr, t: int) -> mpfr:
    """f^t(x), round-to-nearest at ambient precision."""
    for _ in range(t):
        x = a - x * x
    return x


def orbit_with_deriv(a: mpfr, x: mpfr, t: int) -> tuple[mpfr, mpfr]:
    """(f^t(x), Df^t(x)) by the chain rule."""
    d = mpfr(1)
    for _ in range(t):
        d = d * (-2 * x)
        x = a - x * x
    return x, d


def solve_monotone_iterate(a: mpfr, t: int, xlo: mpfr, xhi: mpfr, y: mpfr,
                           increasing: bool, bisect_steps: int = 14,
                           max_newton: int = 120) -> mpfr:
    """Solve f^t(x) = y on [xlo, xhi] where f^t is monotone.

    Bracketed bisection to localize, then safeguarded Newton.  The returned
    point has residual at the working-precision noise floor; the bracket is
    never abandoned, so the result is always inside [xlo, xhi].
    """
    lo, hi = xlo, xhi
    for _ in range(bisect_steps):
        mid = (lo + hi) / 2
        if (orbit_point(a, mid, t) > y) == increasing:
            hi = mid
        else:
            lo = mid
    x = (lo + hi) / 2
    prec = gmpy2.get_context().precision
    eps = gmpy2.exp2(-prec + 12)
    scale = max(abs(lo), abs(hi), mpfr(1))
    for _ in range(max_newton):
        fx, dfx = orbit_with_deriv(a, x, t)
        r = fx - y
        if r == 0:
            return x
        if (r > 0) == increasing:
            hi = x
        else:
            lo = x
        xn = x - r / dfx if dfx != 0 else None
        if xn is None or not (lo <= xn <= hi):
            xn = (lo + hi) / 2
        if hi - lo <= eps * scale or xn == x:
            return xn
        x = xn
    return x


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitSample:
    """An orbit segment with log-derivative prefix sums.

    points[k] = f^k(x0); logderiv_prefix[k] = ln|Df^k(x0)| (natural log),
    with entries None from the first index after an exact hit of 0
    (``undefined_from``).  Raw mpfr values at ``precision_bits``.
    """

    x0: mpfr
    length: int
    points: tuple
    logderiv_prefix: tuple
    precision_bits: int
    undefined_from: int | None = None


def iterate(m: MapParam, x0, n: int) -> OrbitSample:
    """Orbit of x0 of length n with ln|Df^k| prefix sums."""
    if n < 0:
        raise QuadnestError("n must be >= 0")
    with working_precision(m.precision_bits):
        x = to_mpfr(x0, m.precision_bits)
        if not (-m.beta <= x <= m.beta):
            raise QuadnestError(f"x0={x} outside the invariant interval")
        pts = [x]
        logs = [mpfr(0)]
        undefined_from = None
        for k in range(n):
            if undefined_from is None:
                if x == 0:
                    undefined_from = k + 1
                    logs.append(None)
                else:
                    logs.append(logs[-1] + gmpy2.log(2 * abs(x)))
            else:
                logs.append(None)
            x = m.a - x * x
            pts.append(x)
        return OrbitSample(pts[0], n, tuple(pts), tuple(logs),
                           m.precision_bits, undefined_from)


def distortion(m: MapParam, J: PrecisionInterval, n: int,
               pieces: int = 64, refine_limit: int = 4) -> PrecisionReal:
    """Certified upper bound for sup_J |Df^n| / inf_J |Df^n|.

    Subdivides J into ``pieces`` equal parts (power of two for grid
    alignment), encloses |Df^n| on each with outward interval arithmetic and
    refines parts whose lower bound collapses to 0.  Raises NotDiffeomorphic
    when a critical preimage is detected inside J (sign change of Df^n, or an
    unresolvable zero enclosure).
    """
    if n < 0:
        raise QuadnestError("n must be >= 0")
    bits = m.precision_bits
    with working_precision(bits):
        if n == 0 or J.lo == J.hi:
            return PrecisionReal(mpfr(1), bits)
        # precondition check: sign-constancy of Df^n at the endpoints
        s_lo = _deriv_sign_certified(m, J.lo, n)
        s_hi = _deriv_sign_certified(m, J.hi, n)
        if s_lo != 0 and s_hi != 0 and s_lo != s_hi:
            raise NotDiffeomorphic("Df^n changes sign between the endpoints of J")
        lo_bounds, hi_bounds = [], []
        width = (J.hi - J.lo) / pieces
        stack = [(J.lo + i * width, J.lo + (i + 1) * width, 0) for i in range(pieces)]
        signs = []
        while stack:
            plo, phi, depth = stack.pop()
            piv = PrecisionInterval(min(plo, phi), max(plo, phi))
            dlo, dhi, _ = deriv_enclosure(m.a, piv, n, bits)
            if dlo == 0:
                if depth >= refine_limit:
                    _, dmid = orbit_with_deriv(m.a, piv.mid(), n)
                    if dmid == 0:
                        raise NotDiffeomorphic("critical preimage inside J")
                    raise NotDiffeomorphic(
                        "cannot certify a positive lower derivative bound on a sub-piece")
                mid = (plo + phi) / 2
                stack.append((plo, mid, depth + 1))
                stack.append((mid, phi, depth + 1))
                continue
            _, dmid = orbit_with_deriv(m.a, piv.mid(), n)
            signs.append(1 if dmid > 0 else -1)
            lo_bounds.append(dlo)
            hi_bounds.append(dhi)
        if signs and (min(signs) != max(signs)):
            raise NotDiffeomorphic("Df^n changes sign inside J")
        up = ctx_up(bits)
        bound = up.div(max(hi_bounds), min(lo_bounds))
        return PrecisionReal(max(bound, mpfr(1)), bits)


def _deriv_sign_certified(m: MapParam, x: mpfr, n: int) -> int:
    """Sign of Df^n at x from an interval enclosure; 0 when inconclusive."""
    bits = m.precision_bits
    iv = point_enclosure(x, bits, ulps=2)
    dlo, dhi, _ = deriv_enclosure(m.a, iv, n, bits)
    if dlo > 0:
        _, d = orbit_with_deriv(m.a, x, n)
        return 1 if d > 0 else -1
    return 0


def find_fixed_points(m: MapParam) -> tuple[PrecisionReal, PrecisionReal]:
    """Both fixed points of f_a, as roots of x^2 + x - a = 0 (negative, positive).

    The positive one is the orientation-reversing candidate p with
    Df(p) = -2p.
    """
    bits = m.precision_bits
    with working_precision(bits):
        disc = gmpy2.sqrt(1 + 4 * m.a)
        q = (-1 - disc) / 2
        p = (-1 + disc) / 2
        return PrecisionReal(q, bits), PrecisionReal(p, bits)


@dataclass(frozen=True)
class CycleReport:
    """A certified attracting (or superattracting) cycle."""

    period: int
    points: tuple
    multiplier: PrecisionInterval   # certified enclosure of |Df^period|
    attracting: bool
    transient_steps: int
    precision_bits: int


def find_attracting_cycle(m: MapParam, max_period: int = 64,
                          max_transient: int = 100_000) -> CycleReport | None:
    """Search the critical orbit for convergence to an attracting cycle.

    Convergence is detected heuristically (points within 2^(-bits/4) merge),
    then always re-certified: an interval Newton step isolates the periodic
    point and the multiplier |Df^period| is enclosed with outward rounding.
    Returns None when no attracting cycle is reached within the budgets
    (e.g. a=2, where the critical orbit lands on a repelling fixed point);
    raises InconclusiveCycle when the multiplier enclosure straddles 1.
    """
    if max_period < 1:
        raise QuadnestError("max_period must be >= 1")
    bits = m.precision_bits
    with working_precision(bits):
        tol = gmpy2.exp2(-(bits // 4))
        x = mpfr(0)
        window: list[mpfr] = []
        detected = None
        scan_stride = max(1, max_period // 4)
        for t in range(1, max_transient + 1):
            x = m.a - x * x
            window.append(x)
            if len(window) > 2 * max_period + 1:
                window.pop(0)
            if t >= max_period and t % scan_stride == 0:
                for q in range(1, min(max_period, len(window) - 1) + 1):
                    if abs(window[-1] - window[-1 - q]) <= tol * max(1, abs(window[-1])):
                        detected = (q, window[-1], t)
                        break
                if detected:
                    break
        if detected is None:
            return None
        q, xhat, t = detected
        refined = _certify_periodic_point(m, xhat, q)
        if refined is None:
            return None
        point_iv = refined
        # reduce to the minimal period: a fixed point of f^q may be periodic
        # with any divisor period (alternating convergence often trips q=2
        # before q=1 for a negative multiplier)
        mid = point_iv.mid()
        for qd in range(1, q):
            if q % qd:
                continue
            y = orbit_point(m.a, mid, qd)
            if abs(y - mid) <= max(8 * point_iv.width(), tol * max(1, abs(mid))):
                sub = _certify_periodic_point(m, mid, qd)
                if sub is not None:
                    q, point_iv = qd, sub
                    break
        mlo, mhi, _ = deriv_enclosure(m.a, point_iv, q, bits)
        mult = PrecisionInterval(mlo, mhi)
        if mhi < 1:
            pts = [point_iv.mid()]
            for _ in range(q - 1):
                pts.append(m.a - pts[-1] * pts[-1])
            return CycleReport(q, tuple(pts), mult, True, t, bits)
        if mlo > 1:
            return None  # converged numerically onto a repelling orbit (e.g. a=2)
        raise InconclusiveCycle(
            f"multiplier enclosure [{float(mlo)}, {float(mhi)}] straddles 1")


def _certify_periodic_point(m: MapParam, xhat: mpfr, q: int,
                            max_iter: int = 64) -> PrecisionInterval | None:
    """Interval Newton for g(x) = f^q(x) - x around xhat.

    Returns a certified enclosure of the periodic point, or None when the
    contraction N(X) in X cannot be established.
    """
    bits = m.precision_bits
    r = max(abs(xhat), mpfr(1)) * gmpy2.exp2(-(bits // 4) + 4)
    X = PrecisionInterval(xhat - r, xhat + r)
    certified = False
    for _ in range(max_iter):
        mid = X.mid()
        fmid, _ = orbit_with_deriv(m.a, mid, q)
        gm = fmid - mid
        dlo, dhi, _ = _signed_deriv_enclosure(m.a, X, q, bits)
        glo, ghi = dlo - 1, dhi - 1
        if glo <= 0 <= ghi:
            return X if certified else None
        # N = mid - gm / g'(X), interval division
        cands = [mid - gm / glo, mid - gm / ghi]
        N = PrecisionInterval(min(cands), max(cands))
        if X.contains_interval(N):
            certified = True
            if N.width() >= X.width() / 2:
                return N
            X = N
        else:
            lo = max(X.lo, N.lo)
            hi = min(X.hi, N.hi)
            if not lo <= hi:
                return None
            X = PrecisionInterval(lo, hi)
    return X if certified else None


def _signed_deriv_enclosure(a: mpfr, iv: PrecisionInterval, n: int, bits: int):
    """Signed enclosure of Df^n over iv (product of -2*x_k enclosures)."""
    from .precision import ctx_down
    dn, up = ctx_down(bits), ctx_up(bits)
    lo, hi = mpfr(1), mpfr(1)
    cur = iv
    for _ in range(n):
        flo, fhi = -2 * cur.hi, -2 * cur.lo   # ambient nearest; widen below
        flo, fhi = gmpy2.next_below(min(flo, fhi)), gmpy2.next_above(max(flo, fhi))
        cands = [dn.mul(lo, flo), dn.mul(lo, fhi), dn.mul(hi, flo), dn.mul(hi, fhi)]
        cands_up = [up.mul(lo, flo), up.mul(lo, fhi), up.mul(hi, flo), up.mul(hi, fhi)]
        lo, hi = min(cands), max(cands_up)
        cur = quad_image(a, cur, bits)
    return lo, hi, None
