"""Extended-precision scalars and outward-rounded intervals on top of MPFR.

All scalar arithmetic is round-to-nearest at an explicit bit precision;
interval arithmetic rounds outward so that the true image of a set is always
contained in the computed one.  Two usage styles coexist:

* ``PrecisionReal`` / ``PrecisionInterval`` wrap values for API surfaces and
  carry their precision explicitly.  A binary operation between two wrapped
  values is performed at the max of the two precisions.

* Hot loops work on raw ``gmpy2.mpfr`` inside a ``working_precision(bits)``
  block, which sets the per-thread MPFR context.  This matters: a bare
  ``-x`` or ``x + y`` on mpfr values rounds to the *ambient thread context*
  (53 bits by default), so any code that touches raw mpfr values must run
  inside such a block or go through the explicit context helpers below.

Directed-rounding operations always go through cached context objects and are
therefore safe regardless of the ambient context.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

from .errors import QuadnestError

DEFAULT_PRECISION = 256
MIN_PRECISION = 64


@lru_cache(maxsize=None)
def ctx_nearest(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundToNearest)


@lru_cache(maxsize=None)
def ctx_down(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundDown)


@lru_cache(maxsize=None)
def ctx_up(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundUp)


@contextlib.contextmanager
def working_precision(bits: int):
    """Set the thread MPFR context to ``bits`` (round-to-nearest)."""
    if bits < MIN_PRECISION:
        raise QuadnestError(f"precision_bits must be >= {MIN_PRECISION}, got {bits}")
    saved = gmpy2.get_context()
    gmpy2.set_context(gmpy2.context(precision=bits, round=gmpy2.RoundToNearest))
    try:
        yield
    finally:
        gmpy2.set_context(saved)


def to_mpfr(x, bits: int) -> mpfr:
    """Convert x (str, int, float, mpfr, PrecisionReal) to mpfr at ``bits``."""
    if isinstance(x, PrecisionReal):
        x = x.value
    return mpfr(x, bits)


def exact_decimal(x: mpfr, bits: int | None = None) -> str:
    """Decimal string that round-trips at the value's precision."""
    if bits is None:
        bits = x.precision
    digits = int(bits * 0.30103) + 3
    return f"{x:.{digits}g}"


@dataclass(frozen=True)
class PrecisionReal:
    """An arbitrary-precision real with explicit precision in bits.

    Binary operations between two PrecisionReals round to nearest at the max
    of the two precisions; mixing with int/float/str coerces the other side.
    """

    value: mpfr
    precision_bits: int

    def __post_init__(self):
        if self.precision_bits < MIN_PRECISION:
            raise QuadnestError(
                f"precision_bits must be >= {MIN_PRECISION}, got {self.precision_bits}")

    @staticmethod
    def of(x, bits: int = DEFAULT_PRECISION) -> "PrecisionReal":
        return PrecisionReal(to_mpfr(x, bits), bits)

    def _coerce(self, other):
        if isinstance(other, PrecisionReal):
            return other
        return PrecisionReal.of(other, self.precision_bits)

    def _binop(self, other, op):
        other = self._coerce(other)
        bits = max(self.precision_bits, other.precision_bits)
        ctx = ctx_nearest(bits)
        return PrecisionReal(op(ctx, self.value, other.value), bits)

    def __add__(self, other):
        return self._binop(other, lambda c, a, b: c.add(a, b))

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, lambda c, a, b: c.sub(a, b))

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        return self._binop(other, lambda c, a, b: c.mul(a, b))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binop(other, lambda c, a, b: c.div(a, b))

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        return PrecisionReal(ctx_nearest(self.precision_bits).minus(self.value),
                             self.precision_bits)

    def __abs__(self):
        return PrecisionReal(ctx_nearest(self.precision_bits).abs(self.value),
                             self.precision_bits)

    def sqrt(self):
        return PrecisionReal(ctx_nearest(self.precision_bits).sqrt(self.value),
                             self.precision_bits)

    def log(self):
        return PrecisionReal(ctx_nearest(self.precision_bits).log(self.value),
                             self.precision_bits)

    def __float__(self):
        return float(self.value)

    def _cmp_val(self, other):
        return other.value if isinstance(other, PrecisionReal) else other

    def __lt__(self, other):
        return self.value < self._cmp_val(other)

    def __le__(self, other):
        return self.value <= self._cmp_val(other)

    def __gt__(self, other):
        return self.value > self._cmp_val(other)

    def __ge__(self, other):
        return self.value >= self._cmp_val(other)

    def __eq__(self, other):
        if isinstance(other, PrecisionReal):
            return self.value == other.value
        return self.value == other

    def __hash__(self):
        return hash((str(self.value), self.precision_bits))

    def __repr__(self):
        return f"PrecisionReal({exact_decimal(self.value, self.precision_bits)}, {self.precision_bits})"


@dataclass(frozen=True)
class PrecisionInterval:
    """Closed interval [lo, hi] of mpfr endpoints, lo <= hi.

    Images under the quadratic family are computed with outward rounding, so
    the true image of the interval is contained in the computed image.
    """

    lo: mpfr
    hi: mpfr

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise QuadnestError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")

    @staticmethod
    def of(lo, hi, bits: int = DEFAULT_PRECISION) -> "PrecisionInterval":
        return PrecisionInterval(to_mpfr(lo, bits), to_mpfr(hi, bits))

    @property
    def precision_bits(self) -> int:
        return max(self.lo.precision, self.hi.precision)

    def width(self) -> mpfr:
        return ctx_up(self.precision_bits).sub(self.hi, self.lo)

    def mid(self) -> mpfr:
        c = ctx_nearest(self.precision_bits)
        return c.div(c.add(self.lo, self.hi), mpfr(2))

    def contains(self, x) -> bool:
        if isinstance(x, PrecisionReal):
            x = x.value
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "PrecisionInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: "PrecisionInterval") -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def __repr__(self):
        return f"[{float(self.lo):.6g}, {float(self.hi):.6g}]"


def quad_image(a: mpfr, iv: PrecisionInterval, bits: int) -> PrecisionInterval:
    """Outward-rounded image of ``iv`` under x -> a - x^2."""
    dn, up = ctx_down(bits), ctx_up(bits)
    lo, hi = iv.lo, iv.hi
    if lo >= 0:
        sq_lo, sq_hi = dn.mul(lo, lo), up.mul(hi, hi)
    elif hi <= 0:
        sq_lo, sq_hi = dn.mul(hi, hi), up.mul(lo, lo)
    else:
        m = max(-lo, hi)
        sq_lo, sq_hi = mpfr(0), up.mul(m, m)
    return PrecisionInterval(dn.sub(a, sq_hi), up.sub(a, sq_lo))


def quad_image_chain(a: mpfr, iv: PrecisionInterval, n: int, bits: int) -> list[PrecisionInterval]:
    """The whole outward chain [iv, f(iv), ..., f^n(iv)]."""
    out = [iv]
    for _ in range(n):
        iv = quad_image(a, iv, bits)
        out.append(iv)
    return out


def point_enclosure(x: mpfr, bits: int, ulps: int = 1) -> PrecisionInterval:
    """Tiny interval around a point: +-ulps units in the last place."""
    lo, hi = x, x
    for _ in range(ulps):
        lo = gmpy2.next_below(lo)
        hi = gmpy2.next_above(hi)
    return PrecisionInterval(lo, hi)


def deriv_enclosure(a: mpfr, iv: PrecisionInterval, n: int, bits: int):
    """Enclosure [lo, hi] of |Df^n| over ``iv``, with the orbit chain used.

    Returns (lo, hi, chain).  lo may be 0 when an orbit enclosure touches 0.
    """
    dn, up = ctx_down(bits), ctx_up(bits)
    two = mpfr(2)
    plo, phi = mpfr(1), mpfr(1)
    chain = [iv]
    cur = iv
    for _ in range(n):
        alo = min(abs(cur.lo), abs(cur.hi)) if not (cur.lo < 0 < cur.hi) else mpfr(0)
        ahi = max(abs(cur.lo), abs(cur.hi))
        plo = dn.mul(plo, dn.mul(two, alo))
        phi = up.mul(phi, up.mul(two, ahi))
        cur = quad_image(a, cur, bits)
        chain.append(cur)
    return plo, phi, chain
