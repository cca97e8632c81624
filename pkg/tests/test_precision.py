import gmpy2
import pytest
from gmpy2 import mpfr

from quadnest.errors import QuadnestError
from quadnest.precision import (PrecisionInterval, PrecisionReal, exact_decimal,
                                quad_image, quad_image_chain, to_mpfr,
                                working_precision)


def test_min_precision_enforced():
    with pytest.raises(QuadnestError):
        PrecisionReal.of(1.0, 32)
    with pytest.raises(QuadnestError):
        with working_precision(16):
            pass


def test_binary_ops_carry_max_precision():
    x = PrecisionReal.of("1.1", 128)
    y = PrecisionReal.of("2.3", 256)
    assert (x + y).precision_bits == 256
    assert (x * y).precision_bits == 256
    assert (y / x).precision_bits == 256
    assert (-x).precision_bits == 128
    assert abs(float(x + y) - 3.4) < 1e-12


def test_arithmetic_deterministic():
    a = PrecisionReal.of("0.1", 192)
    b = PrecisionReal.of("0.7", 192)
    r1 = (a * b + a / b).value
    r2 = (a * b + a / b).value
    assert r1 == r2


def test_interval_order_validated():
    with pytest.raises(QuadnestError):
        PrecisionInterval(mpfr(2), mpfr(1))


def test_exact_decimal_round_trips():
    with working_precision(256):
        x = gmpy2.sqrt(mpfr(2))
    s = exact_decimal(x, 256)
    assert mpfr(s, 256) == x


def test_quad_image_contains_pointwise_images(rng):
    bits = 128
    with working_precision(bits):
        a = mpfr("1.7", bits)
        for _ in range(50):
            lo = rng.uniform(-1.3, 1.2)
            hi = lo + rng.uniform(0, 0.4)
            iv = PrecisionInterval.of(lo, hi, bits)
            img = quad_image(a, iv, bits)
            for t in rng.uniform(0, 1, size=8):
                x = to_mpfr(lo + t * (hi - lo), bits)
                fx = a - x * x
                assert img.lo <= fx <= img.hi


def test_interval_chain_soundness(rng):
    """Pointwise orbits at nearest rounding stay inside the outward chain."""
    bits = 256
    with working_precision(bits):
        for a_f in (1.9, 1.5, 2.0):
            a = mpfr(repr(a_f), bits)
            beta = (1 + gmpy2.sqrt(1 + 4 * a)) / 2
            for _ in range(5):
                c = to_mpfr(rng.uniform(-0.8, 0.8), bits)
                w = to_mpfr(10.0 ** rng.uniform(-30, -5), bits)
                iv = PrecisionInterval(c - w, c + w)
                chain = quad_image_chain(a, iv, 1000, bits)
                for t in (0.0, 0.31, 0.77, 1.0):
                    x = iv.lo + (iv.hi - iv.lo) * to_mpfr(t, bits)
                    for k in range(1, 1001):
                        x = a - x * x
                        if abs(x) > 2 * beta:
                            break
                        assert chain[k].lo <= x <= chain[k].hi
