import math

import pytest

from quadnest.constants import (count_is_sparse, faithful_constants,
                                practical_constants)
from quadnest.errors import QuadnestError


def test_gamma_sequences_interlace():
    c = practical_constants()
    for n in range(1, 50):
        assert c.gamma_n(n) > c.gamma_tilde_n(n) > c.gamma_n(n + 1)
    assert abs(c.gamma_n(10 ** 6) - c.gamma) < 1e-5


def test_practical_defaults():
    c = practical_constants()
    assert c.profile == "practical"
    assert abs(c.a - 0.5) < 1e-15 and abs(c.b - 2.0) < 1e-15
    assert abs(c.a_tilde * c.b_tilde - 1.0) < 1e-12
    assert c.a <= c.a_tilde < 1 < c.b_tilde <= c.b


def test_practical_validation():
    with pytest.raises(QuadnestError):
        practical_constants(a=2.0, b=0.5)


def test_faithful_ladder_log_relations():
    c = faithful_constants(gamma=1.01, gamma0=1.001)
    # a-tilde = 1/b-tilde, a = 1/b, ln b = 1000 b-tilde ln(b-tilde)
    assert c.ln_a_tilde == -c.ln_b_tilde
    assert c.ln_a == -c.ln_b
    bt = math.exp(c.ln_b_tilde)
    assert abs(c.ln_b - 1000 * bt * c.ln_b_tilde) < 1e-6 * abs(c.ln_b)
    # b-tilde = 1000 k(2 gamma - 1)^1000
    k2 = 2 * 1.01 - 1
    assert abs(c.ln_b_tilde - (math.log(1000) + 1000 * math.log(k2))) < 1e-12
    # the plain-float views overflow gracefully
    assert c.b == math.inf and c.a == 0.0


def test_faithful_requires_gap():
    with pytest.raises(QuadnestError):
        faithful_constants(gamma=1.0, gamma0=1.0)


def test_count_sparsity_log_space():
    # count < 6 * 2^n * c^e * k, cross-checked directly
    for (count, n, c, e, k) in ((3, 2, 0.1, 0.5, 10), (100, 1, 0.2, 2.0, 5),
                                (0, 3, 0.01, 5.0, 1), (7, 2, 0.5, 0.25, 7)):
        direct = count < 6 * 2 ** n * c ** e * k
        assert count_is_sparse(count, n, math.log(c), e, k) == direct
