"""Constant profiles and threshold arithmetic for branch statistics.

The classification thresholds all have the form (6·2^n)·c^e·k or c^e with
c a scaling factor in (0,1) and e an exponent drawn from the constant
ladder (a, b, ã, b̃).  The faithful profile builds the ladder exactly as
the theory prescribes (b̃ from the qs-distortion constant, b = b̃^(1000·b̃),
a = 1/b, ã = 1/b̃), which makes the values astronomically degenerate; they
are therefore carried in natural-log form and all comparisons run in log
space.  The practical profile takes user-chosen exponents (default a = 1/2,
b = 2) so that classifications are exercised meaningfully at desk scale.
Every report records which profile produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import GammaOutOfRange, QuadnestError

LN2 = math.log(2.0)


def k_of_gamma(gamma: float) -> float:
    """Distortion constant k(γ) for the shipped quasisymmetric test family.

    The test family (power laws with exponents in [1/k, k] and slope-bounded
    piecewise-linear maps) satisfies the two-sided bound
        (1/k)(|J|/|I|)^k <= |h(J)|/|h(I)| <= (k|J|/|I|)^(1/k)
    with k = γ, which is the family-consistent choice: monotone in γ and
    k(1) = 1.  Comparisons across implementations should normalize on the
    family descriptor, not on this constant.
    """
    if gamma < 1:
        raise GammaOutOfRange(f"gamma must be >= 1, got {gamma}")
    return float(gamma)


@dataclass(frozen=True)
class PaperConstants:
    """The constant ladder (γ, γ0, k, ã, b̃, a, b) plus the γ_n sequences.

    Exponents are stored as natural logs (``ln_*``); the plain float fields
    are convenience views that overflow to inf/0 under the faithful profile.
    """

    profile: str                  # "practical" | "faithful"
    gamma: float
    gamma0: float
    k_value: float                # k(γ) for the fixed γ
    ln_a: float
    ln_b: float
    ln_a_tilde: float
    ln_b_tilde: float

    @property
    def a(self) -> float:
        return math.exp(self.ln_a) if self.ln_a < 700 else math.inf

    @property
    def b(self) -> float:
        return math.exp(self.ln_b) if self.ln_b < 700 else math.inf

    @property
    def a_tilde(self) -> float:
        return math.exp(self.ln_a_tilde) if self.ln_a_tilde < 700 else math.inf

    @property
    def b_tilde(self) -> float:
        return math.exp(self.ln_b_tilde) if self.ln_b_tilde < 700 else math.inf

    # -- the sequences of quasisymmetric constants --------------------------

    @staticmethod
    def rho(n: int) -> float:
        return (n + 1) / n

    @staticmethod
    def rho_tilde(n: int) -> float:
        return (2 * n + 3) / (2 * n + 1)

    def gamma_n(self, n: int) -> float:
        return self.gamma * self.rho(n)

    def gamma_tilde_n(self, n: int) -> float:
        return self.gamma * self.rho_tilde(n)

    def describe(self) -> dict:
        return {
            "profile": self.profile, "gamma": self.gamma, "gamma0": self.gamma0,
            "k": self.k_value, "ln_a": self.ln_a, "ln_b": self.ln_b,
            "ln_a_tilde": self.ln_a_tilde, "ln_b_tilde": self.ln_b_tilde,
        }


def practical_constants(a: float = 0.5, b: float = 2.0,
                        a_tilde: float | None = None,
                        b_tilde: float | None = None,
                        gamma: float = 2.0, gamma0: float = 1.5) -> PaperConstants:
    """Desk-scale profile with user exponents (defaults a=1/2, b=2)."""
    if not (0 < a <= b):
        raise QuadnestError("need 0 < a <= b")
    if b_tilde is None:
        b_tilde = math.sqrt(b) if b > 1 else b
    if a_tilde is None:
        a_tilde = 1.0 / b_tilde
    return PaperConstants("practical", gamma, gamma0, k_of_gamma(gamma),
                          math.log(a), math.log(b),
                          math.log(a_tilde), math.log(b_tilde))


def faithful_constants(gamma: float = 1.01, gamma0: float = 1.001) -> PaperConstants:
    """The ladder exactly as prescribed, in log space.

    b̃ is pinned at the bottom of its allowed range (1000·k(2γ-1)^1000, a
    strict ``much greater`` in the source has no canonical value); then
    ã = 1/b̃, b = b̃^(1000·b̃), a = 1/b.
    """
    if gamma <= gamma0:
        raise QuadnestError("need gamma > gamma0")
    k2 = k_of_gamma(2 * gamma - 1)
    ln_btilde = math.log(1000.0) + 1000.0 * math.log(k2)
    btilde = math.exp(ln_btilde) if ln_btilde < 700 else math.inf
    # ln b = 1000 * b̃ * ln(b̃)
    if math.isinf(btilde):
        ln_b = math.inf
    else:
        ln_b = 1000.0 * btilde * ln_btilde
    return PaperConstants("faithful", gamma, gamma0, k_of_gamma(gamma),
                          -ln_b, ln_b, -ln_btilde, ln_btilde)


# ---------------------------------------------------------------------------
# log-space threshold helpers
# ---------------------------------------------------------------------------

def pow_log(ln_c: float, exponent: float) -> float:
    """ln(c^exponent) given ln c; tolerates inf exponents."""
    if exponent == 0:
        return 0.0
    return exponent * ln_c


def count_is_sparse(count: int, n: int, ln_c: float, exponent: float,
                    k: int) -> bool:
    """count < (6 · 2^n) · c^exponent · k, evaluated in log space."""
    if count == 0:
        return True
    rhs_ln = math.log(6.0) + n * LN2 + exponent * ln_c + math.log(k)
    return math.log(count) < rhs_ln


def below_power(value: float, ln_c: float, exponent: float) -> bool:
    """value < c^exponent in log space (value > 0 assumed; 0 passes)."""
    if value <= 0:
        return True
    return math.log(value) < exponent * ln_c


def above_power(value: float, ln_c: float, exponent: float) -> bool:
    """value > c^exponent in log space."""
    if value <= 0:
        return False
    return math.log(value) > exponent * ln_c
