"""Regular / Collet-Eckmann classification of quadratic parameters.

The pipeline mirrors the dichotomy: first search for an attracting cycle
(with certified multiplier); otherwise build the principal nest and compute
finite-horizon surrogates for the two asymptotic quantities,

* the derivative-growth exponent along the critical value,
      a_k = ln|Df^k(f(0))| / k,
  whose liminf is estimated by the minimum over a trailing window, and
* the recurrence exponent of the critical orbit,
      -ln|f^n(0)| / ln n,
  whose limsup is estimated by the maximum over the trailing half.

Asymptotic statements are not finitely decidable, so every verdict carries
a two-horizon stability delta and the budgets that produced it.  A verdict
is only Regular when a cycle was certified; a parameter whose nest shows a
central-return cascade is reported Undetermined("cascade") rather than
forced into either class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .constants import PaperConstants, practical_constants
from .dynamics import MapParam, find_attracting_cycle, invariant_interval
from .errors import (CriticalOrbitHitsZero, InconclusiveCycle,
                     InsufficientDepth, QuadnestError)
from .nest import NestBudgets, NestReport, Termination, build_nest
from .precision import DEFAULT_PRECISION, working_precision


@dataclass(frozen=True)
class ExponentTrace:
    """Finite-horizon trace of the Collet-Eckmann exponent."""

    horizon: int
    a_seq: tuple                 # a_k = ln|Df^k(f(0))| / k, k = 1..N (floats)
    e_seq: tuple                 # (n, e_n = a_{v_n - 1}) at nest times
    liminf_estimate: float       # min over the trailing window
    window: int
    precision_bits: int


@dataclass(frozen=True)
class RecurrenceTrace:
    """Finite-horizon trace of the polynomial recurrence exponent."""

    horizon: int
    r_seq: tuple                 # -ln|f^n(0)| / ln n, n = 2..N (floats)
    limsup_estimate: float       # max over the trailing half
    lower_exponent_witness: float    # the profile's a
    upper_exponent_witness: float    # the profile's 3 b^3 context bound
    violations: tuple            # k with |f^k(0)| <= k^(-3 b^3)
    precision_bits: int


def ce_exponent(m: MapParam, N: int, window: int | None = None,
                v_times=()) -> ExponentTrace:
    """Derivative-growth trace along the critical value up to horizon N.

    Raises CriticalOrbitHitsZero (with the hit time) for exactly
    superattracting parameters.  ``v_times`` (nest return times v_n) mark
    where e_n = a_{v_n - 1} is sampled.
    """
    if window is None:
        window = max(1, N // 4)
    if not 1 <= window <= N:
        raise QuadnestError("need 1 <= window <= N")
    bits = m.precision_bits
    with working_precision(bits):
        x = m.a                  # f(0)
        logsum = mpfr(0)
        a_seq = []
        for k in range(1, N + 1):
            if x == 0:
                raise CriticalOrbitHitsZero(
                    f"critical orbit hits 0 exactly at time {k}", k)
            logsum += gmpy2.log(2 * abs(x))
            a_seq.append(float(logsum) / k)
            x = m.a - x * x
        e_seq = tuple((int(v), a_seq[v - 2])
                      for v in v_times if 2 <= v <= N + 1)
        liminf = min(a_seq[N - window:])
        return ExponentTrace(N, tuple(a_seq), e_seq, liminf, window, bits)


def recurrence_exponent(m: MapParam, N: int,
                        consts: PaperConstants | None = None) -> RecurrenceTrace:
    """Closest-return trace -ln|f^n(0)|/ln n up to horizon N (n >= 2).

    Also evaluates the proof-side predicate |f^k(0)| > k^(-3 b^3) at the
    profile constants and records violating times as witnesses.
    """
    if N < 2:
        raise QuadnestError("N must be >= 2")
    consts = consts or practical_constants()
    bits = m.precision_bits
    ln_b = consts.ln_b
    bound_exp = 3.0 * math.exp(3 * ln_b) if ln_b < 230 else math.inf
    with working_precision(bits):
        x = m.a
        r_seq = []
        violations = []
        for n in range(1, N + 1):
            if x == 0:
                raise CriticalOrbitHitsZero(
                    f"critical orbit hits 0 exactly at time {n}", n)
            if n >= 2:
                val = float(-gmpy2.log(abs(x))) / math.log(n)
                r_seq.append(val)
                # predicate |f^n(0)| > n^(-3b^3)  <=>  val < 3 b^3
                if val >= bound_exp:
                    violations.append(n)
            x = m.a - x * x
        tail = r_seq[len(r_seq) // 2:]
        limsup = max(tail) if tail else 0.0
        return RecurrenceTrace(N, tuple(r_seq), limsup,
                               math.exp(consts.ln_a) if consts.ln_a > -700 else 0.0,
                               bound_exp, tuple(violations), bits)


# ---------------------------------------------------------------------------
# recurrence along return branches (nest-based)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReturnRecurrenceRow:
    level: int
    i: int
    abs_return: float            # |R_n^i(0)|
    k_i: int                     # R_n^i|_{I_{n+2}} = f^{k_i}
    distance_ok: bool            # Corollary-style distance inequality
    high_time_ok: bool           # time growth inequality
    ratio_ok: bool | None        # k_i / i > c_{n-1}^(-a/2) / 2 (when applicable)


def return_branch_recurrence(report: NestReport,
                             consts: PaperConstants | None = None) -> tuple:
    """Evaluate the return-branch recurrence inequalities on computed levels.

    For each level n with a recorded landing walk, checks per iterate i:
      distance:   ln|R_n^i(0)| / ln(c_{n-1}) < b^2 (1 + ln i / ln(1/c_{n-1}))
      high time:  ln(k_i) / ln(1/c_{n-1})    > (a/3)(1 + ln i / ln(1/c_{n-1}))
      ratio:      k_i / i > c_{n-1}^(-a/2)/2   for i > c_{n-1}^(-1)
    Returns a tuple of ReturnRecurrenceRow.  Raises InsufficientDepth when
    no level has walk data.
    """
    consts = consts or practical_constants()
    a = math.exp(consts.ln_a) if consts.ln_a > -700 else 0.0
    b = math.exp(consts.ln_b) if consts.ln_b < 700 else math.inf
    rows = []
    levels = {rs.level: rs for rs in report.levels}
    for n, rs in sorted(levels.items()):
        if rs.dstar is None or rs.critical_value is None or n < 2:
            continue
        parent = levels.get(n - 1)
        if parent is None or parent.c is None:
            continue
        ln_cp = math.log(parent.c)
        pts = [rs.critical_value] + list(rs.walk_returns[:-1]) \
            if rs.walk_returns else [rs.critical_value]
        times = [rs.branch(j).return_time for j in rs.dstar]
        k_i = rs.v
        for i, x in enumerate(pts, start=1):
            av = abs(float(x))
            if av == 0:
                continue
            lhs_d = math.log(av) / ln_cp
            rhs_d = (b * b) * (1 + math.log(i) / (-ln_cp)) if b < math.inf \
                else math.inf
            lhs_t = math.log(k_i) / (-ln_cp)
            rhs_t = (a / 3) * (1 + math.log(i) / (-ln_cp))
            ratio_ok = None
            if math.log(i) > -ln_cp:     # i > c_{n-1}^(-1)
                thresh = math.exp(-0.5 * a * ln_cp) / 2
                ratio_ok = (k_i / i) > thresh
            rows.append(ReturnRecurrenceRow(
                n, i, av, k_i, lhs_d < rhs_d, lhs_t > rhs_t, ratio_ok))
            if i - 1 < len(times):
                k_i += times[i - 1]
    if not rows:
        raise InsufficientDepth("no level carries a recorded landing walk")
    return tuple(rows)


# ---------------------------------------------------------------------------
# the verdict pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifyConfig:
    precision_bits: int = DEFAULT_PRECISION
    N: int = 1000
    window: int | None = None        # default N // 4
    depth: int = 3
    # classification needs the v_n marks, not a branch census; the deeper
    # levels come from landing walks, so a small level-1 time budget suffices
    budgets: NestBudgets = field(default_factory=lambda: NestBudgets(
        time_budget=128, count_budget=64))
    theta: float = 0.01              # CE threshold, nats/iterate
    max_period: int = 64
    max_transient: int = 100_000


@dataclass(frozen=True)
class ParameterVerdict:
    """Exactly one of Regular / ColletEckmannCandidate / NonRecurrentCE /
    Undetermined, with budgets and stability diagnostics."""

    a: str
    verdict: str
    cycle: object = None             # CycleReport for Regular
    lambda_est: float | None = None
    recurrence_est: float | None = None
    stability_delta: float | None = None
    nest_depth: int = 0
    nest_termination: str = ""
    reasons: tuple = ()
    precision_bits: int = DEFAULT_PRECISION
    N: int = 0
    theta: float = 0.01
    c_seq: tuple = ()

    def to_dict(self) -> dict:
        return {
            "a": self.a, "precision": self.precision_bits,
            "budgets": {"N": self.N, "depth": self.nest_depth},
            "verdict": self.verdict,
            "lambda_est": self.lambda_est,
            "recurrence_est": self.recurrence_est,
            "stability_delta": self.stability_delta,
            "nest_depth": self.nest_depth,
            "nest_termination": self.nest_termination,
            "reasons": list(self.reasons),
        }


def classify_parameter(a, config: ClassifyConfig | None = None) -> ParameterVerdict:
    """Classify one parameter; all failures become Undetermined reasons."""
    cfg = config or ClassifyConfig()
    astr = str(a)
    m = invariant_interval(a, cfg.precision_bits)
    try:
        cycle = find_attracting_cycle(m, cfg.max_period, cfg.max_transient)
    except InconclusiveCycle:
        return ParameterVerdict(astr, "Undetermined",
                                reasons=("multiplier enclosure straddles 1",),
                                precision_bits=cfg.precision_bits, N=cfg.N,
                                theta=cfg.theta)
    if cycle is not None:
        return ParameterVerdict(astr, "Regular", cycle=cycle,
                                precision_bits=cfg.precision_bits, N=cfg.N,
                                theta=cfg.theta)
    report = build_nest(m, cfg.depth, cfg.budgets, census_budget=0)
    depth = len(report.levels)
    term = report.termination
    if term is Termination.RENORMALIZATION_DETECTED:
        return ParameterVerdict(astr, "Undetermined",
                                reasons=("cascade", report.termination_detail),
                                nest_depth=depth, nest_termination=term.value,
                                precision_bits=cfg.precision_bits, N=cfg.N,
                                theta=cfg.theta)
    if term is Termination.PRECISION_FAILURE:
        return ParameterVerdict(astr, "Undetermined",
                                reasons=("precision", report.termination_detail),
                                nest_depth=depth, nest_termination=term.value,
                                precision_bits=cfg.precision_bits, N=cfg.N,
                                theta=cfg.theta)
    if term is Termination.PARABOLIC_OBSTRUCTION:
        return ParameterVerdict(astr, "Undetermined",
                                reasons=("parabolic", report.termination_detail),
                                nest_depth=depth, nest_termination=term.value,
                                precision_bits=cfg.precision_bits, N=cfg.N,
                                theta=cfg.theta)
    v_times = tuple(rs.v for rs in report.levels if rs.v is not None)
    try:
        trace = ce_exponent(m, cfg.N, cfg.window, v_times)
        rec = recurrence_exponent(m, cfg.N)
    except CriticalOrbitHitsZero as e:
        return ParameterVerdict(astr, "Undetermined",
                                reasons=(f"superattracting hit at {e.hit_time}",),
                                nest_depth=depth, nest_termination=term.value,
                                precision_bits=cfg.precision_bits, N=cfg.N,
                                theta=cfg.theta)
    half = max(2, cfg.N // 2)
    half_window = max(1, half // 4)
    liminf_half = min(trace.a_seq[half - half_window:half])
    stability = abs(trace.liminf_estimate - liminf_half)
    lam, rec_est = trace.liminf_estimate, rec.limsup_estimate
    if lam > cfg.theta and rec_est <= 0:
        verdict = "NonRecurrentCE"
    elif lam > cfg.theta and 0 < rec_est <= rec.upper_exponent_witness:
        verdict = "ColletEckmannCandidate"
    else:
        verdict = "Undetermined"
    reasons = ()
    if verdict == "Undetermined":
        reasons = (f"liminf_estimate={lam:.4g} vs theta={cfg.theta}",
                   f"recurrence={rec_est:.4g}",
                   f"termination={term.value}")
    c_seq = tuple(rs.c for rs in report.levels if rs.c is not None)
    return ParameterVerdict(astr, verdict, None, lam, rec_est, stability,
                            depth, term.value, reasons,
                            cfg.precision_bits, cfg.N, cfg.theta, c_seq)
