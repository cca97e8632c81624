"""Branch and landing statistics: time distributions and the goodness taxonomy.

Implements the per-level statistical machinery over a built nest level:

* landing classifications LS (standard) / LF (fast), the inductive
  very-good/bad return classes VG/B with the excellent landings LE between
  them, and the cool landings LC;
* hyperbolicity exponents λ_n^{(j)} with certified lower bounds, and the
  good-return conditions G1/G2;
* return/landing-time tail statistics A_n(k), B_n(k) as capacity bounds,
  with the ζ_n / α_n decay fits;
* the binomial tree-capacity estimate and its Stirling form.

All threshold comparisons run in log space (see ``constants``) so the
faithful constant profile degenerates gracefully instead of overflowing;
the practical profile exercises every branch of the logic at desk scale.
Classification here is pure bookkeeping over times and positions, so these
functions accept synthetic ReturnSystems assembled by hand in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from .constants import LN2, PaperConstants, count_is_sparse
from .errors import InsufficientDepth, MissingLevelData, QuadnestError
from .nest import ReturnSystem
from .precision import (PrecisionInterval, ctx_up, deriv_enclosure,
                        working_precision)
from .qscapacity import CapacityBound, IntervalSet, capacity_bounds

# ---------------------------------------------------------------------------
# level-derived log quantities
# ---------------------------------------------------------------------------


def _exp_cap(x: float) -> float:
    """exp with overflow to inf instead of OverflowError."""
    if x > 700:
        return math.inf
    return math.exp(x)


def _ln_c(rs: ReturnSystem) -> float:
    if rs.c is None:
        raise MissingLevelData(f"level {rs.level} has no scaling factor c")
    return math.log(rs.c)


def _ln_c_prev(rs: ReturnSystem, c_prev: float | None) -> float:
    if c_prev is not None:
        return math.log(c_prev)
    impl = rs._impl
    if impl is not None and impl.parent is not None:
        return float(gmpy2.log(impl.parent.w / impl.parent.beta))
    raise MissingLevelData(
        f"c_{{{rs.level - 1}}} unavailable; pass c_prev for level {rs.level}")


# ---------------------------------------------------------------------------
# LS / LF
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LandingFlags:
    ls: bool
    lf: bool
    ls1: bool
    ls2: bool
    ls3: bool
    lf1: bool
    witness: dict


def classify_landing_LS_LF(rs: ReturnSystem, d, consts: PaperConstants,
                           c_prev: float | None = None) -> LandingFlags:
    """Standard/fast flags for one landing address at level rs.level.

    LS1: c_n^(-a/2) < m < c_n^(-2b); LS2: all return times below
    c_{n-1}^(-3b); LS3: for c_{n-1}^(-2b) <= k <= m the count of short
    times (r < c_{n-1}^(-a/2)) among the first k entries stays below
    (6·2^n) c_{n-1}^(a/2) k.  LF = LF1 (m < c_n^(-a/2)) together with LS2.
    """
    entries = tuple(d)
    n = rs.level
    ln_cn = _ln_c(rs)
    ln_cp = _ln_c_prev(rs, c_prev)
    m = len(entries)
    times = [rs.branch(j).return_time for j in entries]
    witness = {}
    a = _exp_cap(consts.ln_a)
    b = _exp_cap(consts.ln_b)

    ls1 = _in_power_range(m, ln_cn, lo_exp=-0.5 * a, hi_exp=-2.0 * b)
    if not ls1:
        witness["LS1"] = m

    ls2 = True
    r_cap_ln = -3.0 * b * ln_cp
    for i, r in enumerate(times):
        if math.log(r) >= r_cap_ln:
            ls2 = False
            witness["LS2"] = i + 1
            break

    short_ln = -0.5 * a * ln_cp
    short = [1 if math.log(r) < short_ln else 0 for r in times]
    prefix = _prefix_sums(short)
    k_lo = _power_int(ln_cp, -2.0 * b)
    ls3 = True
    if k_lo is not None:
        for k in range(max(k_lo, 1), m + 1):
            if not count_is_sparse(prefix[k], n, ln_cp, 0.5 * a, k):
                ls3 = False
                witness["LS3"] = k
                break

    lf1 = not _above_int(m, ln_cn, -0.5 * a)
    ls = ls1 and ls2 and ls3
    lf = lf1 and ls2
    return LandingFlags(ls, lf, ls1, ls2, ls3, lf1, witness)


def _prefix_sums(xs):
    out = [0]
    for x in xs:
        out.append(out[-1] + x)
    return out


def _power_int(ln_c: float, exponent: float) -> int | None:
    """ceil(c^exponent) as an int (range starts), None on float overflow."""
    v = exponent * ln_c
    if math.isnan(v) or v > 700:
        return None
    return max(int(math.ceil(math.exp(v))), 1)


def _power_int_floor(ln_c: float, exponent: float) -> int | None:
    """floor(c^exponent) as an int (range caps), None on float overflow."""
    v = exponent * ln_c
    if math.isnan(v) or v > 700:
        return None
    return int(math.floor(math.exp(v)))


def _above_int(value: int, ln_c: float, exponent: float) -> bool:
    """value > c^exponent, in log space (value >= 1)."""
    if value <= 0:
        return False
    return math.log(value) > exponent * ln_c


def _in_power_range(m: int, ln_c: float, lo_exp: float, hi_exp: float) -> bool:
    """c^lo_exp < m < c^hi_exp in log space."""
    if m <= 0:
        return False
    lm = math.log(m)
    return lm > lo_exp * ln_c and lm < hi_exp * ln_c


# ---------------------------------------------------------------------------
# VG / B / LE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchClass:
    """Per-level goodness classes: very good and bad return indices."""

    level: int
    vg: frozenset
    bad: frozenset
    vg_universal: bool = False      # level n0 base case: VG = Z \ {0}

    def is_vg(self, j: int) -> bool:
        return self.vg_universal or j in self.vg

    def is_bad(self, j: int) -> bool:
        return (not self.vg_universal) and j in self.bad


@dataclass(frozen=True)
class ExcellentFlags:
    le: bool
    ls: bool
    le1: bool
    le2: bool
    witness: dict


def classify_landing_LE(rs: ReturnSystem, d, consts: PaperConstants,
                        classes: BranchClass,
                        c_prev: float | None = None) -> ExcellentFlags:
    """Excellent landings: LS plus sparsity of not-very-good and bad moments.

    LE1: for c_{n-1}^(-2b) < k <= m, #{i <= k : j_i not in VG} <
    (6·2^n) c_{n-1}^(a^2) k.  LE2 (per its caption: bad moments are sparse):
    for c_n^(-1/n) < k <= m, #{i <= k : j_i in B} < (6·2^n) c_{n-1}^n k.
    """
    entries = tuple(d)
    n = rs.level
    ln_cn = _ln_c(rs)
    ln_cp = _ln_c_prev(rs, c_prev)
    m = len(entries)
    base = classify_landing_LS_LF(rs, d, consts, c_prev)
    witness = dict(base.witness)
    a2 = _exp_cap(2 * consts.ln_a)

    notvg = _prefix_sums([0 if classes.is_vg(j) else 1 for j in entries])
    k_lo = _power_int(ln_cp, -2.0 * _exp_cap(consts.ln_b))
    le1 = True
    if k_lo is not None:
        for k in range(k_lo + 1, m + 1):
            if not count_is_sparse(notvg[k], n, ln_cp, a2, k):
                le1 = False
                witness["LE1"] = k
                break

    bad = _prefix_sums([1 if classes.is_bad(j) else 0 for j in entries])
    k_lo2 = _power_int(ln_cn, -1.0 / n)
    le2 = True
    if k_lo2 is not None:
        for k in range(k_lo2 + 1, m + 1):
            if not count_is_sparse(bad[k], n, ln_cp, float(n), k):
                le2 = False
                witness["LE2"] = k
                break

    return ExcellentFlags(base.ls and le1 and le2, base.ls, le1, le2, witness)


def classify_returns_VG_B(levels, n0: int, consts: PaperConstants,
                          c_prevs: dict | None = None) -> dict:
    """Inductive VG/B classes for levels n0..max built.

    ``levels``: ReturnSystems in nest order (level attribute consulted).
    Level n+1 membership needs each of its branches' landing address at
    level n (the ``source_address`` recorded at construction).  Returns
    {level: BranchClass}.
    """
    by_level = {rs.level: rs for rs in levels}
    if n0 not in by_level:
        raise InsufficientDepth(f"level {n0} not built")
    out = {n0: BranchClass(n0, frozenset(), frozenset(), vg_universal=True)}
    n = n0
    while n + 1 in by_level:
        rs, nxt = by_level[n], by_level[n + 1]
        classes = out[n]
        c_prev = None if c_prevs is None else c_prevs.get(n)
        ln_cn = _ln_c(rs)
        width_next = float(nxt.interval.width())
        vg, bad = set(), set()
        for br in nxt.branches:
            if br.source_address is None:
                continue
            flags = classify_landing_LE(rs, br.source_address, consts,
                                        classes, c_prev)
            if flags.le and _vg_distance_ok(br, rs.level, ln_cn, width_next):
                vg.add(br.index)
            else:
                lslf = classify_landing_LS_LF(rs, br.source_address, consts,
                                              c_prev)
                if not lslf.lf:
                    bad.add(br.index)
        out[n + 1] = BranchClass(n + 1, frozenset(vg), frozenset(bad))
        n += 1
    return out


def _vg_distance_ok(br, n: int, ln_cn: float, width_next: float) -> bool:
    """Distance of the branch domain to 0 exceeds c_n^(n^2) |I_{n+1}|."""
    lo, hi = br.domain.lo, br.domain.hi
    if lo <= 0 <= hi:
        return False
    dist = float(lo) if lo > 0 else float(-hi)
    rhs_ln = (n * n) * ln_cn + math.log(width_next)
    return math.log(dist) > rhs_ln


# ---------------------------------------------------------------------------
# LC
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoolFlags:
    lc: bool
    lc1: bool
    lc2: bool
    lc3: bool
    lc4: bool
    lc5: bool
    le: bool
    witness: dict


def classify_landing_LC(rs: ReturnSystem, d, n0: int, consts: PaperConstants,
                        classes: BranchClass,
                        c_prev: float | None = None) -> CoolFlags:
    """Cool landings: LE plus startup and sparsity conditions LC1-LC5."""
    entries = tuple(d)
    n = rs.level
    ln_cp = _ln_c_prev(rs, c_prev)
    m = len(entries)
    ex = classify_landing_LE(rs, d, consts, classes, c_prev)
    witness = dict(ex.witness)
    a = _exp_cap(consts.ln_a)
    a2 = a * a

    # LC1: very good start, i <= c_{n-1}^(-a^2/2)
    i_cap = _power_int_floor(ln_cp, -a2 / 2)
    lc1 = True
    if i_cap is not None:
        for i in range(1, min(i_cap, m) + 1):
            if not classes.is_vg(entries[i - 1]):
                lc1 = False
                witness["LC1"] = i
                break

    times = [rs.branch(j).return_time for j in entries]
    short_ln = -0.5 * a * ln_cp
    short = _prefix_sums([1 if math.log(r) < short_ln else 0 for r in times])
    k_lo = _power_int(ln_cp, -a / 2)
    lc2 = True
    if k_lo is not None:
        for k in range(max(k_lo, 1), m + 1):
            if not count_is_sparse(short[k], n, ln_cp, a / 3, k):
                lc2 = False
                witness["LC2"] = k
                break

    notvg = _prefix_sums([0 if classes.is_vg(j) else 1 for j in entries])
    k_lo3 = _power_int(ln_cp, -a2 / 4)
    lc3 = True
    if k_lo3 is not None:
        for k in range(k_lo3 + 1, m + 1):
            if not count_is_sparse(notvg[k], n, ln_cp, a2, k):
                lc3 = False
                witness["LC3"] = k
                break

    bad = _prefix_sums([1 if classes.is_bad(j) else 0 for j in entries])
    k_lo4 = _power_int(ln_cp, -n / 3)
    lc4 = True
    if k_lo4 is not None:
        for k in range(max(k_lo4, 1), m + 1):
            if not count_is_sparse(bad[k], n, ln_cp, n / 6, k):
                lc4 = False
                witness["LC4"] = k
                break

    i_cap5 = _power_int_floor(ln_cp, -n / 2)
    lc5 = True
    if i_cap5 is not None:
        for i in range(1, min(i_cap5, m) + 1):
            if classes.is_bad(entries[i - 1]):
                lc5 = False
                witness["LC5"] = i
                break

    lc = ex.le and lc1 and lc2 and lc3 and lc4 and lc5
    return CoolFlags(lc, lc1, lc2, lc3, lc4, lc5, ex.le, witness)


# ---------------------------------------------------------------------------
# hyperbolicity: lambda exponents and G1/G2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaReport:
    """Per-branch exponents: certified lower bounds and sampled estimates."""

    level: int
    certified: dict      # j -> float lower bound of inf ln|DR_n|/r (or -inf)
    sampled: dict        # j -> float grid estimate of the same inf
    lambda_n: float      # min over j of the certified bounds
    lambda_n_sampled: float


def lambda_exponents(rs: ReturnSystem, grid: int = 12,
                     refine: int = 3) -> LambdaReport:
    """λ_n^{(j)} = inf_{x in I^j} ln|Df^{r_n(j)}(x)| / r_n(j) per branch.

    The certified value is an interval-arithmetic lower bound on the inf
    (grid subdivision with refinement of pieces whose derivative enclosure
    collapses); the sampled value is the pointwise grid minimum, reported
    alongside because deep branches can defeat the enclosure.
    """
    m = rs.param
    bits = rs.precision_bits
    certified, sampled = {}, {}
    with working_precision(bits):
        for br in rs.branches:
            lo_bound, samp = _branch_lambda(m, br, bits, grid, refine)
            certified[br.index] = lo_bound
            sampled[br.index] = samp
    if certified:
        lam = min(certified.values())
        lam_s = min(sampled.values())
    else:
        lam = lam_s = math.inf
    return LambdaReport(rs.level, certified, sampled, lam, lam_s)


def _branch_lambda(m, br, bits, grid, refine):
    from .dynamics import orbit_with_deriv
    r = br.return_time
    lo, hi = br.domain.lo, br.domain.hi
    step = (hi - lo) / grid
    worst = math.inf
    samp = math.inf
    for i in range(grid):
        plo = lo + i * step
        phi = lo + (i + 1) * step
        stack = [(plo, phi, 0)]
        while stack:
            qlo, qhi, depth = stack.pop()
            dlo, _, _ = deriv_enclosure(m.a, PrecisionInterval(qlo, qhi), r, bits)
            if dlo > 0:
                worst = min(worst, float(gmpy2.log(dlo)) / r)
            elif depth < refine:
                mid = (qlo + qhi) / 2
                stack.append((qlo, mid, depth + 1))
                stack.append((mid, qhi, depth + 1))
            else:
                worst = -math.inf
        _, dmid = orbit_with_deriv(m.a, (plo + phi) / 2, r)
        if dmid != 0:
            samp = min(samp, float(gmpy2.log(abs(dmid))) / r)
    return worst, samp


@dataclass(frozen=True)
class GoodFlags:
    g: bool
    g1: bool
    g2: bool
    g2_checked_range: tuple | None
    witness: dict


def check_G(levels, n0: int, consts: PaperConstants, lambdas: dict,
            grid: int = 8, max_time: int = 4096) -> dict:
    """G1/G2 good-return flags per branch for levels n0..max built.

    G1: λ_n^{(j)} >= λ_{n0} (1 + 2^{n0-n}) / 2.
    G2: for c_{n-1}^(-3/(n-1)) <= k <= r_n(j),
        inf_{I^j} ln|Df^k| / k >= λ_{n0} (1 + 2^{n0-n+1/2}) / 2 - c_n^{2/(n-1)}.

    ``lambdas`` maps level -> LambdaReport.  Branches whose return time
    exceeds ``max_time`` get g2_checked_range None (not evaluable).
    Returns {level: {j: GoodFlags}}.
    """
    by_level = {rs.level: rs for rs in levels}
    if n0 not in by_level or n0 not in lambdas:
        raise InsufficientDepth(f"level {n0} data missing")
    lam0 = lambdas[n0].lambda_n
    out = {}
    for n, rs in sorted(by_level.items()):
        if n < n0:
            continue
        rep = lambdas.get(n)
        flags = {}
        g1_floor = lam0 * (1 + 2.0 ** (n0 - n)) / 2
        if n > 1 and rs.c is not None and n - 1 >= 1:
            ln_cn = _ln_c(rs)
            slack = math.exp((2.0 / (n - 1)) * ln_cn) if n > n0 else 0.0
        else:
            slack = 0.0
        g2_floor = lam0 * (1 + 2.0 ** (n0 - n + 0.5)) / 2 - slack
        for br in rs.branches:
            lamj = rep.certified.get(br.index, -math.inf) if rep else -math.inf
            g1 = lamj >= g1_floor
            g2, rng, wit = _check_g2(rs, br, n, n0, g2_floor, grid, max_time)
            w = {}
            if not g1:
                w["G1"] = lamj
            w.update(wit)
            flags[br.index] = GoodFlags(g1 and (g2 if g2 is not None else True),
                                        g1, bool(g2), rng, w)
        out[n] = flags
    return out


def _check_g2(rs, br, n, n0, floor, grid, max_time):
    from .precision import quad_image
    if n == n0 or n <= 1:
        return True, (0, 0), {}
    r = br.return_time
    if r > max_time:
        return None, None, {}
    try:
        ln_cp = _ln_c_prev(rs, None)
    except MissingLevelData:
        return None, None, {}
    k_lo = _power_int(ln_cp, -3.0 / (n - 1))
    if k_lo is None or k_lo > r:
        return True, (0, 0), {}
    m = rs.param
    bits = rs.precision_bits
    lo, hi = br.domain.lo, br.domain.hi
    with working_precision(bits):
        step = (hi - lo) / grid
        # per-piece prefix log-sums of the derivative lower bound
        inf_logsum = [math.inf] * (r + 1)
        for i in range(grid):
            cur = PrecisionInterval(lo + i * step, lo + (i + 1) * step)
            acc = 0.0
            dead = False
            for k in range(1, r + 1):
                if cur.lo < 0 < cur.hi:
                    alo = 0.0
                else:
                    alo = float(min(abs(cur.lo), abs(cur.hi)))
                if alo <= 0 or dead:
                    dead = True
                    acc = -math.inf
                else:
                    acc += math.log(2 * alo)
                inf_logsum[k] = min(inf_logsum[k], acc)
                cur = quad_image(m.a, cur, bits)
        for k in range(k_lo, r + 1):
            if inf_logsum[k] / k < floor:
                return False, (k_lo, r), {"G2": k}
    return True, (k_lo, r), {}


# ---------------------------------------------------------------------------
# time statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeStats:
    """Tail capacities of return/landing times at one level."""

    level: int
    A: dict                  # k -> upper capacity of {r_n >= k}
    B: dict                  # k -> upper capacity of {l_n > k}
    zeta: float
    alpha: float
    gamma_n: float
    gamma_tilde_n: float
    partial_tail: bool       # census/branch budgets truncated the tails
    uncovered: float


def time_statistics(rs: ReturnSystem, consts: PaperConstants,
                    sample_budget: int = 24, effort: int = 1,
                    prev_stats=None, zeta_grid: int = 1024) -> TimeStats:
    """A_n(k), B_n(k) capacity tails with the ζ_n / α_n decay fit.

    A_n(k) bounds the γ_n-capacity of the union of discovered return
    domains with time >= k (central included); B_n(k) the γ̃_n-capacity of
    census landing components with time > k.  ζ_n is the largest grid value
    ζ < c_{n-1} with A_n(k) <= e^(-ζ k) for all sampled k > 1/ζ; α_n chains
    the minimum over previous levels (``prev_stats``).
    """
    n = rs.level
    gamma_n = consts.gamma_n(n)
    gamma_tn = consts.gamma_tilde_n(n)
    branches = list(rs.branches)
    if rs.central is not None:
        branches.append(rs.central)
    times = sorted({b.return_time for b in branches})
    ks = _quantile_grid(times, sample_budget)
    A = {}
    for k in ks:
        doms = sorted((b.domain for b in branches if b.return_time >= k),
                      key=lambda p: p.lo)
        A[k] = _set_capacity_upper(rs.interval, doms, gamma_n, effort)
    B = {}
    if rs.census:
        ltimes = sorted({rec.landing_time for rec in rs.census if rec.entries})
        for k in _quantile_grid(ltimes, sample_budget):
            doms = sorted((rec.component for rec in rs.census
                           if rec.entries and rec.landing_time > k),
                          key=lambda p: p.lo)
            B[k] = _set_capacity_upper(rs.interval, doms, gamma_tn, effort)
    try:
        c_prev = math.exp(_ln_c_prev(rs, None))
    except MissingLevelData:
        c_prev = 1.0
    zeta = _fit_zeta(A, c_prev, zeta_grid)
    alpha = zeta
    if prev_stats:
        alpha = min([zeta] + [s.zeta for s in prev_stats])
    uncovered = float(rs.uncovered) / float(rs.interval.width())
    return TimeStats(n, A, B, zeta, alpha, gamma_n, gamma_tn,
                     partial_tail=uncovered > 0.05, uncovered=uncovered)


def _quantile_grid(values, budget):
    if not values:
        return []
    if len(values) <= budget:
        return list(values)
    out = sorted({values[(i * (len(values) - 1)) // (budget - 1)]
                  for i in range(budget)})
    return out


def _merge_touching(doms):
    merged = []
    for p in doms:
        if merged and p.lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], p.hi))
        else:
            merged.append((p.lo, p.hi))
    return merged


def _set_capacity_upper(ambient, doms, gamma, effort) -> float:
    if not doms:
        return 0.0
    parts = [PrecisionInterval(lo, hi) for lo, hi in _merge_touching(doms)]
    X = IntervalSet(ambient, tuple(parts))
    return float(capacity_bounds(X, gamma, effort).upper)


def _fit_zeta(A, c_prev, grid):
    if not A:
        return 0.0
    top = min(c_prev, 0.999999)
    best = 0.0
    lo = 1e-12
    for i in range(grid):
        z = math.exp(math.log(lo) + (math.log(top) - math.log(lo)) * i / (grid - 1))
        if z >= c_prev:
            break
        ok = all(a <= math.exp(-z * k) for k, a in A.items() if k > 1.0 / z)
        if ok:
            best = max(best, z)
    return best


# ---------------------------------------------------------------------------
# classification report serialization
# ---------------------------------------------------------------------------

def classification_report(levels, consts: PaperConstants, n0: int = 2,
                          c_prevs: dict | None = None) -> list:
    """Flat classification rows: one per branch and per census landing.

    Row keys: level, kind ("branch" | "landing"), index or address, time,
    flags and witnesses.  Serializable via ``report_to_csv`` /
    ``report_to_json``.
    """
    rows = []
    by_level = {rs.level: rs for rs in levels}
    try:
        classes = classify_returns_VG_B(levels, n0, consts, c_prevs)
    except (InsufficientDepth, MissingLevelData):
        classes = {}
    for n, rs in sorted(by_level.items()):
        cls = classes.get(n)
        for br in rs.branches:
            row = {"level": n, "kind": "branch", "id": br.index,
                   "time": br.return_time, "flags": {}, "witness": {}}
            if cls is not None:
                row["flags"] = {"VG": cls.is_vg(br.index),
                                "B": cls.is_bad(br.index)}
            rows.append(row)
        if not rs.census:
            continue
        c_prev = None if c_prevs is None else c_prevs.get(n)
        for rec in rs.census:
            if not rec.entries:
                continue
            try:
                fl = classify_landing_LS_LF(rs, rec.entries, consts, c_prev)
            except MissingLevelData:
                break
            flags = {"LS": fl.ls, "LF": fl.lf}
            witness = dict(fl.witness)
            if cls is not None:
                ex = classify_landing_LE(rs, rec.entries, consts, cls, c_prev)
                lc = classify_landing_LC(rs, rec.entries, n0, consts, cls,
                                         c_prev)
                flags.update({"LE": ex.le, "LC": lc.lc})
                witness.update(lc.witness)
            rows.append({"level": n, "kind": "landing",
                         "id": ",".join(str(j) for j in rec.entries),
                         "time": rec.landing_time, "flags": flags,
                         "witness": witness})
    return rows


def report_to_csv(rows) -> str:
    import csv
    import io
    flag_keys = sorted({k for r in rows for k in r["flags"]})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level", "kind", "id", "time"] + flag_keys + ["witness"])
    for r in rows:
        writer.writerow(
            [r["level"], r["kind"], r["id"], r["time"]]
            + [r["flags"].get(k, "") for k in flag_keys]
            + [";".join(f"{k}={v}" for k, v in sorted(r["witness"].items()))])
    return buf.getvalue()


def report_to_json(rows, consts: PaperConstants) -> str:
    import json
    return json.dumps({"constants": consts.describe(), "rows": rows},
                      sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# the eight-point time-distribution checklist
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChecklistItem:
    item: int
    description: str
    evaluations: tuple     # (s or None, lhs, rhs, passed)
    evaluable: bool


def large_times_checklist(rs: ReturnSystem, consts: PaperConstants,
                          c_prev: float | None = None, effort: int = 1,
                          s_grid=None) -> tuple:
    """Evaluate the eight time-distribution inequalities at one level.

    Items 1-6 are capacity statements with a free exponent s; they are
    checked on a small grid of s values within each item's validity range.
    Items 7-8 compare r_n(tau_n) and v_n against powers of c_{n-1} directly.
    Capacity sides use the certified upper bounds (so a failed item means
    the bound is genuinely above the claimed threshold at this budget).
    """
    n = rs.level
    a = _exp_cap(consts.ln_a)
    b = _exp_cap(consts.ln_b)
    if s_grid is None:
        hi = b if math.isfinite(b) else 4.0
        s_grid = sorted({a, (a + hi) / 2, hi, 2 * hi})
    try:
        ln_cn = _ln_c(rs)
    except MissingLevelData:
        ln_cn = None
    try:
        ln_cp = _ln_c_prev(rs, c_prev)
    except MissingLevelData:
        ln_cp = None
    gamma_tn = consts.gamma_tilde_n(n)
    gamma_n = consts.gamma_n(n)
    out = []

    def cap_of(doms, ambient, gamma):
        doms = sorted(doms, key=lambda p: p.lo)
        return _set_capacity_upper(ambient, doms, gamma, effort)

    tau_dom = None
    if rs.tau not in (None, 0):
        tau_dom = rs.branch(rs.tau).domain

    # items 1-4: landing-time statements (census-based)
    for item, ambient, restrict in ((1, rs.interval, None), (2, tau_dom, "tau"),
                                    (3, rs.interval, None), (4, tau_dom, "tau")):
        tail = item in (3, 4)
        evals = []
        evaluable = bool(rs.census) and ln_cn is not None and \
            (ambient is not None)
        if evaluable:
            recs = [r for r in rs.census if r.entries]
            if restrict == "tau":
                recs = [r for r in recs if ambient.contains_interval(r.component)]
            for s in s_grid:
                if tail and not s > b:
                    continue
                if not tail and not s > 0:
                    continue
                k_thr = _exp_cap(-s * ln_cn)
                if tail:
                    doms = [r.component for r in recs if r.landing_time > k_thr]
                    rhs = _exp_cap(-_exp_cap((b - s) * ln_cn)) \
                        if math.isfinite(b) else 1.0
                else:
                    doms = [r.component for r in recs if r.landing_time < k_thr]
                    rhs = _exp_cap((a - s) * ln_cn)
                lhs = cap_of(doms, ambient, gamma_tn)
                evals.append((s, lhs, rhs, lhs < rhs))
        kind = "l_n(x) > c_n^-s" if tail else "l_n(x) < c_n^-s"
        where = "I^tau" if restrict else "I_n"
        out.append(ChecklistItem(item, f"capacity of {{{kind}}} in {where}",
                                 tuple(evals), evaluable and bool(evals)))

    # items 5-6: return-time statements (branch-based)
    branches = list(rs.branches) + ([rs.central] if rs.central else [])
    for item, tail in ((5, False), (6, True)):
        evals = []
        evaluable = bool(branches) and ln_cp is not None
        if evaluable:
            for s in s_grid:
                if tail and not s > b:
                    continue
                if not tail and not s > 0:
                    continue
                k_thr = _exp_cap(-s * ln_cp)
                if tail:
                    doms = [x.domain for x in branches if x.return_time > k_thr]
                    rhs = _exp_cap(-_exp_cap((b - s) * ln_cp)) \
                        if math.isfinite(b) else 1.0
                else:
                    doms = [x.domain for x in branches if x.return_time < k_thr]
                    rhs = _exp_cap((a - s) * ln_cp)
                lhs = cap_of(doms, rs.interval, gamma_n)
                evals.append((s, lhs, rhs, lhs < rhs))
        kind = "r_n(x) > c_{n-1}^-s" if tail else "r_n(x) < c_{n-1}^-s"
        out.append(ChecklistItem(item, f"capacity of {{{kind}}} in I_n",
                                 tuple(evals), evaluable and bool(evals)))

    # item 7: c_{n-1}^-a < r_n(tau_n) < c_{n-1}^-b
    ev7 = []
    evaluable7 = rs.tau not in (None, 0) and ln_cp is not None
    if evaluable7:
        r_tau = rs.branch(rs.tau).return_time
        ok = (math.log(r_tau) > a * -ln_cp) and (math.log(r_tau) < b * -ln_cp)
        ev7.append((None, float(r_tau),
                    (_exp_cap(-a * ln_cp), _exp_cap(-b * ln_cp)), ok))
    out.append(ChecklistItem(7, "c_{n-1}^-a < r_n(tau) < c_{n-1}^-b",
                             tuple(ev7), evaluable7))

    # item 8: c_{n-1}^-a < v_n < c_{n-1}^-b
    ev8 = []
    evaluable8 = rs.v is not None and ln_cp is not None
    if evaluable8:
        ok = (math.log(rs.v) > a * -ln_cp) and (math.log(rs.v) < b * -ln_cp)
        ev8.append((None, float(rs.v),
                    (_exp_cap(-a * ln_cp), _exp_cap(-b * ln_cp)), ok))
    out.append(ChecklistItem(8, "c_{n-1}^-a < v_n < c_{n-1}^-b",
                             tuple(ev8), evaluable8))
    return tuple(out)


def torrential_rate_check(levels, consts: PaperConstants) -> tuple:
    """ln ln(1/c_n) / ln(1/c_{n-1}) per level pair, with the (a, b) frame."""
    a = _exp_cap(consts.ln_a)
    b = _exp_cap(consts.ln_b)
    out = []
    by_level = {rs.level: rs for rs in levels}
    for n in sorted(by_level):
        if n - 1 not in by_level:
            continue
        rs, prev = by_level[n], by_level[n - 1]
        if rs.c is None or prev.c is None or rs.c >= 1:
            continue
        val = math.log(-math.log(rs.c)) / (-math.log(prev.c))
        out.append((n, val, a < val < b))
    return tuple(out)


# ---------------------------------------------------------------------------
# combinatorial tree-capacity estimate
# ---------------------------------------------------------------------------

def tree_capacity_bound(q: float, m: int, k: int, n: int):
    """Certified upper bounds for the k-of-m bad-entry capacity q_n(m, k).

    Returns (binomial, stirling): the capacity bound min(1, C(m,k)·(2^n q)^k)
    from the recursive estimate, and the Stirling-form coefficient bound
    (3/q')^(q' m) with q' = k/m, which dominates C(m, k) and is the form the
    summed large-deviation estimates use.  Both are rounded upward; k = 0
    gives (1, 1).
    """
    if not 0 <= q <= 1:
        raise QuadnestError("q must be in [0, 1]")
    if not 0 <= k <= m:
        raise QuadnestError("need 0 <= k <= m")
    if k == 0:
        return 1.0, 1.0
    up = ctx_up(96)
    qv = up.mul(gmpy2.exp2(n), mpfr(q, 96))
    binom = up.mul(mpfr(math.comb(m, k), 96), up.exp(up.mul(mpfr(k), up.log(qv)))) \
        if q > 0 else mpfr(0)
    binom = min(mpfr(1), binom)
    qp = up.div(mpfr(k, 96), mpfr(m, 96))
    stirling = up.exp(up.mul(up.mul(qp, mpfr(m)), up.log(up.div(mpfr(3), qp))))
    return float(binom), float(stirling)


# ---------------------------------------------------------------------------
# accounting identities (very-good partial time)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialTimeAccount:
    """Decomposition of a truncated return into the four time buckets."""

    k: int
    i_k: int          # time outside full returns (v_n plus incomplete tail)
    h_k: int          # full bad returns
    l_k: int          # full returns neither very good nor bad
    beta_k: int       # full very good returns
    m_k: int          # number of complete returns before k

    @property
    def total(self) -> int:
        return self.i_k + self.h_k + self.l_k + self.beta_k


def partial_time_account(rs: ReturnSystem, branch, k: int,
                         classes: BranchClass) -> PartialTimeAccount:
    """Split the first k iterates of a next-level branch into time buckets.

    ``branch`` is a level-(n+1) ReturnBranch whose source_address lives at
    level rs.level; ``classes`` is the VG/B class at level rs.level.  The
    identity i_k + h_k + l_k + beta_k = k holds exactly by construction and
    is re-verified independently in tests.
    """
    if branch.source_address is None:
        raise QuadnestError("branch has no recorded landing address")
    v = rs.v
    if v is None or k < 0:
        raise QuadnestError("need the central return time and k >= 0")
    times = [rs.branch(j).return_time for j in branch.source_address]
    spent = v
    m_k = 0
    beta = h = l = 0
    for j, r in zip(branch.source_address, times):
        if spent + r > k:
            break
        spent += r
        m_k += 1
        if classes.is_vg(j):
            beta += r
        elif classes.is_bad(j):
            h += r
        else:
            l += r
    i_k = k - (beta + h + l)
    return PartialTimeAccount(k, i_k, h, l, beta, m_k)
