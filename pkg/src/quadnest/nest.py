"""Principal nest construction for the quadratic family.

The nest T_1 = [-p, p] ⊃ T_2 ⊃ ... is built level by level.  Level 1 uses
boundary-preimage piece refinement: subintervals of [0, p] are iterated as
monotone pieces, split at preimages of the boundary located by bracketed
Newton, and a piece whose image falls inside the interval is a complete
return branch.  Endpoints on the boundary orbit are tagged and treated
symbolically, which keeps numerically grazing images from spawning sliver
branches.

Deeper levels come from the renormalization structure instead of raw
iteration: every branch of the return map to I_{n+1} is the pullback of a
landing component C^d of level n through the central branch f^{v_n}, so the
critical value's landing address is walked directly and the other components
are enumerated inside the central branch's image window by increasing
landing time.  Missing branches are materialized on demand when the walk
steps into a gap of the current census.

Precision is split in two.  Branch geometry (monotone inverse solves) is
self-correcting: the forward evaluation error of f^t cancels against the
branch expansion, so the base precision only has to resolve the coordinates.
The critical-orbit walk is not: a wrong digit in the trajectory flips a
branch decision.  The walk therefore runs on a `_Traj` that tracks the
accumulated derivative product along the orbit and restarts itself at
doubled precision when the certified error budget runs out.

The mutable builder (`_Level`) is private; public results are frozen
`ReturnSystem` / `NestReport` values with spatially ordered integer branch
indices (0 central, positive to the right, negative to the left, outward
from the center).
"""

from __future__ import annotations

import bisect as _bisect
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import gmpy2
from gmpy2 import mpfr

from .dynamics import (MapParam, find_fixed_points, orbit_point,
                       solve_monotone_iterate)
from .errors import (BudgetExceeded, InvalidAddress,
                     NoOrientationReversingPoint, NotNice, OrbitEntersNest,
                     ParabolicObstruction, PrecisionFailure, QuadnestError)
from .precision import (PrecisionInterval, PrecisionReal, point_enclosure,
                        quad_image, to_mpfr, working_precision)

_PLAIN = 0
_BND = 1       # endpoint on the forward orbit of the boundary


@dataclass(frozen=True)
class NestBudgets:
    """Budgets for nest construction; all torrential-growth escape hatches."""

    time_budget: int = 4096          # max return time explored per level
    count_budget: int = 256          # census components retained per level
    walk_cap: int = 200_000          # max f-iterations in one landing walk
    cascade_bound: int = 8           # consecutive central returns -> renormalization
    max_branches: int = 100_000      # cap on materialized branches per level
    traj_bits_cap: int = 1 << 16     # max precision for the critical-orbit walk


class TreeAddress:
    """A finite sequence of nonzero integers addressing I^d / C^d."""

    __slots__ = ("entries",)

    def __init__(self, entries=()):
        entries = tuple(int(e) for e in entries)
        if any(e == 0 for e in entries):
            raise InvalidAddress("tree address entries must be nonzero")
        self.entries = entries

    def sigma_plus(self) -> "TreeAddress":
        """Drop the last entry."""
        if not self.entries:
            raise InvalidAddress("sigma+ undefined on the empty address")
        return TreeAddress(self.entries[:-1])

    def sigma_minus(self) -> "TreeAddress":
        """Drop the first entry."""
        if not self.entries:
            raise InvalidAddress("sigma- undefined on the empty address")
        return TreeAddress(self.entries[1:])

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return isinstance(other, TreeAddress) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"TreeAddress{self.entries}"


@dataclass(frozen=True)
class ReturnBranch:
    """One branch I_n^j of a first-return map, f^{return_time} on ``domain``."""

    index: int
    domain: PrecisionInterval
    return_time: int
    is_central: bool
    orientation: int
    source_address: tuple = None   # landing address (indices) at the parent level


@dataclass(frozen=True, eq=False)
class ReturnSystem:
    """A nest level I_n with its (budget-limited) branch decomposition."""

    level: int
    interval: PrecisionInterval
    branches: tuple                     # non-central ReturnBranch, by index
    central: ReturnBranch | None
    tau: int | None                     # index of the branch containing R_n(0)
    v: int | None                       # R_n(0) = f^v(0)
    s: int | None                       # |landing address of R_n(0)|
    c: float | None                     # |I_{n+1}| / |I_n|
    gape: PrecisionInterval | None      # gape interval inside I_n (levels >= 2)
    critical_value: object = None       # R_n(0), raw mpfr at base precision
    dstar: tuple = None                 # landing address (indices) of R_n(0)
    walk_returns: tuple = ()            # R_n^i(0) for i = 1..s (raw mpfr)
    uncovered: object = 0.0             # measure of I_n not covered (mpfr)
    precision_bits: int = 256
    param: MapParam = None
    census: tuple = ()                  # AddressRecord census of landing components
    niceness_horizon: int = 0           # boundary-orbit certificate horizon
    _impl: object = field(default=None, repr=False)

    def branch(self, index: int) -> ReturnBranch:
        if index == 0:
            if self.central is None:
                raise InvalidAddress("no central branch at this level")
            return self.central
        i = index - 1 if index > 0 else len(self.branches) + index
        # branches tuple is sorted by index: negatives ascending then positives
        for b in self.branches:
            if b.index == index:
                return b
        raise InvalidAddress(f"unknown branch index {index} at level {self.level}")


@dataclass(frozen=True)
class AddressRecord:
    """A computed landing component: address, times and both intervals."""

    entries: tuple
    landing_time: int
    component: PrecisionInterval        # C^d
    extended: PrecisionInterval         # I^d
    orientation: int


class Termination(Enum):
    BUDGET_EXHAUSTED = "BudgetExhausted"
    RENORMALIZATION_DETECTED = "RenormalizationDetected"
    REGULAR_DETECTED = "RegularDetected"
    PARABOLIC_OBSTRUCTION = "ParabolicObstruction"
    PRECISION_FAILURE = "PrecisionFailure"
    DEPTH_REACHED = "DepthReached"


@dataclass(frozen=True)
class NestReport:
    param: MapParam
    levels: tuple
    termination: Termination
    termination_detail: str = ""
    budgets: NestBudgets = None


class _Escalate(Exception):
    """Internal: base-precision enclosures too wide."""


class _TrajEscalate(Exception):
    """Internal: the walk's certified error budget ran out."""


class _Traj:
    """The critical orbit at its own (escalating) precision.

    Tracks S = sum of log2|2 x_i| and its running minimum; the first-order
    rounding-error amplification after t steps is 2^(S_t - min S), so the
    walk demands bits > S - Smin + margin and escalates otherwise.
    """

    __slots__ = ("x", "bits", "steps", "S", "Smin")
    MARGIN = 96

    def __init__(self, bits: int):
        self.x = mpfr(0, bits)
        self.bits = bits
        self.steps = 0
        self.S = 0.0
        self.Smin = 0.0

    def advance(self, a, t: int):
        with working_precision(self.bits):
            av = mpfr(a, self.bits)
            x = self.x
            S, Smin = self.S, self.Smin
            budget = self.bits - self.MARGIN
            for _ in range(t):
                x = av - x * x
                fx = abs(float(x))
                S += math.log2(2 * fx) if fx > 0 else -self.bits
                if S - Smin > budget:
                    raise _TrajEscalate()
                if S < Smin:
                    Smin = S
            self.x = x
            self.S, self.Smin = S, Smin
            self.steps += t


# ---------------------------------------------------------------------------
# internal mutable machinery
# ---------------------------------------------------------------------------

class _B:
    """Internal branch record (left/right sides stored separately)."""

    __slots__ = ("lo", "hi", "time", "orient", "src", "index")

    def __init__(self, lo, hi, time, orient, src=None):
        self.lo, self.hi, self.time, self.orient = lo, hi, time, orient
        self.src = src          # tuple of parent-level _B, or None at level 1
        self.index = None

    def width(self):
        return self.hi - self.lo


class _Level:
    """Mutable level under construction.  All math runs at self.bits."""

    def __init__(self, a, beta, level, bits, budgets, parent=None):
        self.a, self.beta, self.level, self.bits = a, beta, level, bits
        self.budgets = budgets
        self.parent = parent
        self.branches: list[_B] = []     # sorted by lo
        self._los: list = []
        self.w = None                    # central half-width (I_{n+1} = [-w, w])
        self.v = None                    # central return time
        self.c_orient = None             # orientation of f^v on [0, w]
        self.central_src = None
        self.pending: list = []          # level-1 pieces not yet resolved
        self.rc = None                   # R_n(0) at base precision
        self.dstar: list[_B] | None = None
        self.walk_points: list = []      # R_n^i(0) along the landing walk
        self.gape_w = None               # gape half-width (levels >= 2)
        self.niceness_horizon = 0
        self.traj: _Traj | None = None   # critical orbit parked at f^{v_n}(0)

    # -- membership -------------------------------------------------------

    def add_pair(self, b: _B):
        """Insert b and its mirror, keeping the list sorted."""
        if len(self.branches) >= self.budgets.max_branches:
            raise BudgetExceeded("branch cap hit during materialization")
        mirror = _B(-b.hi, -b.lo, b.time, -b.orient, b.src)
        for x in (b, mirror):
            i = _bisect.bisect_left(self._los, x.lo)
            if i < len(self.branches) and self.branches[i].lo == x.lo:
                continue
            self.branches.insert(i, x)
            self._los.insert(i, x.lo)

    def locate(self, x) -> _B | None:
        i = _bisect.bisect_right(self._los, x) - 1
        if 0 <= i < len(self.branches):
            b = self.branches[i]
            if b.lo <= x <= b.hi:
                return b
        return None

    def in_central(self, x) -> bool:
        return self.w is not None and -self.w <= x <= self.w

    def _graze_tol(self):
        return gmpy2.exp2(-self.bits + 40) * self.beta

    # -- level-1 piece refinement ------------------------------------------

    def seed_level1(self):
        # a piece is (xlo, xhi, k, vlo, vhi, tlo, thi, touches_zero) with
        # vlo = f^k(xlo), vhi = f^k(xhi) carried through the recursion (cut
        # values enter exactly; nothing is re-evaluated pointwise, which
        # would be unstable along the repelling boundary orbit)
        self.bnd_fixed = abs((self.a - self.beta * self.beta) - self.beta) \
            <= gmpy2.exp2(-self.bits + 16) * max(self.beta, mpfr(1))
        self.pending = [(mpfr(0), self.beta, 0, mpfr(0), self.beta,
                         _PLAIN, _BND, True)]

    def refine_level1(self, time_budget, target=None):
        """Run/extend the piece queue up to ``time_budget``.

        With ``target`` set, only the pieces containing it are pursued
        (branches discovered on the way are still registered).
        """
        a, beta = self.a, self.beta
        tol = gmpy2.exp2(-(self.bits // 2))
        floor = gmpy2.exp2(-self.bits + 48) * beta
        steep_cap = gmpy2.exp2(self.bits - 64)
        snap = getattr(self, "bnd_fixed", False)
        work = deque(self.pending)
        self.pending = []
        keep = []
        while work:
            piece = work.popleft()
            xlo, xhi, k, vlo, vhi, tlo, thi, tz = piece
            if target is not None and not (xlo <= target <= xhi):
                keep.append(piece)
                continue
            if k >= time_budget or xhi - xlo < floor:
                # unresolvable at this precision/budget: stays uncovered
                keep.append(piece)
                continue
            if abs(vhi - vlo) > (xhi - xlo) * steep_cap:
                # branch derivative beyond what the precision resolves
                keep.append(piece)
                continue
            if min(vlo, vhi) < 0 < max(vlo, vhi):
                raise _Escalate()
            nvlo = a - vlo * vlo
            nvhi = a - vhi * vhi
            # endpoints on the boundary orbit are pinned exactly when the
            # boundary is the fixed point (the principal-nest case)
            if snap:
                if tlo == _BND:
                    nvlo = beta
                if thi == _BND:
                    nvhi = beta
            k += 1
            lo_img, hi_img = (nvlo, nvhi) if nvlo <= nvhi else (nvhi, nvlo)
            crossings = []
            for cval in (-beta, beta):
                lo_is_c = tlo == _BND and abs(nvlo - cval) <= tol
                hi_is_c = thi == _BND and abs(nvhi - cval) <= tol
                if lo_is_c or hi_is_c:
                    continue
                if lo_img < cval < hi_img:
                    crossings.append(cval)
            if not crossings:
                mid_img = (lo_img + hi_img) / 2
                if -beta < mid_img < beta:
                    self._register_return(xlo, xhi, k, nvlo, nvhi, tz)
                else:
                    work.append((xlo, xhi, k, nvlo, nvhi, tlo, thi, tz))
                continue
            increasing = nvlo <= nvhi
            pairs = sorted(
                (solve_monotone_iterate(a, k, xlo, xhi, cval, increasing), cval)
                for cval in crossings)
            xs = [xlo] + [p[0] for p in pairs] + [xhi]
            tags = [tlo] + [_BND] * len(pairs) + [thi]
            vals = [nvlo] + [p[1] for p in pairs] + [nvhi]
            for i in range(len(xs) - 1):
                plo, phi = xs[i], xs[i + 1]
                if phi <= plo:
                    continue
                stz = tz and i == 0
                svlo, svhi = vals[i], vals[i + 1]
                mid_img = (svlo + svhi) / 2
                if -beta < mid_img < beta:
                    self._register_return(plo, phi, k, svlo, svhi, stz)
                else:
                    work.append((plo, phi, k, svlo, svhi,
                                 tags[i], tags[i + 1], stz))
        self.pending = keep

    def _register_return(self, lo, hi, time, vlo, vhi, touches_zero):
        orient = 1 if vhi >= vlo else -1
        if touches_zero:
            self.w, self.v, self.c_orient = hi, time, orient
        else:
            self.add_pair(_B(lo, hi, time, orient))

    # -- pullback machinery ------------------------------------------------

    def pull_through_branch(self, b: _B, ylo, yhi):
        """Preimage of [ylo, yhi] ⊆ I_n under f^{b.time}|_{b.domain}."""
        inc = b.orient == 1
        a, t = self.a, b.time
        x1 = solve_monotone_iterate(a, t, b.lo, b.hi, ylo if inc else yhi, inc)
        x2 = solve_monotone_iterate(a, t, b.lo, b.hi, yhi if inc else ylo, inc)
        return (x1, x2) if x1 <= x2 else (x2, x1)

    def pull_components(self, d):
        """(Clo, Chi, Ilo, Ihi, l, orient) for the address d (outermost first)."""
        Clo, Chi = -self.w, self.w
        Ilo, Ihi = -self.beta, self.beta
        l = 0
        orient = 1
        for b in reversed(d):
            Clo, Chi = self.pull_through_branch(b, Clo, Chi)
            Ilo, Ihi = self.pull_through_branch(b, Ilo, Ihi)
            l += b.time
            orient *= b.orient
        return Clo, Chi, Ilo, Ihi, l, orient

    def central_pull(self, ylo, yhi):
        """Preimage in [0, w] of [ylo, yhi] under the central branch f^v."""
        inc = self.c_orient == 1
        x1 = solve_monotone_iterate(self.a, self.v, mpfr(0), self.w,
                                    ylo if inc else yhi, inc)
        x2 = solve_monotone_iterate(self.a, self.v, mpfr(0), self.w,
                                    yhi if inc else ylo, inc)
        return (x1, x2) if x1 <= x2 else (x2, x1)

    # -- landing walks (trajectory-based, self-escalating) -------------------

    def landing_walk(self, traj: _Traj, record_points=False):
        """Walk the trajectory to its landing in I^0; returns the address.

        Advances ``traj`` to the landing point.  Returns the list of _B
        entries, or None when a budget ran out.  Branches the walk steps into
        that are missing from the census are materialized on the way.
        """
        d = []
        pts = []
        start = traj.steps
        while not self.in_central(traj.x):
            b = self.locate(traj.x)
            if b is not None:
                self._guard(traj.x, b)
                traj.advance(self.a, b.time)
            else:
                b = self._materialize_step(traj)
                if b is None:
                    return None
            d.append(b)
            pts.append(traj.x)
            if traj.steps - start > self.budgets.walk_cap:
                return None
        if abs(abs(traj.x) - self.w) < self._graze_tol():
            raise _Escalate()
        if record_points:
            self.walk_points = pts
        return d

    def _guard(self, x, b: _B):
        tol = self._graze_tol()
        if abs(x - b.lo) < tol or abs(b.hi - x) < tol:
            raise _Escalate()

    def _materialize_step(self, traj: _Traj) -> _B | None:
        """Identify (and register) the branch containing traj.x, advancing
        the trajectory through it."""
        x_orig = traj.x
        if self.level == 1:
            self.refine_level1(self.budgets.time_budget, target=x_orig)
            b = self.locate(x_orig)
            if b is None:
                return None
            self._guard(x_orig, b)
            traj.advance(self.a, b.time)
            return b
        parent = self.parent
        traj.advance(self.a, parent.v)
        d = parent.landing_walk(traj)
        if d is None:
            return None
        Clo, Chi, _, _, l, orient = parent.pull_components(d)
        if Clo <= parent.rc <= Chi:
            return None   # numeric edge: x was effectively central
        x1, x2 = parent.central_pull(Clo, Chi)
        self.add_pair(_B(x1, x2, parent.v + l, orient * parent.c_orient,
                         src=tuple(d)))
        b = self.locate(x_orig)
        if b is not None:
            self._guard(x_orig, b)
        return b

    # -- census enumeration --------------------------------------------------

    def component_stream(self, time_budget=None):
        """Yield landing components (d, l, Clo, Chi, Ilo, Ihi, orient) in
        order of increasing landing time.

        d is a tuple of _B, outermost entry first.  The tree is expanded by
        prepending branches (C^{(b,)+d} is the single-branch pullback of C^d
        through b), lazily via the first-child/next-sibling heap pattern, so
        a yielded node costs four monotone solves through one branch.
        """
        if time_budget is None:
            time_budget = self.budgets.time_budget
        by_time = sorted(self.branches, key=lambda b: (b.time, b.lo))
        root = ((), 0, -self.w, self.w, -self.beta, self.beta, 1)
        yield root
        serial = 0
        heap = []

        def push_child(parent_node, rank):
            nonlocal serial
            if rank >= len(by_time):
                return
            l2 = parent_node[1] + by_time[rank].time
            if l2 > time_budget:
                return
            heapq.heappush(heap, (l2, serial, parent_node, rank))
            serial += 1

        push_child(root, 0)
        while heap:
            l, _, pnode, rank = heapq.heappop(heap)
            push_child(pnode, rank + 1)          # next sibling
            b = by_time[rank]
            pd, _, pClo, pChi, pIlo, pIhi, porient = pnode
            Clo, Chi = self.pull_through_branch(b, pClo, pChi)
            Ilo, Ihi = self.pull_through_branch(b, pIlo, pIhi)
            node = ((b,) + pd, l, Clo, Chi, Ilo, Ihi, b.orient * porient)
            yield node
            push_child(node, 0)                   # first child

    def enumerate_components(self, count_budget, time_budget=None):
        """The first ``count_budget`` landing components by landing time."""
        out = []
        for node in self.component_stream(time_budget):
            out.append(node)
            if len(out) >= count_budget:
                break
        return out

    def windowed_components(self, window, count_budget, time_budget=None):
        """Components C^d contained in ``window`` (an interval inside I_n).

        Every such component has the form (wb,) + d' with wb one of the few
        branches meeting the window and d' an arbitrary component, so the
        general stream is enumerated and each node pulled through each window
        branch.  The component containing R_n(0) is skipped (it is the
        central pullback, built separately).
        """
        if time_budget is None:
            time_budget = self.budgets.time_budget
        wlo, whi = window
        win_branches = [b for b in self.branches
                        if not (b.hi < wlo or b.lo > whi)]
        kept = []
        if not win_branches:
            return kept
        for node in self.component_stream(time_budget):
            d, l, Clo, Chi, _, _, orient = node
            for wb in win_branches:
                l2 = l + wb.time
                if l2 > time_budget:
                    continue
                clo2, chi2 = self.pull_through_branch(wb, Clo, Chi)
                if clo2 <= self.rc <= chi2:
                    continue
                if wlo <= clo2 and chi2 <= whi:
                    kept.append(((wb,) + d, l2, clo2, chi2,
                                 orient * wb.orient))
            if len(kept) >= count_budget:
                break
        return kept[:count_budget]


# ---------------------------------------------------------------------------
# construction drivers
# ---------------------------------------------------------------------------

def _certify_niceness(lv: _Level, horizon: int):
    """Iterate an enclosure of the boundary point; fail on a certified entry.

    The nest's own boundary orbits ride along the boundary forever, so the
    certificate can only fail for genuinely non-nice intervals; it stops
    early (recording the horizon) when enclosure widths blow up.
    """
    bits = lv.bits
    iv = point_enclosure(lv.beta, bits, ulps=4)
    width_cap = lv.beta / 2
    t = 0
    for t in range(1, horizon + 1):
        iv = quad_image(lv.a, iv, bits)
        if iv.width() > width_cap:
            break
        if (-lv.beta) < iv.lo and iv.hi < lv.beta:
            raise NotNice(f"boundary orbit enters the interior at time {t}",
                          entry_time=t)
    lv.niceness_horizon = t


def _check_precision(lv: _Level):
    """Escalate when the next level's interval hits the solver noise floor.

    Tiny census branches are expected (they accumulate geometrically at
    boundary preimages and the piece refinement floor already gates them);
    only the central domain is load-bearing for deeper construction.
    """
    floor = gmpy2.exp2(-lv.bits + 48)
    if lv.w is not None and lv.w < floor:
        raise _Escalate()


def _fresh_traj(lv: _Level, bits: int) -> _Traj:
    """Recompute the critical orbit up to f^{v_n}(0) at the given precision."""
    traj = _Traj(bits)
    traj.advance(lv.a, lv.v)
    return traj


def _with_traj_retry(lv: _Level, budgets: NestBudgets, fn):
    """Run fn(traj) with the walk-precision escalation loop."""
    traj = lv.traj
    bits = traj.bits if traj is not None else lv.bits
    while True:
        try:
            if traj is None:
                traj = _fresh_traj(lv, bits)
            return fn(traj)
        except _TrajEscalate:
            bits *= 2
            if bits > budgets.traj_bits_cap:
                raise BudgetExceeded(
                    f"critical-orbit walk needs more than {budgets.traj_bits_cap} "
                    f"bits (torrential regime)")
            traj = None


def _build_level1(m: MapParam, budgets: NestBudgets) -> _Level:
    _, p = find_fixed_points(m)
    pv = p.value
    if 2 * pv < 1:
        raise NoOrientationReversingPoint(
            f"fixed point p={float(pv):.6g} is attracting (a <= 3/4)")
    if abs(2 * pv - 1) < gmpy2.exp2(-(m.precision_bits // 4)):
        raise ParabolicObstruction("fixed-point multiplier within tolerance of -1")
    lv = _Level(m.a, pv, 1, m.precision_bits, budgets)
    _certify_niceness(lv, min(budgets.time_budget, 256))
    lv.seed_level1()
    lv.refine_level1(budgets.time_budget)
    _check_precision(lv)
    if lv.v is not None:
        lv.traj = _fresh_traj(lv, lv.bits)
        lv.rc = mpfr(lv.traj.x, lv.bits)
    return lv


def _build_next(lv: _Level) -> _Level | None:
    """Build the next level, or None when budgets run out mid-walk."""
    budgets = lv.budgets

    def walk(traj):
        lv.traj = traj
        lv.rc = mpfr(traj.x, lv.bits)
        d = lv.landing_walk(traj, record_points=True)
        return d, traj

    dstar, traj = _with_traj_retry(lv, budgets, walk)
    if dstar is None:
        return None
    lv.dstar = dstar
    nxt = _Level(lv.a, lv.w, lv.level + 1, lv.bits, budgets, parent=lv)
    Clo, Chi, Ilo, Ihi, l, orient = lv.pull_components(dstar)
    inc = lv.c_orient == 1
    # central endpoint: the C^{d*} endpoint on the boundary side of the image
    e = Chi if inc else Clo
    nxt.w = solve_monotone_iterate(lv.a, lv.v, mpfr(0), lv.w, e, inc)
    nxt.v = lv.v + l
    nxt.c_orient = lv.c_orient * orient
    nxt.central_src = tuple(dstar)
    eg = Ihi if inc else Ilo
    nxt.gape_w = solve_monotone_iterate(lv.a, lv.v, mpfr(0), lv.w, eg, inc)
    nxt.traj = traj                      # parked at f^{v_{n+1}}(0)
    nxt.rc = mpfr(traj.x, lv.bits)
    # census of next-level branches inside the central image window
    fw = lv.beta if inc else -lv.beta    # f^{v_n}(w) lies on the boundary
    wlo, whi = (lv.rc, fw) if lv.rc < fw else (fw, lv.rc)
    comps = lv.windowed_components((wlo, whi), budgets.count_budget,
                                   budgets.time_budget)
    for d, lcomp, cClo, cChi, corient in comps:
        x1, x2 = lv.central_pull(cClo, cChi)
        nxt.add_pair(_B(x1, x2, lv.v + lcomp, corient * lv.c_orient,
                        src=tuple(d)))
    _check_precision(nxt)
    return nxt


def _freeze(lv: _Level, m: MapParam, census_budget=0) -> ReturnSystem:
    """Assign spatial indices and emit the immutable ReturnSystem."""
    right = [b for b in lv.branches if b.lo >= 0]
    left = [b for b in lv.branches if b.lo < 0]
    right.sort(key=lambda b: b.lo)
    left.sort(key=lambda b: -b.hi)
    for i, b in enumerate(right):
        b.index = i + 1
    for i, b in enumerate(left):
        b.index = -(i + 1)

    def emit(b: _B) -> ReturnBranch:
        src = tuple(x.index for x in b.src) if b.src else None
        return ReturnBranch(b.index, PrecisionInterval(b.lo, b.hi), b.time,
                            False, b.orient, src)

    central = None
    if lv.w is not None:
        csrc = tuple(x.index for x in lv.central_src) if lv.central_src else None
        central = ReturnBranch(0, PrecisionInterval(-lv.w, lv.w), lv.v, True,
                               lv.c_orient, csrc)
    branches = tuple(sorted((emit(b) for b in lv.branches),
                            key=lambda rb: rb.index))
    dstar = tuple(b.index for b in lv.dstar) if lv.dstar is not None else None
    tau = (dstar[0] if dstar else (0 if dstar == () else None))
    c = float(lv.w / lv.beta) if lv.w is not None else None
    interval = PrecisionInterval(-lv.beta, lv.beta)
    covered = mpfr(0)
    for b in lv.branches:
        covered += b.width()
    if lv.w is not None:
        covered += 2 * lv.w
    uncovered = max(2 * lv.beta - covered, mpfr(0))
    gape = PrecisionInterval(-lv.gape_w, lv.gape_w) if lv.gape_w is not None else None
    census = ()
    if census_budget:
        census = tuple(
            AddressRecord(tuple(b.index for b in d), l,
                          PrecisionInterval(clo, chi), PrecisionInterval(ilo, ihi),
                          orient)
            for d, l, clo, chi, ilo, ihi, orient in
            lv.enumerate_components(census_budget))
    return ReturnSystem(
        level=lv.level, interval=interval, branches=branches, central=central,
        tau=tau, v=lv.v, s=(len(dstar) if dstar is not None else None), c=c,
        gape=gape, critical_value=lv.rc, dstar=dstar,
        walk_returns=tuple(mpfr(x, lv.bits) for x in lv.walk_points),
        uncovered=uncovered, precision_bits=lv.bits, param=m, census=census,
        niceness_horizon=lv.niceness_horizon, _impl=lv)


def build_first_level(m: MapParam, budgets: NestBudgets | None = None,
                      census_budget: int | None = None) -> ReturnSystem:
    """T_1 = [-p, p] with its return branches and landing census."""
    budgets = budgets or NestBudgets()
    with working_precision(m.precision_bits):
        try:
            lv = _build_level1(m, budgets)
        except _Escalate:
            raise PrecisionFailure(
                f"level-1 enclosures degenerated at {m.precision_bits} bits")
        if census_budget is None:
            census_budget = budgets.count_budget
        return _freeze(lv, m,
                       census_budget=census_budget if lv.w is not None else 0)


def build_next_level(rs: ReturnSystem, budgets: NestBudgets | None = None,
                     census_budget: int | None = None) -> ReturnSystem:
    """Next nest level from a built one (uses the internal builder state)."""
    if rs._impl is None:
        raise QuadnestError("ReturnSystem was not produced by this builder")
    lv: _Level = rs._impl
    budgets = budgets or lv.budgets
    lv.budgets = budgets
    with working_precision(lv.bits):
        if lv.w is None:
            raise BudgetExceeded("no central branch at this level")
        try:
            nxt = _build_next(lv)
        except _Escalate:
            raise PrecisionFailure(
                f"enclosures degenerated at {lv.bits} bits")
        if nxt is None:
            raise BudgetExceeded("landing walk exceeded budgets")
        if census_budget is None:
            census_budget = budgets.count_budget
        return _freeze(nxt, rs.param,
                       census_budget=census_budget if nxt.w is not None else 0)


def build_nest(m: MapParam, depth: int, budgets: NestBudgets | None = None,
               census_budget: int | None = None) -> NestReport:
    """Build the principal nest down to ``depth`` levels (or until stopped).

    Base precision escalates (doubling, one retry) when enclosures
    degenerate; the walk precision escalates independently inside.  The
    termination field records why construction stopped.
    """
    budgets = budgets or NestBudgets()
    for bits in (m.precision_bits, 2 * m.precision_bits):
        mm = m if bits == m.precision_bits else MapParam(
            mpfr(m.a, bits), _recompute_beta(m.a, bits), bits)
        try:
            return _build_nest_once(mm, depth, budgets, census_budget)
        except _Escalate:
            continue
    return NestReport(m, (), Termination.PRECISION_FAILURE,
                      "enclosures degenerated at doubled precision", budgets)


def _recompute_beta(a, bits):
    with working_precision(bits):
        return (1 + gmpy2.sqrt(1 + 4 * mpfr(a, bits))) / 2


def _build_nest_once(m: MapParam, depth: int, budgets: NestBudgets,
                     census_budget: int | None) -> NestReport:
    with working_precision(m.precision_bits):
        try:
            lv = _build_level1(m, budgets)
        except NoOrientationReversingPoint as e:
            return NestReport(m, (), Termination.REGULAR_DETECTED, str(e), budgets)
        except ParabolicObstruction as e:
            return NestReport(m, (), Termination.PARABOLIC_OBSTRUCTION, str(e), budgets)
        impls = [lv]
        cascade = 0
        termination = Termination.DEPTH_REACHED
        detail = ""
        while len(impls) < depth:
            cur = impls[-1]
            if cur.w is None:
                termination = Termination.BUDGET_EXHAUSTED
                detail = f"no central branch found at level {cur.level} within budgets"
                break
            if cur.beta - cur.w <= cur._graze_tol():
                # the central branch fills the whole level: the return map is
                # unimodal onto, i.e. the period-2-type renormalization case
                period = _try_renormalization_period(m)
                termination = Termination.RENORMALIZATION_DETECTED
                detail = ("central domain fills the level interval"
                          + (f"; certified trapping interval of period {period}"
                             if period else " (period uncertified)"))
                break
            try:
                nxt = _build_next(cur)
            except BudgetExceeded as e:
                termination = Termination.BUDGET_EXHAUSTED
                detail = str(e)
                break
            if nxt is None:
                termination = Termination.BUDGET_EXHAUSTED
                detail = (f"landing walk at level {cur.level} exceeded "
                          f"walk_cap={budgets.walk_cap}")
                break
            impls.append(nxt)
            cascade = cascade + 1 if len(cur.dstar) == 0 else 0
            if cascade >= budgets.cascade_bound:
                period = _try_renormalization_period(m)
                termination = Termination.RENORMALIZATION_DETECTED
                detail = (f"{cascade} consecutive central returns"
                          + (f"; certified trapping interval of period {period}"
                             if period else " (period uncertified)"))
                break
        cb = budgets.count_budget if census_budget is None else census_budget
        frozen = [_freeze(lvx, m, census_budget=cb if lvx.w is not None else 0)
                  for lvx in impls]
        return NestReport(m, tuple(frozen), termination, detail, budgets)


def _try_renormalization_period(m: MapParam, max_period: int = 64) -> int | None:
    """Search for a certified trapping interval f^q(T) ⊆ T around 0."""
    x = mpfr(0)
    crit = [x]
    for _ in range(max_period):
        x = m.a - x * x
        crit.append(x)
    for q in range(2, max_period + 1):
        r = abs(crit[q]) * mpfr("1.05") + gmpy2.exp2(-m.precision_bits // 2)
        T = PrecisionInterval(-r, r)
        img = T
        ok = True
        for j in range(1, q + 1):
            img = quad_image(m.a, img, m.precision_bits)
            if j < q and img.intersects(T):
                ok = False
                break
        if ok and T.contains_interval(img):
            return q
    return None


# ---------------------------------------------------------------------------
# public operations on frozen systems
# ---------------------------------------------------------------------------

def discover_branches(m: MapParam, interval: PrecisionInterval,
                      time_budget: int, count_budget: int = 100_000) -> ReturnSystem:
    """Return-branch discovery on a symmetric nice interval.

    Returns a ReturnSystem for ``interval``; raises NotNice when the
    niceness certificate fails with a certified interior entry, and
    BudgetExceeded (carrying the partial system and its uncovered measure)
    when count_budget is hit.
    """
    bits = m.precision_bits
    with working_precision(bits):
        mid_off = abs(interval.lo + interval.hi)
        if mid_off > gmpy2.exp2(-bits + 16) * interval.width():
            raise QuadnestError("nice intervals are symmetric about 0")
        budgets = NestBudgets(time_budget=time_budget,
                              max_branches=2 * count_budget)
        lv = _Level(m.a, interval.hi, 1, bits, budgets)
        _certify_niceness(lv, time_budget)
        lv.seed_level1()
        try:
            lv.refine_level1(time_budget)
        except BudgetExceeded:
            rs = _freeze(lv, m)
            raise BudgetExceeded(
                f"count budget {count_budget} exceeded", partial=rs,
                uncovered=rs.uncovered)
        except _Escalate:
            raise PrecisionFailure(
                f"piece refinement degenerated at {bits} bits")
        if lv.v is not None:
            lv.traj = _fresh_traj(lv, lv.bits)
            lv.rc = mpfr(lv.traj.x, lv.bits)
        return _freeze(lv, m)


def landing_components(rs: ReturnSystem, d) -> tuple[PrecisionInterval, PrecisionInterval]:
    """(I^d, C^d) for a tree address of branch indices at this level."""
    entries = tuple(d) if not isinstance(d, TreeAddress) else d.entries
    lv: _Level = rs._impl
    if lv is None or lv.w is None:
        raise InvalidAddress("level has no central branch; components undefined")
    with working_precision(rs.precision_bits):
        chain = [_resolve(lv, rs, j) for j in entries]
        Clo, Chi, Ilo, Ihi, _, _ = lv.pull_components(chain)
        return PrecisionInterval(Ilo, Ihi), PrecisionInterval(Clo, Chi)


def landing_time(rs: ReturnSystem, d) -> int:
    """l_n(d) = sum of the branch return times along the address."""
    entries = tuple(d) if not isinstance(d, TreeAddress) else d.entries
    total = 0
    for j in entries:
        if j == 0:
            raise InvalidAddress("0 is not a valid landing-address entry")
        total += rs.branch(j).return_time
    return total


def _resolve(lv: _Level, rs: ReturnSystem, j: int) -> _B:
    if j == 0:
        raise InvalidAddress("0 is not a valid landing-address entry")
    target = rs.branch(j)
    b = lv.locate(target.domain.mid())
    if b is None:
        raise InvalidAddress(f"branch {j} not materialized in the builder")
    return b


def hyperbolic_outside(rs: ReturnSystem, x, n: int) -> PrecisionReal:
    """(1/n) ln|Df^n(x)| for an orbit that avoids the central domain.

    Raises OrbitEntersNest with the first entry time if x, f(x), ...,
    f^{n-1}(x) does not stay outside I^0.  n = 0 returns the degenerate 0.
    """
    bits = rs.precision_bits
    with working_precision(bits):
        if n == 0:
            return PrecisionReal(mpfr(0), bits)
        # with no central branch found, no orbit can enter it
        w = rs.central.domain.hi if rs.central is not None else None
        xv = to_mpfr(x, bits)
        logsum = mpfr(0)
        for k in range(n):
            if w is not None and -w <= xv <= w:
                raise OrbitEntersNest("orbit entered the central domain", k)
            logsum += gmpy2.log(2 * abs(xv))
            xv = rs.param.a - xv * xv
        return PrecisionReal(logsum / n, bits)


@dataclass(frozen=True)
class SimpleMapVerdict:
    central_flags: tuple          # per built level: was the return central?
    verdict: str                  # "Simple" | "CascadeSuspected" | "Undetermined"
    window: int


def detect_central_and_simple(report: NestReport, window: int = 3) -> SimpleMapVerdict:
    """Per-level central-return flags and a desk-scale simplicity verdict."""
    flags = tuple(rs.s == 0 for rs in report.levels if rs.s is not None)
    if not flags:
        return SimpleMapVerdict((), "Undetermined", window)
    tail = flags[-window:]
    if len(tail) < window:
        verdict = "Undetermined"
    elif not any(tail):
        verdict = "Simple"
    elif all(tail):
        verdict = "CascadeSuspected"
    else:
        verdict = "Undetermined"
    return SimpleMapVerdict(flags, verdict, window)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def nest_report_to_dict(report: NestReport) -> dict:
    """JSON-ready form of a NestReport (documented schema, decimal strings).

    Schema: {a, precision_bits, termination, termination_detail, levels: [
      {level, interval {lo, hi}, branches [{index, lo, hi, time, orientation}],
       central {lo, hi, time} | null, c, v, tau, s, gape {lo, hi} | null,
       uncovered, dstar}]}.  Endpoints are decimal strings that round-trip at
    the working precision.
    """
    from .precision import exact_decimal

    def iv(p: PrecisionInterval):
        return {"lo": exact_decimal(p.lo), "hi": exact_decimal(p.hi)}

    levels = []
    for rs in report.levels:
        levels.append({
            "level": rs.level,
            "interval": iv(rs.interval),
            "branches": [
                {"index": b.index, "lo": exact_decimal(b.domain.lo),
                 "hi": exact_decimal(b.domain.hi), "time": b.return_time,
                 "orientation": b.orientation}
                for b in rs.branches
            ],
            "central": (None if rs.central is None else
                        {"lo": exact_decimal(rs.central.domain.lo),
                         "hi": exact_decimal(rs.central.domain.hi),
                         "time": rs.central.return_time}),
            "c": rs.c, "v": rs.v, "tau": rs.tau, "s": rs.s,
            "gape": None if rs.gape is None else iv(rs.gape),
            "uncovered": float(rs.uncovered),
            "dstar": list(rs.dstar) if rs.dstar is not None else None,
        })
    return {
        "a": exact_decimal(report.param.a),
        "precision_bits": report.param.precision_bits,
        "levels": levels,
        "termination": report.termination.value,
        "termination_detail": report.termination_detail,
    }
