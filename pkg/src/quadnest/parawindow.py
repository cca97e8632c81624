"""Empirical parameter windows: where the finite nest combinatorics is constant.

The window around a base parameter at depth n is the maximal parameter
interval on which (a) the return times v_1..v_n and the landing itineraries
of the critical value through levels < n are unchanged, and (b) the first
level-n return of the critical value stays in the designated target piece.
Branches are identified across parameters by conjugacy-stable tags
(return time, side of 0, rank among same-tagged branches), not by raw
coordinates.  Window endpoints are located by outward doubling followed by
bisection on the signature predicate; this finite-depth itinerary equality
is the computable surrogate for topological equivalence of landing maps, so
windows are meaningful relative to the budgets that produced them.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from .dynamics import invariant_interval
from .errors import CombinatoricsUnstable, QuadnestError
from .nest import NestBudgets, Termination, build_nest
from .precision import PrecisionInterval, to_mpfr, working_precision


@dataclass(frozen=True)
class BranchTag:
    """Conjugacy-stable identity of a level branch."""

    time: int
    side: int           # -1 / 0 (central) / +1
    rank: int           # position among same (time, side), innermost first


@dataclass(frozen=True)
class NestSignature:
    """Finite combinatorics of levels <= n: v times and walk itineraries."""

    v_times: tuple           # (v_1, ..., v_n)
    itineraries: tuple       # per level < n: tuple of BranchTag along dstar
    tau_tag: object          # BranchTag of the level-n return of R_n(0)


@dataclass(frozen=True)
class ParaWindow:
    window: PrecisionInterval      # in parameter space
    base_a: str
    level: int
    target: object                 # BranchTag or tuple of BranchTag
    evaluations: int
    precision_bits: int
    signature: NestSignature


def _branch_tag(lv, b) -> BranchTag:
    side = 1 if b.lo >= 0 else -1
    same = [x for x in lv.branches
            if x.time == b.time and (1 if x.lo >= 0 else -1) == side]
    same.sort(key=lambda x: abs(x.lo) if side > 0 else abs(x.hi))
    return BranchTag(b.time, side, same.index(b))


def _walk_tags(lv, entries) -> tuple:
    return tuple(_branch_tag(lv, b) for b in entries)


def nest_signature(report, n: int, target_len: int = 1) -> NestSignature | None:
    """Extract the depth-n signature (None when the nest is too shallow)."""
    if len(report.levels) < n:
        return None
    v_times = tuple(rs.v for rs in report.levels[:n])
    if any(v is None for v in v_times):
        return None
    its = []
    for rs in report.levels[:n - 1]:
        lv = rs._impl
        if lv is None or lv.dstar is None:
            return None
        its.append(_walk_tags(lv, lv.dstar))
    tau = _tau_tags(report.levels[n - 1], target_len)
    if tau is None:
        return None
    return NestSignature(v_times, tuple(its), tau)


def _tau_tags(rs, count: int):
    """Tags of the first ``count`` level-n walk entries of R_n(0).

    Returns None when the walk is undecidable at the working precision
    (boundary grazing, exactly what happens at a combinatorics flip).
    """
    from .nest import _Escalate, _Traj, _TrajEscalate
    lv = rs._impl
    if lv is None or lv.traj is None:
        return None
    bits = lv.traj.bits
    traj = _clone_traj(lv.traj)
    while True:
        try:
            return _tau_tags_walk(lv, traj, count)
        except _Escalate:
            return None
        except _TrajEscalate:
            bits *= 2
            if bits > lv.budgets.traj_bits_cap:
                return None
            traj = _Traj(bits)
            try:
                traj.advance(lv.a, lv.traj.steps)
            except _TrajEscalate:
                return None


def _tau_tags_walk(lv, traj, count: int):
    tags = []
    for _ in range(count):
        if lv.in_central(traj.x):
            tags.append(BranchTag(0, 0, 0))
            break
        b = lv.locate(traj.x)
        if b is None:
            b = lv._materialize_step(traj)
            if b is None:
                return None
            tags.append(_branch_tag(lv, b))
            continue
        tags.append(_branch_tag(lv, b))
        traj.advance(lv.a, b.time)
    return tuple(tags)


def _clone_traj(traj):
    from .nest import _Traj
    t = _Traj(traj.bits)
    t.x, t.steps, t.S, t.Smin = traj.x, traj.steps, traj.S, traj.Smin
    return t


def _build_for_signature(a_val, level, bits, budgets):
    m = invariant_interval(a_val, bits)
    return build_nest(m, level, budgets, census_budget=0)


def parameter_window(base_a, level: int, target_index: int | None = None,
                     target_address=None, precision_bits: int = 128,
                     budgets: NestBudgets | None = None,
                     initial_step: float = 2.0 ** -24,
                     tol_bits: int = 40, max_expand: int = 60) -> ParaWindow:
    """Locate the parameter window of constant depth-``level`` combinatorics.

    The base signature is taken from the base parameter's own nest;
    ``target_index`` re-targets the window to a sibling branch of the base
    level (by its tag), ``target_address`` to an explicit landing prefix.
    Raises CombinatoricsUnstable when the base's nest cannot be built or its
    signature extracted at this precision and budgets.
    """
    if level < 1:
        raise QuadnestError("level must be >= 1")
    budgets = budgets or NestBudgets(time_budget=1024, count_budget=64,
                                     walk_cap=50_000)
    target_len = len(tuple(target_address)) if target_address else 1
    with working_precision(precision_bits):
        a0 = to_mpfr(base_a, precision_bits)
        base_report = _build_for_signature(a0, level, precision_bits, budgets)
        base_sig = nest_signature(base_report, level, target_len)
        if base_sig is None:
            raise CombinatoricsUnstable(
                f"base nest at a={base_a} does not reach level {level} "
                f"within budgets")
        if target_index is not None:
            rs = base_report.levels[level - 1]
            lv = rs._impl
            tb = None
            for b in lv.branches:
                if b.index == target_index:
                    tb = b
                    break
            if target_index == 0:
                target = (BranchTag(0, 0, 0),)
            elif tb is None:
                raise QuadnestError(f"unknown target index {target_index}")
            else:
                target = (_branch_tag(lv, tb),)
        elif target_address is not None:
            rs = base_report.levels[level - 1]
            lv = rs._impl
            tags = []
            for j in target_address:
                bb = None
                for b in lv.branches:
                    if b.index == j:
                        bb = b
                        break
                if bb is None:
                    raise QuadnestError(f"unknown target index {j}")
                tags.append(_branch_tag(lv, bb))
            target = tuple(tags)
        else:
            target = base_sig.tau_tag
        evals = 0

        def signature_at(av):
            from .nest import _Escalate
            nonlocal evals
            evals += 1
            if not (mpfr("-0.25") <= av <= 2):
                return None
            try:
                rep = _build_for_signature(av, level, precision_bits, budgets)
                return nest_signature(rep, level, target_len)
            except (QuadnestError, _Escalate):
                return None

        def prefix_ok(sig) -> bool:
            return (sig is not None and sig.v_times == base_sig.v_times
                    and sig.itineraries == base_sig.itineraries)

        def predicate(av) -> bool:
            sig = signature_at(av)
            return prefix_ok(sig) and sig.tau_tag[:len(target)] == tuple(target)

        tol = gmpy2.exp2(-tol_bits)
        seed = a0
        if not predicate(a0):
            # a sibling target piece does not contain the base critical
            # value: search for a seed inside the window of constant
            # prefix combinatorics (where only the tau target varies)
            def prefix_pred(av):
                return prefix_ok(signature_at(av))

            phi = _scan_edge(prefix_pred, a0, mpfr(initial_step), tol, max_expand)
            plo = _scan_edge(prefix_pred, a0, -mpfr(initial_step), tol, max_expand)
            seed = None
            samples = 128
            for i in range(1, samples):
                av = plo + (phi - plo) * i / samples
                if predicate(av):
                    seed = av
                    break
            if seed is None:
                raise CombinatoricsUnstable(
                    "target piece not realized inside the base's "
                    "constant-combinatorics window at these budgets")
        hi = _scan_edge(predicate, seed, mpfr(initial_step), tol, max_expand)
        lo = _scan_edge(predicate, seed, -mpfr(initial_step), tol, max_expand)
        return ParaWindow(PrecisionInterval(lo, hi), str(base_a), level,
                          target, evals, precision_bits, base_sig)


def _scan_edge(predicate, a0, step, tol, max_expand):
    """Outward doubling to bracket the signature flip, then bisection."""
    inside = a0
    probe = a0 + step
    for _ in range(max_expand):
        if not predicate(probe):
            break
        inside = probe
        step *= 2
        probe = a0 + step
    else:
        return inside
    lo, hi = (inside, probe) if step > 0 else (probe, inside)
    # bisect on the flip between inside (true) and probe (false)
    t, f = inside, probe
    while abs(f - t) > tol:
        mid = (t + f) / 2
        if predicate(mid):
            t = mid
        else:
            f = mid
    return t
