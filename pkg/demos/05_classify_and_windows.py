"""End to end: verdicts, recurrence traces, parameter windows, Borel-Cantelli.

The classification pipeline (cycle search, then nest plus finite-horizon
exponent surrogates) across representative parameters; the recurrence
inequalities along return branches; an empirical parameter window of
constant combinatorics; and the Monte Carlo harness behind the
almost-everywhere arguments.  The same runs are available from the command
line (`quadnest classify --a 1.9`, `quadnest sweep ...`, etc.).
"""

from quadnest import (ClassifyConfig, NestBudgets, SyntheticNestedSystem,
                      borel_cantelli_harness, build_nest, ce_exponent,
                      classify_parameter, invariant_interval,
                      parameter_window, practical_constants,
                      recurrence_exponent, return_branch_recurrence)

print("=== verdicts ===")
for a in ("0", "0.5", "1", "1.76", "2", "1.9", "1.401155"):
    v = classify_parameter(a, ClassifyConfig(max_transient=20_000))
    extra = ""
    if v.cycle is not None:
        extra = f"period {v.cycle.period}"
    elif v.lambda_est is not None:
        extra = f"lambda ~ {v.lambda_est:.4f}, recurrence ~ {v.recurrence_est:.3f}"
    elif v.reasons:
        extra = v.reasons[0]
    print(f"  a = {a:>9}: {v.verdict:<22} {extra}")

print()
print("=== exponent traces at a = 1.9 ===")
m = invariant_interval("1.9")
tr = ce_exponent(m, 2000)
rec = recurrence_exponent(m, 2000)
print(f"liminf estimate of ln|Df^k(f(0))|/k over the last {tr.window}: "
      f"{tr.liminf_estimate:.5f}")
print(f"limsup estimate of -ln|f^n(0)|/ln n over the trailing half: "
      f"{rec.limsup_estimate:.5f}")

print()
print("=== recurrence along return branches ===")
rep = build_nest(m, 3)
rows = return_branch_recurrence(rep, practical_constants())
head = [r for r in rows if r.level == 2][:5]
for r in head:
    print(f"  level {r.level} i={r.i}: |R^i(0)| = {r.abs_return:.5g}  "
          f"k_i = {r.k_i}  distance ok: {r.distance_ok}  "
          f"time ok: {r.high_time_ok}")

print()
print("=== a parameter window of constant combinatorics ===")
budgets = NestBudgets(time_budget=256, count_budget=4, walk_cap=20_000)
pw = parameter_window("1.9", 2, budgets=budgets)
print(f"level-2 window around a = 1.9: width {float(pw.window.width()):.4g} "
      f"({pw.evaluations} nest evaluations)")

print()
print("=== Borel-Cantelli harness ===")
for label, qs in (("q_n = 2^-n (summable)",
                   tuple(2.0 ** -n for n in range(1, 31))),
                  ("q_n = 1/2 (hypothesis violated)",
                   tuple(0.5 for _ in range(30)))):
    system = SyntheticNestedSystem(qs, horizon=30, seed=7)
    est = borel_cantelli_harness(system, 50_000)
    print(f"  {label:<32} tail-hit measure ~ {est.estimate:.5f} "
          f"± {est.radius:.5f}")
