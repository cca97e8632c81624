"""Branch statistics: time tails, hyperbolicity exponents, goodness classes.

Per nest level this runs the return/landing time statistics (capacity tails
A_n(k), B_n(k) with the zeta/alpha decay fits), the certified per-branch
hyperbolicity exponents, the VG/B goodness induction with the LS/LF/LE/LC
landing taxonomy, and the eight-point time-distribution checklist.  All
thresholds use the practical constant profile; the faithful profile (the
constants exactly as the theory builds them) is shown degenerating at the
end.
"""

from quadnest import (build_nest, check_G, classify_landing_LS_LF,
                      classify_returns_VG_B, faithful_constants,
                      invariant_interval, lambda_exponents,
                      large_times_checklist, practical_constants,
                      time_statistics, tree_capacity_bound)
from quadnest.branchstats import classification_report, report_to_csv

consts = practical_constants()
report = build_nest(invariant_interval("1.8"), depth=3)
levels = report.levels

print("=== time statistics per level ===")
prev = []
for rs in levels:
    ts = time_statistics(rs, consts, prev_stats=prev, effort=1)
    prev.append(ts)
    ks = sorted(ts.A)
    shown = {k: round(ts.A[k], 4) for k in ks[:5]}
    print(f"level {rs.level}: zeta = {ts.zeta:.5g}  alpha = {ts.alpha:.5g}  "
          f"A_n tail head = {shown}")

print()
print("=== hyperbolicity exponents (level 1) ===")
lam1 = lambda_exponents(levels[0])
for j, v in sorted(lam1.certified.items()):
    print(f"  lambda^({j:+d}) >= {v:.5f}   (sampled {lam1.sampled[j]:.5f})")
print(f"  lambda_1 = {lam1.lambda_n:.5f}")

print()
print("=== goodness classes and good-return flags ===")
classes = classify_returns_VG_B(levels, 2, consts)
for n, cls in sorted(classes.items()):
    vg = "all" if cls.vg_universal else sorted(cls.vg)
    print(f"level {n}: VG = {vg}, B = {sorted(cls.bad)}")
lams = {1: lam1, 2: lambda_exponents(levels[1], grid=6)}
gflags = check_G(levels[:2], 1, consts, lams, max_time=64)
good = [j for j, f in gflags[2].items() if f.g]
print(f"level 2 good returns (G1 & G2): {len(good)} of {len(gflags[2])}")

print()
print("=== landing census at level 2 (head of the report) ===")
rows = classification_report(levels, consts)
print("\n".join(report_to_csv(rows).splitlines()[:8]))

print()
print("=== eight-point checklist at level 2 ===")
for item in large_times_checklist(levels[1], consts):
    if not item.evaluable:
        print(f"  item {item.item}: not evaluable")
        continue
    verdicts = ["pass" if e[3] else "FAIL" for e in item.evaluations]
    print(f"  item {item.item}: {', '.join(verdicts):<30} {item.description}")

print()
print("=== the binomial tree estimate ===")
for (q, m, k, n) in ((0.01, 10, 3, 2), (0.05, 40, 10, 3)):
    binom, stirling = tree_capacity_bound(q, m, k, n)
    print(f"q={q}, m={m}, k={k}, n={n}:  capacity <= {binom:.4g}  "
          f"(Stirling coefficient bound {stirling:.4g})")

print()
print("=== the faithful profile degenerates by design ===")
fc = faithful_constants()
fl = classify_landing_LS_LF(levels[1], levels[1].census[1].entries, fc)
print(f"faithful-profile LS flags on a real landing: ls1={fl.ls1} "
      f"ls2={fl.ls2} ls3={fl.ls3}  (thresholds are astronomically permissive)")
