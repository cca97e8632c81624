"""Building the principal nest and reading its combinatorics.

The nest T_1 ⊃ T_2 ⊃ ... around the critical point is built level by level:
T_1 = [-p, p] from the orientation-reversing fixed point, each next level as
the central domain of the first-return map.  The run prints, per level, the
scaling factor c_n, the critical return time v_n, the landing-address length
s_n, and the gape interval, and shows the torrential collapse of geometry
that caps the reachable depth.
"""

from quadnest import (NestBudgets, Termination, build_nest, invariant_interval,
                      landing_components, landing_time, nest_report_to_dict)

for a in ("1.9", "1.8", "1.95"):
    print(f"===== a = {a} =====")
    report = build_nest(invariant_interval(a), depth=3)
    print("termination:", report.termination.value)
    for rs in report.levels:
        gape = "-" if rs.gape is None else f"[{float(rs.gape.lo):.4g}, {float(rs.gape.hi):.4g}]"
        print(f"  level {rs.level}: |I_n| = {float(rs.interval.width()):.6g}  "
              f"branches = {len(rs.branches)}  v = {rs.v}  s = {rs.s}  "
              f"tau = {rs.tau}  c_n = {rs.c:.4g}  gape = {gape}")
    print()

print("===== landing machinery at a = 1.9, level 1 =====")
rep = build_nest(invariant_interval("1.9"), depth=2)
rs1 = rep.levels[0]
print("branch times by index:",
      {b.index: b.return_time for b in rs1.branches})
print("critical value lands via address", rs1.dstar,
      "after", landing_time(rs1, rs1.dstar), "iterates")
for d in ([], [2], [2, 1], list(rs1.dstar)):
    Id, Cd = landing_components(rs1, d)
    print(f"  d = {d!s:<18} |I^d| = {float(Id.width()):.6g}   "
          f"|C^d| = {float(Cd.width()):.6g}   "
          f"ratio/c_1 = {float(Cd.width() / Id.width()) / rs1.c:.4f}")

print()
print("===== special parameters =====")
for a, note in (("2", "critical orbit never returns to T_1"),
                ("1.401155", "period-doubling cascade"),
                ("0.5", "attracting fixed point")):
    report = build_nest(invariant_interval(a), depth=4)
    print(f"a = {a:>9}: {report.termination.value:<25} ({note})")
