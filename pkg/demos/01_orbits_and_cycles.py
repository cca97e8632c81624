"""Orbits, derivatives and certified cycles in the quadratic family.

Walk-through of the basic layer: the invariant interval of f_a(x) = a - x^2,
extended-precision orbits with log-derivative bookkeeping, certified
distortion bounds, and attracting-cycle certification via interval Newton.
"""

import gmpy2

from quadnest import (PrecisionInterval, distortion, find_attracting_cycle,
                      find_fixed_points, invariant_interval, iterate,
                      working_precision)

print("=== invariant intervals ===")
for a in ("2", "1.5", "0.5", "-0.25"):
    m = invariant_interval(a)
    print(f"a = {a:>5}:  I = [-{float(m.beta):.6f}, {float(m.beta):.6f}]")

print()
print("=== the Chebyshev-like endpoint a = 2 ===")
m2 = invariant_interval("2")
orbit = iterate(m2, 0, 6)
print("critical orbit:", [float(p) for p in orbit.points])
print("ln|Df^3(0...)| =", float(orbit.logderiv_prefix[3]),
      " (the orbit parks on the repelling fixed point -2, so ln 4 per step)")

q, p = find_fixed_points(m2)
print(f"fixed points: q = {float(q)}, p = {float(p)}  (Df(p) = {-2 * float(p)})")

print()
print("=== certified distortion of a monotone iterate ===")
with working_precision(256):
    J = PrecisionInterval.of("1.1", "1.2", 256)
d = distortion(m2, J, 1)
print(f"dist(f|[1.1,1.2]) <= {float(d):.12f}   (exact value 12/11 = {12/11:.12f})")

print()
print("=== attracting cycles, certified by interval Newton ===")
for a in ("0", "1", "0.5", "1.76", "2"):
    rep = find_attracting_cycle(invariant_interval(a), max_period=16,
                                max_transient=50_000)
    if rep is None:
        print(f"a = {a:>4}: no attracting cycle found (within budgets)")
    else:
        print(f"a = {a:>4}: period {rep.period}, "
              f"|multiplier| <= {float(rep.multiplier.hi):.6f}")
