"""Exact tail masses, a Monte Carlo check and the exponential bound at small n.

Exact masses come from enumerating cylinders below the q_n threshold. The
bound C * exp(-I n) is loose at these depths but must dominate inside the
window alpha <= 2*gamma - 16/n.
"""

from fractions import Fraction

from cfldp.bounds import check_bound
from cfldp.cylinder_tail import TailQuery, exact_tail
from cfldp.mc_sampler import McConfig, estimate_tail

alpha = Fraction(1)
print(f"lower tail  (2/n) log q_n <= {float(alpha)}")
print("  n   exact           MC (1e6)        bound      certificate")
for n in (10, 12, 14, 16, 18):
    ex = exact_tail(TailQuery(n, alpha, "lower"))
    mc = estimate_tail(McConfig(n, 1_000_000, seed=n, engine="markov"), alpha, "lower")
    row = check_bound(n, alpha, "lower")
    print(f"{n:3d}   {ex.value:.6e}   {mc.p_hat:.6e}   {row.bound:.2e}   {row.certificate}"
          f"{'' if row.in_window else '  (outside window)'}")
