"""Sketch of the rate function I(alpha) from the pressure of the Gauss map.

I vanishes at 2*gamma, climbs steeply towards alpha_min = 2 log(phi) and grows
with slope approaching 1/2 for large alpha.
"""

from cfldp.thermo_rate import ALPHA_MIN, TWO_GAMMA, pressure, rate_point

print(f"P(1) = {pressure(1.0).value:.2e}   (Gauss measure is the equilibrium state)")
print(f"P(2) = {pressure(2.0).value:.6f}\n")

print(" alpha      t_alpha     I(alpha)    I'(alpha)")
for alpha in [ALPHA_MIN + 1e-2, 1.2, 1.6, 2.0, TWO_GAMMA, 3.0, 4.0, 6.0, 10.0, 20.0, 50.0]:
    rp = rate_point(alpha, refine=False)
    bar = "#" * min(int(round(rp.I * 20)), 60)
    print(f"{alpha:7.3f}  {rp.t_alpha:10.5f}  {rp.I:10.5f}  {rp.Iprime:10.5f}  {bar}")
