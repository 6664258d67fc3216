"""The golden mean is the slowest point: all digits 1, q_n the Fibonacci numbers.

(2/n) log q_n approaches 2 log(phi) from below, off by about (2 log(phi) - log 5)/n, while a typical
point sits near pi^2 / (6 log 2).
"""

import math

import numpy as np

from cfldp.cf_core import convergents, default_bits, expand, golden, log_qn
from cfldp.mc_sampler import sample_log_qn
from cfldp.thermo_rate import ALPHA_MIN, TWO_GAMMA

for n in (10, 50, 200, 1000):
    g = golden(default_bits(n))
    digits = expand(g, n)
    q = convergents(digits)[-1].q
    rate = 2 * log_qn(g, n) / n
    print(f"n={n:5d}  all ones={set(digits) == {1}}  q_n has {len(str(q)):4d} digits  "
          f"(2/n) log q_n = {rate:.6f}  gap = {rate - ALPHA_MIN:.2e}  "
          f"predicted {(ALPHA_MIN - math.log(5)) / n:.2e}")

rng = np.random.Generator(np.random.Philox(key=1))
vals = [sample_log_qn(rng, 300) for _ in range(2000)]
print(f"\ntypical point, n=300: mean (2/n) log q_n = {np.mean(vals):.4f}  vs 2*gamma = {TWO_GAMMA:.4f}")
