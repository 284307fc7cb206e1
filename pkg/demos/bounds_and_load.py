"""Print the closed-form bounds at the headline parameters, then measure
sector load under random placement for one small configuration.

Run:  python demos/bounds_and_load.py
"""

import math

import numpy as np

from fileinsurer.bounds import BoundInputs, binom_stirling_upper, bounds_report
from fileinsurer.experiments import DISTS, ExperimentConfig, published_value, run_table3, verify_thm2_empirical

rep = bounds_report(BoundInputs())
print("capacity (bytes):     ", f"{rep['thm1_capacity_bytes']:.4g}")
print("collision probability:", f"{rep['thm2_collision_bound']:.3g}")
print("loss bound terms:     ", ", ".join(f"{t:.3g}" for t in rep["thm3"]["terms"]))
print("   third term, in-text form:", f"{rep['thm3']['third_term_in_text_form']:.3g}")
print("deposit ratio:        ", f"{rep['thm4']['deposit_ratio']:.4f}")

print("\nStirling-style bound on C(N, N/2) versus the exact value:")
for n in (2, 4, 10, 40):
    b = binom_stirling_upper(n, 0.5)
    exact = math.comb(n, n // 2)
    print(f"   N={n:<3} bound {b.value:>14.4g}   exact {exact:>14}   with sqrt factor {np.exp(b.log_value_sqrt):>12.4g}")

print("\ncollision frequency by simulation (10 sectors, capacity 50 files, half full):")
chk = verify_thm2_empirical(10, 50, 0.5, 20000, seed=1)
print(f"   observed {chk.observed_freq:.4f}  bound {chk.bound:.4f}")

print("\nmaximum sector usage, 10^5 backups on 20 sectors, 20 trials:")
for mode in ("reallocate", "refresh"):
    for dist in DISTS:
        got = run_table3(ExperimentConfig(10**5, 20, dist, mode, trials=20, seed=1))
        print(f"   {mode:<10} {dist:<15} {got:.3f}   published {published_value(mode, 10**5, 20, dist):.3f}")
