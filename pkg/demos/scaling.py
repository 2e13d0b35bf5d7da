"""Blocks per access as N grows, with a quadratic-in-log N fit."""
import numpy as np

from oram3.harness import run_bandwidth_suite

rep = run_bandwidth_suite([16, 64, 256], big_blocks=True, ops_factor=2)
for row in rep.bandwidth_table:
    print(f"N={row['N']:>5}  blocks/access={row['blocks_per_access']:>9.1f}  "
          f"bit blowup={row['blowup_bits']:>8.1f}")
print("power-law exponents on log N:", rep.fitted_exponent)
D = [r["logN"] for r in rep.bandwidth_table]
print("quadratic coefficients:", np.polyfit(D, [r["blocks_per_access"] for r in rep.bandwidth_table], 2))
