"""Chebyshev interpolation, Gibbs ringing and the damping kernels.

Interpolates a step, prints each kernel's overshoot, then looks at how
fast the coefficients of a smooth and of a kinked function decay.

Run:  python3 demos/02_gibbs_kernels.py [out.csv]
"""

import sys

import numpy as np

from synvolution.kpm import KERNELS, cheb_series, cpi_coefficients, gibbs_factors, step_demo, write_step_demo

K = 50
cols = step_demo(K)
print(f"sign(x) with K={K}: max |p(x)| per kernel (1.0 means no overshoot)")
for name in KERNELS:
    peak = np.max(np.abs(cols["p_" + name]))
    print(f"  {name:<10} {peak:.4f}   g_1={gibbs_factors(name, K)[1]:.4f}  g_K={gibbs_factors(name, K)[-1]:.2e}")

print()
x = np.linspace(-1, 1, 1001)
for K in (4, 6, 8, 10, 12):
    err = np.max(np.abs(cheb_series(cpi_coefficients(np.exp, K), x) - np.exp(x)))
    print(f"e^x, K={K:2d}: max error {err:.1e}")

mu = cpi_coefficients(np.abs, 512)
k = np.arange(4, 65, 2)
slope = np.polyfit(np.log(k), np.log(np.abs(mu[k])), 1)[0]
print(f"\n|x| coefficients decay like k^{slope:.2f} (the kink limits smoothness)")

if len(sys.argv) > 1:
    write_step_demo(sys.argv[1], 50)
    print(f"wrote {sys.argv[1]}")
