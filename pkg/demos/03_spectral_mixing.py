"""Token mixing in a learned unitary basis.

Shows the two mixers on a toy value matrix: zero phases leave it
unchanged, any phases keep its norm, and the Chebyshev-filtered variant
reduces to the plain one when the filter is the identity polynomial.
Ends with a finite-difference check of the whole classifier.

Run:  python3 demos/03_spectral_mixing.py
"""

import numpy as np

from synvolution.gradcheck import sweep
from synvolution.kpm import ChebFilter
from synvolution.model import kernelution, synvolution
from synvolution.numeric import Rng
from synvolution.unitary import init_dhhp

rng = Rng(3)
n, d = 16, 4
p = init_dhhp(n, rng)
V = rng.normal((n, d)) + 0j
lam = rng.uniform(-1, 1, n)

print("zero phases:        max|out - V| =", f"{np.max(np.abs(synvolution(p, np.zeros(n), V) - V)):.1e}")
out = synvolution(p, lam, V)
print("random phases:      |out| - |V|  =", f"{np.linalg.norm(out) - np.linalg.norm(V):+.1e}")
ident = ChebFilter(3, np.array([0.0, 1.0, 0.0, 0.0]))
print("identity filter:    max|kern - syn| =", f"{np.max(np.abs(kernelution(p, ident, lam, V) - out)):.1e}")
damped = ChebFilter(3, np.array([0.2, 0.8, -0.5, 0.3]), "jackson")
print("damped filter:      |out| - |V|  =",
      f"{np.linalg.norm(kernelution(p, damped, lam, V)) - np.linalg.norm(V):+.1e}")

print("\nposition mixing: how much of position 0 leaks to each position")
e0 = np.zeros((n, 1), complex)
e0[0] = 1
print(np.round(np.abs(synvolution(p, lam, e0)).ravel(), 3))

print("\ngradient check of every registered operation:")
for name, reports in sweep(tol=1e-5).items():
    print(f"  {name:<18} worst rel error {max(r.worst for r in reports):.1e}")
