"""
When the kernel is not summable
===============================

For alpha > 1 a moving average with coefficients j^{-beta}, 1/alpha < beta < 1,
is in L^alpha but its coefficients do not sum. Partial sums then grow
faster than n^{1/alpha}, and the rescaling used everywhere else in this
package stops working. We truncate the kernel far out and watch the
scale of S_n.
"""

import numpy as np

from stablefield import StableFieldSpec, exact_scale

alpha, beta, T = 1.5, 0.8, 20_000

# causal taps beta_0 = 1 and beta_j = j^-beta on offsets 0..T
taps = np.r_[1.0, np.arange(1, T + 1, dtype=float) ** -beta]
spec = StableFieldSpec.dissipative(alpha, np.r_[np.zeros(T), taps])

print(" n    sigma_n/n^(1/a)   sigma_n/n^(1/a+1-beta)")
for n in (25, 50, 100, 200, 400, 800):
    sigma = exact_scale(spec, np.ones(2 * n + 1))
    print(f"{n:4d}  {sigma / n ** (1 / alpha):14.3f}  {sigma / n ** (1 / alpha + 1 - beta):14.3f}")

# the first column keeps growing like n^{1-beta}; the second settles down
