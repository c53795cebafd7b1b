"""
Gram tables and the difference equation
=======================================

The kernel coefficients C_l fix all inner products Gamma_m^* Gamma_n of the
coherent vectors.  The table obeys a two-variable difference equation; here
we see it hold, and see a single corrupted entry light up only its own
neighbourhood.
"""

import numpy as np

from kernelquant.flows import FlowSpec
from kernelquant.gram import beta_coeff, beta_probe, gram_from_series, verify_difference_eq
from kernelquant.numcore import MatrixMeasure
from kernelquant.spectral import L2Model, series_from_measure

f = FlowSpec.plane(0.7j, 0.4 + 1.0j)

###############################################################################
# The expansion coefficients of I(v, z)^l in conj(v)^m z^n, from the closed
# formula and from an FFT of the sampled powers.

P = beta_probe(f, 4, 8)
worst = max(abs(beta_coeff(f, m, n, l) - P[m, n, l]) for m in range(5) for n in range(5) for l in range(9))
print("beta formula vs FFT extraction:", worst)

###############################################################################
# Build a table from a measure, and compare it with inner products computed
# directly in L^2(mu).

mu = MatrixMeasure(np.array([-1.0, 0.2, 1.5]), np.array([[[0.3]], [[0.5]], [[0.2]]]) + 0j)
S = series_from_measure(mu, f, 24)
g = gram_from_series(S.coeffs, f, 12)
G = L2Model(mu, f, 12).gram()
print("table vs L^2(mu):", np.abs(G - g.blocks).max() / np.abs(G).max())
print("difference equation residual:", verify_difference_eq(g).max())

###############################################################################
# Corrupt one entry.  The residual is local.

bad = g.with_block(4, 5, 10.0)
R = verify_difference_eq(bad)
print("cells with residual > 1e-8:")
print(np.argwhere(R > 1e-8))
