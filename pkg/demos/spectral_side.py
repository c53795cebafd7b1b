"""
The spectral side: Jacobi matrices and the generator
====================================================

For scalar measures the orthonormal polynomials and their Jacobi matrix
recover the atoms.  In the L^2(mu) model the coherent vectors are generated
by the polynomials K_n applied to i times the multiplication operator.
"""

import numpy as np

from kernelquant.flows import Domain, FlowSpec
from kernelquant.numcore import MatrixMeasure
from kernelquant.spectral import L2Model, fhat_spectrum, jacobi_matrix, orthonormal_polys

rng = np.random.default_rng(3)
lam = np.sort(rng.uniform(-2, 2, 6))
w = rng.uniform(0.1, 1, 6)
mu = MatrixMeasure(lam, (w / w.sum()).reshape(-1, 1, 1) + 0j)

J = jacobi_matrix(mu, 6)
print("atoms:      ", np.round(lam, 10))
print("eigenvalues:", np.round(J.eigenvalues(), 10))

P = orthonormal_polys(mu, 5)
print("three-term recurrence vs Gram-Schmidt:", np.abs(J.polys() - P.coeffs).max())

###############################################################################
# Gamma_n = K_n(iF) Gamma_0 in L^2(mu), and the truncated generator of a
# rotation has spectrum {n omega}.

f = FlowSpec.disc(0.6, 0.8 - 0.3j)
model = L2Model(mu, f, 10)
print("generator identity defect:", np.abs(model.gammas_from_generator() - model.gammas()).max())
print("rotation spectrum:", np.round(fhat_spectrum(FlowSpec.rotation(Domain.PUNCTURED_DISC, 0.5j), 6).real, 12))
print("Gamma rank (6 atoms, N = 10):", model.gamma_rank())
