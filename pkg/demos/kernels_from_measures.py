"""
Invariant kernels from spectral measures
========================================

A matrix-valued measure on the real line determines a flow-invariant positive
kernel K(v, z) = sum_n C_n I(v, z)^n.  We build one, check that it is a
positive kernel, that it does not see the flow, and that integrating the
one-atom kernels against the measure gives it back.
"""

import numpy as np

from kernelquant.flows import FlowSpec, evolve
from kernelquant.kernelspace import block_gram, flow_invariance_residual, kernel_eval, sample_pairs, sample_points
from kernelquant.numcore import MatrixMeasure
from kernelquant.polyfam import kernel_lambda
from kernelquant.spectral import bochner_reconstruct, series_from_measure

rng = np.random.default_rng(0)

# three atoms with random 2x2 positive weights
lam = np.array([-0.8, 0.4, 1.1])
W = []
for _ in lam:
    G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    W.append(G.conj().T @ G / 3)
mu = MatrixMeasure(lam, np.array(W))

f = FlowSpec.disc(0.6, 0.8 - 0.3j)
S = series_from_measure(mu, f, 60)
print("C_0 =\n", np.round(S.coeff(0), 4))

###############################################################################
# Positivity: the block Gram matrix over a handful of points.

pts = list(sample_points(f, 8, seed=1))
B = block_gram(S, pts)
print("min eigenvalue of the 16x16 Gram matrix:", np.linalg.eigvalsh(B).min())

###############################################################################
# Invariance under the flow, for a few times.

pairs = sample_pairs(f, 32)
for t in (-1.0, 0.5, 1.0):
    print(f"t = {t:+.1f}: max |K(sigma v, sigma z) - K(v, z)| = {flow_invariance_residual(S, t, pairs):.1e}")

###############################################################################
# The spectral decomposition: K is the W-weighted sum of scalar kernels, one
# per atom.

v, z = 0.1 - 0.2j, 0.3 + 0.1j
direct = kernel_eval(S, v, z)
summed = sum(kernel_lambda(f, v, z, l, 60) * w for l, w in zip(mu.lambdas, mu.weights))
print("decomposition defect:", np.abs(direct - summed).max())
print("round-trip residual:", bochner_reconstruct(mu, f, v, z, 60).residual)

###############################################################################
# For the plane translation the scalar kernel of one atom is exp(i lam (z - conj v)).

shift = FlowSpec.plane(0j, 1.0)
atom = MatrixMeasure(np.array([0.9]), np.array([[[1.0 + 0j]]]))
K = series_from_measure(atom, shift, 50)
print("Bochner kernel:", kernel_eval(K, v, z)[0, 0], np.exp(0.9j * (z - np.conj(v))))
print("after moving both points:", kernel_eval(K, evolve(shift, 0.7, v), evolve(shift, 0.7, z))[0, 0])
