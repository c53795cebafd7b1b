import numpy as np
import pytest
from hypothesis import settings, strategies as st

from kernelquant.flows import Domain, FlowSpec
from kernelquant.numcore import MatrixMeasure

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


# one representative per case family with b != 0
FAMILY_FLOWS = {
    "exponential": FlowSpec.plane(0j, 1.0 - 0.5j),
    "pochhammer": FlowSpec.plane(0.7j, 0.4 + 1.0j),
    "mp_hyperbolic": FlowSpec.disc(0.6, 0.8 - 0.3j),
    "mp_elliptic": FlowSpec.disc(1.3, 0.5j),
    "laguerre": FlowSpec.disc(-0.5, 0.5),
}

B0_FLOWS = {
    "plane_rotation": FlowSpec.rotation(Domain.PLANE, 0.8j),
    "punctured_plane": FlowSpec.rotation(Domain.PUNCTURED_PLANE, -1.1j),
    "disc_rotation": FlowSpec.rotation(Domain.DISC, 1.4j),
    "punctured_disc": FlowSpec.rotation(Domain.PUNCTURED_DISC, 0.5j),
    "annulus": FlowSpec.rotation(Domain.ANNULUS, 0.9j, r=0.3),
}


@pytest.fixture(params=sorted(FAMILY_FLOWS))
def family_flow(request):
    return FAMILY_FLOWS[request.param]


def random_psd(rng, d, rank=None):
    rank = d if rank is None else rank
    G = rng.normal(size=(rank, d)) + 1j * rng.normal(size=(rank, d))
    return G.conj().T @ G / rank


def random_measure(rng, k=None, d=1, spread=2.0):
    k = int(rng.integers(1, 6)) if k is None else k
    lam = np.sort(rng.uniform(-spread, spread, k))
    while np.any(np.diff(lam) < 1e-3):
        lam = np.sort(rng.uniform(-spread, spread, k))
    W = np.array([random_psd(rng, d) for _ in range(k)])
    W /= np.trace(W.sum(axis=0)).real / d
    return MatrixMeasure(lam, W)


finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, finite, finite)
seeds = st.integers(0, 2 ** 31 - 1)
