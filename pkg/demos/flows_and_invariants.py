"""
Flows on the five domains and their invariants
==============================================

Every holomorphic field w(z) = c z^2 + a z + b that we use generates a
one-parameter flow.  Here we classify a few of them, move points along the
flows and watch the invariant I(z) stay put.
"""

import numpy as np

from kernelquant.flows import Domain, FlowSpec, classify, evolve, invariant, invariant_value

flows = {
    "plane translation": FlowSpec.plane(0j, 1.0),
    "plane rotation about a shifted centre": FlowSpec.plane(0.7j, 0.4 + 1.0j),
    "disc hyperbolic": FlowSpec.disc(0.6, 0.8 - 0.3j),
    "disc elliptic": FlowSpec.disc(1.3, 0.5j),
    "disc, rho = 0": FlowSpec.disc(-0.5, 0.5),
    "annulus rotation": FlowSpec.rotation(Domain.ANNULUS, 0.9j, r=0.3),
    "punctured plane spiral": FlowSpec.rotation(Domain.PUNCTURED_PLANE, 1.0 + 1.0j),
}

for name, f in flows.items():
    cls = classify(f)
    print(f"{name:40s} {cls.kind.value:11s} quantizable={cls.quantizable}")

###############################################################################
# The flow is a group: sigma_s(sigma_t(z)) = sigma_{s+t}(z).

f = flows["disc hyperbolic"]
z = 0.1 + 0.2j
print("group law defect:", abs(evolve(f, 0.4, evolve(f, 0.3, z)) - evolve(f, 0.7, z)))

###############################################################################
# Along an orbit the invariant does not change.  The spiral is the exception:
# Re a != 0 stretches the orbits, so no invariant exists.

for name, f in flows.items():
    if not classify(f).quantizable:
        continue
    z0 = 0.4 + 0.2j if f.domain.kind is not Domain.ANNULUS else 0.5 + 0.2j
    orbit = [evolve(f, t, z0) for t in np.linspace(-1, 1, 9)]
    vals = np.array([invariant_value(f, z) for z in orbit])
    spec = invariant(f)
    print(f"{name:40s} I = {vals[0]: .6f}  spread {np.ptp(vals):.1e}  range ({spec.lo}, {spec.hi})")
