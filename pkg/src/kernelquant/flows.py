"""Holomorphic one-parameter flows on the five non-compact circular domains.

A flow is generated by w(z) = c z^2 + a z + b.  The admissible coefficients
depend on the domain:

* punctured plane, punctured disc, annulus: c = b = 0 (and a = i*omega on
  the bounded ones),
* plane: c = 0,
* disc: c = -conj(b), a = 2i*omega.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numcore import KernelQuantError, complex_from_json, complex_to_json

DOMAIN_SLACK = 1e-12
RHO_SWITCH = 1e-12


class InvalidFlow(KernelQuantError, ValueError):
    pass


class DomainError(KernelQuantError, ValueError):
    pass


class NotQuantizable(KernelQuantError, ValueError):
    pass


class Domain(enum.Enum):
    PLANE = "plane"
    PUNCTURED_PLANE = "punctured_plane"
    DISC = "disc"
    PUNCTURED_DISC = "punctured_disc"
    ANNULUS = "annulus"


class FlowKind(enum.Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"
    LOXODROMIC = "loxodromic"


@dataclass(frozen=True)
class RiemannDomain:
    kind: Domain
    r: Optional[float] = None

    def __post_init__(self):
        if self.kind is Domain.ANNULUS:
            if self.r is None or not (0.0 < self.r < 1.0):
                raise InvalidFlow("annulus needs an inner radius r in (0, 1)")
        elif self.r is not None:
            raise InvalidFlow(f"inner radius only applies to the annulus, not {self.kind.value}")

    def contains(self, z, slack: float = DOMAIN_SLACK) -> bool:
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return False
        m = abs(z)
        k = self.kind
        if k is Domain.PLANE:
            return True
        if k is Domain.PUNCTURED_PLANE:
            return m > 0.0
        if k is Domain.DISC:
            return m < 1.0 + slack
        if k is Domain.PUNCTURED_DISC:
            return 0.0 < m < 1.0 + slack
        return self.r - slack < m < 1.0 + slack


@dataclass(frozen=True)
class FlowSpec:
    """w(z) = c z^2 + a z + b on ``domain``; validated on construction."""

    domain: RiemannDomain
    c: complex = 0j
    a: complex = 0j
    b: complex = 0j

    def __post_init__(self):
        for name in ("c", "a", "b"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise InvalidFlow(f"coefficient {name} is not finite")
            object.__setattr__(self, name, v)
        _validate(self)

    @classmethod
    def plane(cls, a=0j, b=1.0):
        return cls(RiemannDomain(Domain.PLANE), 0j, a, b)

    @classmethod
    def disc(cls, omega: float, b):
        b = complex(b)
        return cls(RiemannDomain(Domain.DISC), -b.conjugate(), 2j * omega, b)

    @classmethod
    def rotation(cls, domain: Domain, a, r: Optional[float] = None):
        return cls(RiemannDomain(domain, r), 0j, a, 0j)

    @property
    def omega(self) -> float:
        """Real rotation parameter: a = i*omega, or a = 2i*omega on the disc."""
        if self.domain.kind is Domain.DISC:
            return self.a.imag / 2.0
        return self.a.imag

    @property
    def quantizable(self) -> bool:
        return self.a.real == 0.0

    def w(self, z):
        return self.c * z * z + self.a * z + self.b

    def to_json(self) -> dict:
        return {
            "domain": self.domain.kind.value,
            "r": self.domain.r,
            "c": complex_to_json(self.c),
            "a": complex_to_json(self.a),
            "b": complex_to_json(self.b),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FlowSpec":
        try:
            kind = Domain(obj["domain"])
        except (KeyError, ValueError) as exc:
            raise InvalidFlow(f"unknown domain {obj.get('domain')!r}") from exc
        r = obj.get("r")
        dom = RiemannDomain(kind, None if r is None else float(r))
        return cls(
            dom,
            complex_from_json(obj.get("c")),
            complex_from_json(obj.get("a")),
            complex_from_json(obj.get("b")),
        )


def _close(x: complex, y: complex, scale: float) -> bool:
    return abs(x - y) <= 1e-12 * max(1.0, scale)


def _validate(f: FlowSpec) -> None:
    k = f.domain.kind
    scale = abs(f.a) + abs(f.b) + abs(f.c)
    if scale == 0.0:
        raise InvalidFlow("w(z) vanishes identically; the flow is trivial")
    if k is Domain.PLANE:
        if f.c != 0:
            raise InvalidFlow("plane flows need c = 0")
    elif k in (Domain.PUNCTURED_PLANE, Domain.PUNCTURED_DISC, Domain.ANNULUS):
        if f.b != 0 or f.c != 0:
            raise InvalidFlow(f"{k.value} flows need b = c = 0")
        if k is not Domain.PUNCTURED_PLANE and f.a.real != 0:
            raise InvalidFlow(f"{k.value} only admits rotations a = i*omega")
    else:
        if not _close(f.c, -f.b.conjugate(), scale):
            raise InvalidFlow("disc flows need c = -conj(b)")
        if f.a.real != 0:
            raise InvalidFlow("disc flows need a = 2i*omega with omega real")


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class FlowClass:
    kind: FlowKind
    quantizable: bool

    def to_json(self) -> dict:
        return {"class": self.kind.value, "quantizable": self.quantizable}


def disc_rho_squared(f: FlowSpec) -> float:
    return abs(f.b) ** 2 - f.omega ** 2


def _rho_vanishes(f: FlowSpec) -> bool:
    return abs(disc_rho_squared(f)) <= RHO_SWITCH * (f.omega ** 2 + abs(f.b) ** 2)


def classify(f: FlowSpec) -> FlowClass:
    """Conjugacy class of the flow inside the Moebius group.

    On the plane with a != 0 the flow is conjugate, by a translation, to
    z -> e^{at} z, so it takes the class of the multiplier.
    """
    quant = f.a.real == 0.0
    if f.domain.kind is Domain.DISC and f.b != 0:
        if _rho_vanishes(f):
            kind = FlowKind.PARABOLIC
        elif disc_rho_squared(f) > 0:
            kind = FlowKind.HYPERBOLIC
        else:
            kind = FlowKind.ELLIPTIC
        return FlowClass(kind, True)
    if f.a == 0:
        # only the plane translation z + bt is left
        return FlowClass(FlowKind.PARABOLIC, True)
    kind = FlowKind.ELLIPTIC if quant else FlowKind.LOXODROMIC
    return FlowClass(kind, quant)


# ---------------------------------------------------------------------------
# evolution


def _finite_or_raise(z: complex) -> complex:
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise OverflowError("flow evaluation overflowed")
    return z


def evolve(f: FlowSpec, t: float, z) -> complex:
    """sigma_t(z) for the flow generated by ``f``."""
    z = complex(z)
    if not f.domain.contains(z):
        raise DomainError(f"{z} is not in the {f.domain.kind.value}")
    t = float(t)
    k = f.domain.kind
    try:
        if k is Domain.DISC and f.b != 0:
            return _finite_or_raise(_evolve_disc(f, t, z))
        if f.b == 0:
            return _finite_or_raise(cmath.exp(f.a * t) * z)
        if f.a == 0:
            return z + f.b * t
        with np.errstate(over="ignore", invalid="ignore"):
            e = complex(np.expm1(f.a * t))
        return _finite_or_raise(z + e * z + (f.b / f.a) * e)
    except OverflowError as exc:
        raise OverflowError(f"flow evaluation overflowed at t={t}") from exc


def _evolve_disc(f: FlowSpec, t: float, z: complex) -> complex:
    om, b = f.omega, f.b
    bb = b.conjugate()
    if _rho_vanishes(f):
        return (z * (1 + 1j * om * t) + b * t) / (z * bb * t + 1 - 1j * om * t)
    rho = cmath.sqrt(complex(disc_rho_squared(f)))
    ch, sh = cmath.cosh(rho * t), cmath.sinh(rho * t)
    num = z * (rho * ch + 1j * om * sh) + b * sh
    den = z * bb * sh + rho * ch - 1j * om * sh
    return num / den


# ---------------------------------------------------------------------------
# invariants


@dataclass(frozen=True)
class InvariantSpec:
    """nu(I) = i*(alpha I^2 + beta I + gamma) on the range (lo, hi)."""

    flow: FlowSpec
    nu_coeffs: tuple
    lo: float
    hi: float

    def nu(self, I):
        al, be, ga = self.nu_coeffs
        return 1j * (al * I * I + be * I + ga)


def invariant(f: FlowSpec) -> InvariantSpec:
    """Flow invariant data, by domain: z conj(z) on the punctured domains and
    the annulus, the plane and disc formulas otherwise (also when b = 0)."""
    if not f.quantizable:
        raise NotQuantizable("flows with Re a != 0 admit no non-constant invariant kernel")
    k = f.domain.kind
    om = f.omega
    b2 = abs(f.b) ** 2
    inf = math.inf
    if k in (Domain.PUNCTURED_PLANE, Domain.PUNCTURED_DISC, Domain.ANNULUS):
        lo, hi = {
            Domain.PUNCTURED_PLANE: (0.0, inf),
            Domain.PUNCTURED_DISC: (0.0, 1.0),
            Domain.ANNULUS: ((f.domain.r or 0.0) ** 2, 1.0),
        }[k]
        return InvariantSpec(f, (0.0, om, 0.0), lo, hi)
    if k is Domain.PLANE:
        if om == 0:
            lo, hi = -inf, inf
        elif om > 0:
            lo, hi = -b2 / om, inf
        else:
            lo, hi = -inf, -b2 / om
        return InvariantSpec(f, (0.0, om, b2), lo, hi)
    if f.b != 0:
        lo, hi = -inf, inf
    else:
        lo, hi = (0.0, inf) if om > 0 else (-inf, 0.0)
    return InvariantSpec(f, (1.0, 2.0 * om, b2), lo, hi)


def invariant_pair(f: FlowSpec, v, z) -> complex:
    """Sesqui-holomorphic extension I(conj(v), z); real on the diagonal."""
    v, z = complex(v), complex(z)
    vb = v.conjugate()
    k = f.domain.kind
    b, bb = f.b, f.b.conjugate()
    if k is Domain.PLANE:
        return f.omega * vb * z + 1j * bb * z - 1j * b * vb
    if k is Domain.DISC:
        return (2 * f.omega * vb * z + 1j * bb * z - 1j * b * vb) / (1 - vb * z)
    return vb * z


def invariant_pair_dz(f: FlowSpec, v, z) -> complex:
    """d/dz of I(conj(v), z)."""
    v, z = complex(v), complex(z)
    vb = v.conjugate()
    k = f.domain.kind
    b, bb = f.b, f.b.conjugate()
    if k is Domain.PLANE:
        return f.omega * vb + 1j * bb
    if k is Domain.DISC:
        num = 2 * f.omega * vb * z + 1j * bb * z - 1j * b * vb
        den = 1 - vb * z
        return ((2 * f.omega * vb + 1j * bb) * den + vb * num) / (den * den)
    return vb


def invariant_value(f: FlowSpec, z) -> float:
    if not f.quantizable:
        raise NotQuantizable("flows with Re a != 0 admit no invariant for quantization")
    z = complex(z)
    if not f.domain.contains(z):
        raise DomainError(f"{z} is not in the {f.domain.kind.value}")
    return invariant_pair(f, z, z).real
