"""Quantizing polynomials K_n(i lambda) and the lambda-resolved coherent
states and kernels built from them.

The family is fixed by the three-term recurrence

    K_{n+1} = [x K_n - n a K_n - (n-1) c K_{n-1}] / ((n+1) b),   x = i lambda,

with K_{-1} = 0 and K_0 = 1.  Closed forms (Pochhammer, exponential,
Meixner-Pollaczek, Laguerre) are provided as independent cross-checks.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property

import mpmath
import numpy as np
from scipy.special import poch

from .flows import Domain, FlowSpec, evolve, invariant_pair
from .numcore import DivergenceError, KernelQuantError

DIVERGENCE_BLOCK = 8
DIVERGENCE_RUN = 5


class DegenerateRecurrence(KernelQuantError, ValueError):
    pass


class ClosedFormUnavailable(KernelQuantError, ValueError):
    pass


class CaseError(KernelQuantError, ValueError):
    pass


@dataclass(frozen=True)
class PolyFamily:
    """Coefficient table: K_n(x) = sum_l coeffs[n, l] x^l, x = i*lambda."""

    flow: FlowSpec
    coeffs: np.ndarray

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    def values(self, lam) -> np.ndarray:
        """K_0..K_N at i*lam; shape (N+1,) + shape(lam).

        Evaluated through the recurrence itself rather than the monomial
        table, which loses digits at high degree.
        """
        return recurrence_values(self.flow, self.N, lam)

    def poly_at(self, n: int, x) -> complex:
        """Evaluate K_n at a generic argument x (scalar or square matrix)."""
        row = self.coeffs[n, : n + 1]
        if np.ndim(x) == 2:
            out = np.zeros_like(x, dtype=complex)
            eye = np.eye(x.shape[0], dtype=complex)
            for c in row[::-1]:
                out = out @ x + c * eye
            return out
        acc = 0j
        for c in row[::-1]:
            acc = acc * x + c
        return acc

    @cached_property
    def leading(self) -> np.ndarray:
        return np.array([self.coeffs[n, n] for n in range(self.N + 1)])


def _require_b(f: FlowSpec) -> None:
    if f.b == 0:
        raise DegenerateRecurrence("b = 0: the Gram table is diagonal and no recurrence exists")


def build_recurrence(f: FlowSpec, N: int) -> PolyFamily:
    _require_b(f)
    if N < 0:
        raise ValueError("N must be non-negative")
    a, b, c = f.a, f.b, f.c
    T = np.zeros((N + 1, N + 1), dtype=complex)
    T[0, 0] = 1.0
    for n in range(N):
        nxt = np.zeros(N + 1, dtype=complex)
        nxt[1:] += T[n, :-1]
        nxt -= n * a * T[n]
        if n >= 1:
            nxt -= (n - 1) * c * T[n - 1]
        T[n + 1] = nxt / ((n + 1) * b)
    T.setflags(write=False)
    return PolyFamily(f, T)


def recurrence_values(f: FlowSpec, N: int, lam) -> np.ndarray:
    _require_b(f)
    lam = np.asarray(lam, dtype=float)
    x = 1j * lam
    out = np.zeros((N + 1,) + lam.shape, dtype=complex)
    out[0] = 1.0
    prev = np.zeros(lam.shape, dtype=complex)
    for n in range(N):
        out[n + 1] = (x * out[n] - n * f.a * out[n] - (n - 1) * f.c * prev) / ((n + 1) * f.b)
        prev = out[n]
    return out


# ---------------------------------------------------------------------------
# closed forms


def family_name(f: FlowSpec) -> str:
    """Which printed closed-form family applies to ``f``."""
    _require_b(f)
    k = f.domain.kind
    om = f.omega
    if k is Domain.PLANE:
        return "exponential" if om == 0 else "pochhammer"
    if k is Domain.DISC:
        if om == 0:
            raise ClosedFormUnavailable("disc flow with omega = 0 has no printed closed family")
        if abs(abs(f.b) ** 2 - om ** 2) <= 1e-12 * (abs(f.b) ** 2 + om ** 2):
            return "laguerre"
        return "meixner_pollaczek"
    raise CaseError(f"no closed form for b != 0 on the {k.value}")


def family_constant(f: FlowSpec) -> complex:
    """closed_form / recurrence ratio: i/omega for Pochhammer, 1 otherwise."""
    return 1j / f.omega if family_name(f) == "pochhammer" else 1.0 + 0j


def meixner_pollaczek_params(f: FlowSpec) -> tuple[complex, complex]:
    """(A, phi) with A = 2 sgn(omega) sqrt(|b|^2 - omega^2), cos(phi) = |omega|/|b|.

    phi lies in [0, pi/2] in the hyperbolic case and on the positive
    imaginary axis in the elliptic one.
    """
    om, bm = f.omega, abs(f.b)
    A = math.copysign(2.0, om) * cmath.sqrt(bm * bm - om * om)
    ratio = abs(om) / bm
    phi = complex(math.acos(ratio)) if ratio <= 1 else 1j * math.acosh(ratio)
    return A, phi


ORACLE_DPS = 40


# a private context with fixed precision: mpmath.workdps would change the
# precision shared by every thread
_MP = mpmath.MPContext()
_MP.dps = ORACLE_DPS


def meixner_pollaczek0(n: int, x, phi) -> complex:
    """P_n^{(0)}(x; phi), the mu -> 0 limit of the 2F1 representation.

    For n >= 1 the factor (2mu)_n / n! vanishes while the terms with k >= 1
    keep (2mu)_n/(2mu)_k -> (n-1)!/(k-1)!.  The alternating sum is formed
    in ORACLE_DPS-digit arithmetic; in doubles it loses ~8 digits by n = 25.
    """
    if n == 0:
        return 1.0 + 0j
    ctx = _MP
    ph = ctx.mpc(phi)
    y = 1 - ctx.exp(-2j * ph)
    ix = 1j * ctx.mpc(x)
    # k = 1 term is -ix y; then t_k / t_{k-1} = (k-1-n)(ix+k-1) y / (k (k-1))
    t = -ix * y
    s = t
    for k in range(2, n + 1):
        t = t * (k - 1 - n) * (ix + k - 1) * y / (k * (k - 1))
        s += t
    return complex(ctx.exp(1j * n * ph) * s)


def laguerre_minus1(n: int, x) -> complex:
    """L_n^{(-1)}(x) = (0)_n/n! 1F1(-n; 0; x) in the alpha -> -1 limit."""
    if n == 0:
        return 1.0 + 0j
    xx = _MP.mpc(x)
    # binom(n-1, k-1) (-x)^k / k!, built term by term
    t = -xx
    s = t
    for k in range(2, n + 1):
        t = t * (n - k + 1) * (-xx) / ((k - 1) * k)
        s += t
    return complex(s)


def closed_form(f: FlowSpec, n: int, lam: float) -> complex:
    """Printed closed form of K_n(i lam), prefactors included."""
    fam = family_name(f)
    b, om = f.b, f.omega
    lam = float(lam)
    if fam == "exponential":
        return (1j * lam / b) ** n / math.factorial(n)
    if fam == "pochhammer":
        return (-1j * om) ** (n - 1) / (math.factorial(n) * b ** n) * poch(-lam / om, n)
    if fam == "laguerre":
        return (om / (1j * b)) ** n * laguerre_minus1(n, lam / om)
    A, phi = meixner_pollaczek_params(f)
    s = cmath.sin(phi)
    return (A / (2j * b * s)) ** n * meixner_pollaczek0(n, -lam / A, phi)


def generating_function(f: FlowSpec, u, lam: float) -> complex:
    """Closed generating function sum_n closed_form(n) u^n (principal branch)."""
    fam = family_name(f)
    b, om = f.b, f.omega
    u = complex(u)
    if fam == "exponential":
        return cmath.exp(1j * lam * u / b)
    if fam == "pochhammer":
        # (i/omega) 1F0(-lam/omega; -i omega u/b) = (i/omega) (1 + i omega u/b)^(lam/omega)
        return 1j / om * (1 + 1j * om * u / b) ** (lam / om)
    if fam == "laguerre":
        return cmath.exp(lam * u / (om * u - 1j * b))
    A, phi = meixner_pollaczek_params(f)
    s = cmath.sin(phi)
    num = 2j * b * s - A * cmath.exp(-1j * phi) * u
    den = 2j * b * s - A * cmath.exp(1j * phi) * u
    return (num / den) ** (1j * lam / A)


# ---------------------------------------------------------------------------
# lambda-resolved coherent states and kernels


def check_divergence(mags: np.ndarray) -> None:
    """Raise DivergenceError if the term magnitudes visibly grow.

    The terms are cut into blocks of DIVERGENCE_BLOCK; if the block maxima
    grow DIVERGENCE_RUN times in a row the series is declared divergent.
    """
    mags = np.asarray(mags, dtype=float)
    if not np.all(np.isfinite(mags)):
        raise DivergenceError("series terms overflowed")
    nb = len(mags) // DIVERGENCE_BLOCK
    if nb > DIVERGENCE_RUN:
        peaks = mags[: nb * DIVERGENCE_BLOCK].reshape(nb, DIVERGENCE_BLOCK).max(axis=1)
        run = 0
        for prev, cur in zip(peaks[:-1], peaks[1:]):
            run = run + 1 if cur > prev else 0
            if run >= DIVERGENCE_RUN:
                raise DivergenceError("partial sums keep growing; point is outside the convergence region")


def guarded_sum(terms: np.ndarray) -> complex:
    """Sum scalar series terms, refusing visibly divergent ones."""
    check_divergence(np.abs(terms))
    return complex(np.sum(terms))


def convergence_radius(f: FlowSpec) -> float:
    """Radius in z of the coherent-state series sum_n K_n(i lam) z^n.

    Plane: entire for omega = 0, |b/omega| otherwise.  Disc: 1, except in
    the elliptic subcase where the generating function has its poles at
    |z| = exp(-arccosh(|omega|/|b|)).
    """
    _require_b(f)
    om, bm = f.omega, abs(f.b)
    if f.domain.kind is Domain.PLANE:
        return math.inf if om == 0 else bm / abs(om)
    if abs(om) > bm and not abs(bm * bm - om * om) <= 1e-12 * (bm * bm + om * om):
        return math.exp(-math.acosh(abs(om) / bm))
    return 1.0


def coherent_lambda(f: FlowSpec, z, lam: float, N: int) -> complex:
    """sum_{n<=N} K_n(i lam) z^n."""
    with np.errstate(over="ignore", invalid="ignore"):
        K = recurrence_values(f, N, lam)
        terms = K * complex(z) ** np.arange(N + 1)
    return guarded_sum(terms)


def kernel_lambda(f: FlowSpec, v, z, lam: float, N: int) -> complex:
    """K(conj v, z; lam) through the invariant: coherent_lambda at I(conj v, z)/(i conj b)."""
    u = invariant_pair(f, v, z) / (1j * f.b.conjugate())
    return coherent_lambda(f, u, lam, N)


def kernel_lambda_product(f: FlowSpec, v, z, lam: float, N: int) -> complex:
    """K(conj v, z; lam) as conj(coherent_lambda(v)) * coherent_lambda(z)."""
    return coherent_lambda(f, v, lam, N).conjugate() * coherent_lambda(f, z, lam, N)


def kernel_lambda_residual(f: FlowSpec, v, z, lam: float, N: int) -> tuple[complex, float]:
    """Both evaluation paths; returns (invariant-path value, |difference|)."""
    k1 = kernel_lambda(f, v, z, lam, N)
    k2 = kernel_lambda_product(f, v, z, lam, N)
    return k1, abs(k1 - k2)


def equivariance_residual(f: FlowSpec, z, t: float, lam: float, N: int) -> float:
    """|K(sigma_t z; lam) - e^{i lam t} K(z; lam)| relative to max(1, |K(z; lam)|)."""
    k0 = coherent_lambda(f, z, lam, N)
    k1 = coherent_lambda(f, evolve(f, t, z), lam, N)
    return abs(k1 - cmath.exp(1j * lam * t) * k0) / max(1.0, abs(k0))
