"""Matrix-valued positive kernels K(v, z) = Phi(I(conj v, z)) built from a
power series in the flow invariant, and the local quantization conditions
they must satisfy.

``kernel_eval(S, v, z)`` follows the convention K(conj v, z): the first point
enters antiholomorphically, so kernel_eval(S, z, v) = kernel_eval(S, v, z)^H.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.stats import qmc

from .flows import Domain, FlowSpec, DomainError, evolve, invariant, invariant_pair, invariant_pair_dz
from .numcore import (
    KernelQuantError,
    ModeError,
    PSD_TOL,
    TruncatedSeries,
    check_hermitian,
    mat_min_eigenvalue,
    psd_sqrt,
    series_exp,
)
from .polyfam import check_divergence, convergence_radius

SINGULAR_COND = 1e12
DEFAULT_SAMPLES = 32


class SingularKernel(KernelQuantError, ArithmeticError):
    pass


class UnsupportedGaugeCase(KernelQuantError, ValueError):
    pass


def _matrix_stack(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=complex)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1, 1)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ModeError(f"series coefficients must be scalars or square matrices, got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("a series needs at least one coefficient")
    return arr


@dataclass(frozen=True)
class InvariantSeries:
    """Phi(I) = sum_n C_n I^n with Hermitian C_n, n = min_index..max_index.

    A negative ``min_index`` is only meaningful when b = 0, where I = |z|^2
    and the kernel is a Laurent series on a punctured domain or annulus.
    """

    flow: FlowSpec
    coeffs: np.ndarray
    min_index: int = 0

    def __post_init__(self):
        C = _matrix_stack(self.coeffs)
        for c in C:
            check_hermitian(c)
        if self.min_index != 0 and self.flow.b != 0:
            raise ValueError("b != 0 needs a power series in I (min_index 0)")
        if self.flow.b == 0:
            for c in C:
                if mat_min_eigenvalue(c) < -PSD_TOL:
                    raise ValueError("b = 0 needs positive semidefinite series coefficients")
        C = np.array(C)
        C.setflags(write=False)
        object.__setattr__(self, "coeffs", C)
        object.__setattr__(self, "min_index", int(self.min_index))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def N(self) -> int:
        return self.min_index + self.coeffs.shape[0] - 1

    def degrees(self) -> np.ndarray:
        return np.arange(self.min_index, self.N + 1)

    def coeff(self, n: int) -> np.ndarray:
        i = n - self.min_index
        if 0 <= i < self.coeffs.shape[0]:
            return self.coeffs[i]
        return np.zeros((self.dim, self.dim), dtype=complex)

    def as_series(self) -> TruncatedSeries:
        return TruncatedSeries(self.coeffs, self.min_index)

    def truncate(self, N: int) -> "InvariantSeries":
        return InvariantSeries(self.flow, self.coeffs[: N - self.min_index + 1], self.min_index)

    def __call__(self, I) -> np.ndarray:
        """Phi at a (complex) invariant value, with the divergence guard."""
        return _phi_sum(self.coeffs, self.degrees(), complex(I))


@dataclass(frozen=True)
class HamiltonianSeries:
    """Psi(I) = sum_n Q_n I^n with general complex matrix coefficients."""

    coeffs: np.ndarray
    min_index: int = 0

    def __post_init__(self):
        Q = np.array(_matrix_stack(self.coeffs))
        Q.setflags(write=False)
        object.__setattr__(self, "coeffs", Q)

    @property
    def N(self) -> int:
        return self.min_index + self.coeffs.shape[0] - 1

    def coeff(self, n: int) -> np.ndarray:
        i = n - self.min_index
        if 0 <= i < self.coeffs.shape[0]:
            return self.coeffs[i]
        d = self.coeffs.shape[1]
        return np.zeros((d, d), dtype=complex)

    def __call__(self, I) -> np.ndarray:
        n = np.arange(self.min_index, self.N + 1)
        return _phi_sum(self.coeffs, n, complex(I))


def _phi_sum(C: np.ndarray, degrees: np.ndarray, I: complex) -> np.ndarray:
    if I == 0:
        out = np.zeros(C.shape[1:], dtype=complex)
        if 0 in degrees:
            out += C[list(degrees).index(0)]
        if degrees[0] < 0 and np.any(np.abs(C[: -degrees[0]]) > 0):
            raise SingularKernel("Laurent kernel is singular at I = 0")
        return out
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow is reported by the divergence guard
        powers = np.array([I ** int(n) for n in degrees])
        terms = powers[:, None, None] * C
        mags = np.linalg.norm(terms.reshape(len(degrees), -1), axis=1)
    check_divergence(mags)
    return terms.sum(axis=0)


# ---------------------------------------------------------------------------
# evaluation


def series_variable(f: FlowSpec, v, z) -> complex:
    """The invariant the series is expanded in.

    For b = 0 this is conj(v) z on every domain, the coordinate in which the
    Gram table is diagonal; otherwise the flow invariant I(conj v, z).
    """
    if f.b == 0:
        return complex(v).conjugate() * complex(z)
    return invariant_pair(f, v, z)


def series_variable_dz(f: FlowSpec, v, z) -> complex:
    if f.b == 0:
        return complex(v).conjugate()
    return invariant_pair_dz(f, v, z)


def series_nu_coeffs(f: FlowSpec) -> tuple:
    """(alpha, beta, gamma) with w d/dz(series variable) = i(alpha I^2 + beta I + gamma)."""
    if f.b == 0:
        if not f.quantizable:
            invariant(f)  # raises NotQuantizable
        return (0.0, f.a.imag, 0.0)
    return invariant(f).nu_coeffs


def kernel_eval(S: InvariantSeries, v, z) -> np.ndarray:
    """K(conj v, z) = sum_n C_n I(conj v, z)^n."""
    return S(series_variable(S.flow, v, z))


def kernel_dz(S: InvariantSeries, v, z) -> np.ndarray:
    """d/dz K(conj v, z), differentiated term by term on the series."""
    I = series_variable(S.flow, v, z)
    dI = series_variable_dz(S.flow, v, z)
    n = S.degrees()
    dC = S.coeffs * n[:, None, None]
    if I == 0:
        return dC[list(n).index(1)] * dI if 1 in n else np.zeros((S.dim, S.dim), dtype=complex)
    return _phi_sum(dC, n - 1, I) * dI


def _require_domain(f: FlowSpec, pts: Iterable) -> None:
    for p in pts:
        if not f.domain.contains(p):
            raise DomainError(f"{p} is not in the {f.domain.kind.value}")


def gram_matrix(S: InvariantSeries, points: Sequence, vectors: Sequence) -> np.ndarray:
    """G_ij = <v_i, K(conj z_i, z_j) v_j>."""
    if len(points) != len(vectors):
        raise ValueError("need one vector per point")
    _require_domain(S.flow, points)
    vecs = [np.asarray(v, dtype=complex).reshape(S.dim) for v in vectors]
    J = len(points)
    G = np.zeros((J, J), dtype=complex)
    for i in range(J):
        for j in range(i, J):
            G[i, j] = vecs[i].conj() @ kernel_eval(S, points[i], points[j]) @ vecs[j]
            G[j, i] = G[i, j].conjugate()
    return G


def block_gram(S: InvariantSeries, points: Sequence) -> np.ndarray:
    """The (J d) x (J d) block matrix [K(conj z_i, z_j)]_{ij}.

    Its smallest eigenvalue bounds every gram_matrix over these points.
    """
    _require_domain(S.flow, points)
    J, d = len(points), S.dim
    B = np.zeros((J * d, J * d), dtype=complex)
    for i in range(J):
        for j in range(i, J):
            K = kernel_eval(S, points[i], points[j])
            B[i * d:(i + 1) * d, j * d:(j + 1) * d] = K
            B[j * d:(j + 1) * d, i * d:(i + 1) * d] = K.conj().T
    return B


def hermitian_symmetry_defect(S: InvariantSeries, pairs: Iterable[tuple]) -> float:
    """max |K(conj v, z) - K(conj z, v)^H| over the given pairs."""
    worst = 0.0
    for v, z in pairs:
        D = kernel_eval(S, v, z) - kernel_eval(S, z, v).conj().T
        worst = max(worst, float(np.max(np.abs(D))))
    return worst


# ---------------------------------------------------------------------------
# sampling


def safe_radius(f: FlowSpec, fraction: float = 0.5) -> float:
    """A radius r such that |z|, |v| < r keeps both the coherent-state series
    and the invariant series comfortably inside their convergence regions."""
    k = f.domain.kind
    if f.b == 0:
        return 0.9 if k in (Domain.DISC, Domain.PUNCTURED_DISC, Domain.ANNULUS) else 1.0
    rz = convergence_radius(f)
    om, bm = abs(f.omega), abs(f.b)
    # the invariant series sum C_n I^n has radius |b| * rz in I
    i_lim = fraction * bm * min(rz, 1e6)
    if k is Domain.PLANE:
        bound = lambda r: om * r * r + 2 * bm * r
    else:
        bound = lambda r: (2 * om * r * r + 2 * bm * r) / (1 - r * r)
    r = min(fraction * rz, 1.0)
    while bound(r) > i_lim:
        r *= 0.9
    return r


def sample_points(f: FlowSpec, n: int = DEFAULT_SAMPLES, seed: int = 42, radius: float | None = None) -> np.ndarray:
    """n deterministic (scrambled Halton) points of the domain."""
    r = safe_radius(f) if radius is None else radius
    u = qmc.Halton(d=2, scramble=True, seed=seed).random(n)
    inner = f.domain.r if f.domain.kind is Domain.ANNULUS else 0.0
    if f.domain.kind in (Domain.PUNCTURED_PLANE, Domain.PUNCTURED_DISC):
        inner = 0.05 * r
    rad = np.sqrt(inner ** 2 + (r ** 2 - inner ** 2) * u[:, 0])
    return rad * np.exp(2j * np.pi * u[:, 1])


def sample_pairs(f: FlowSpec, n: int = DEFAULT_SAMPLES, seed: int = 42, radius: float | None = None) -> list:
    pts = sample_points(f, 2 * n, seed, radius)
    return list(zip(pts[:n], pts[n:]))


# ---------------------------------------------------------------------------
# quantization conditions


KernelLike = Union[InvariantSeries, Callable]


def flow_invariance_residual(S: KernelLike, t: float, samples: Iterable[tuple], flow: FlowSpec | None = None) -> float:
    """max over (v, z) samples of |K(sigma_t v, sigma_t z) - K(v, z)|.

    ``S`` may be an InvariantSeries or any callable K(v, z) (then ``flow``
    is required); the latter is how non-invariant controls are tested.
    """
    if isinstance(S, InvariantSeries):
        f = S.flow if flow is None else flow
        K = lambda v, z: kernel_eval(S, v, z)
    else:
        if flow is None:
            raise ValueError("a callable kernel needs an explicit flow")
        f, K = flow, S
    worst = 0.0
    for v, z in samples:
        k0 = np.asarray(K(v, z), dtype=complex)
        k1 = np.asarray(K(evolve(f, t, v), evolve(f, t, z)), dtype=complex)
        worst = max(worst, float(np.max(np.abs(k1 - k0))))
    return worst


def _solve_kernel(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(K)) or np.linalg.cond(K) > SINGULAR_COND:
        raise SingularKernel("K(conj z, z) is numerically singular")
    return np.linalg.solve(K, rhs)


def connection_form(S: InvariantSeries, z) -> np.ndarray:
    """theta(z) = K(conj z, z)^{-1} dK(conj z, z)/dz."""
    return _solve_kernel(kernel_eval(S, z, z), kernel_dz(S, z, z))


def normalized_kernel(S: InvariantSeries, v, z) -> np.ndarray:
    """A = K(conj v, v)^{-1/2} K(conj v, z) K(conj z, z)^{-1/2}."""
    Kvv, Kzz = kernel_eval(S, v, v), kernel_eval(S, z, z)
    for D in (Kvv, Kzz):
        w = np.linalg.eigvalsh(0.5 * (D + D.conj().T))
        if w[0] <= PSD_TOL * max(1.0, abs(w[-1])):
            raise SingularKernel("diagonal kernel value is singular")
    return psd_sqrt(Kvv, inverse=True) @ kernel_eval(S, v, z) @ psd_sqrt(Kzz, inverse=True)


def ode_lhs(S: InvariantSeries) -> np.ndarray:
    """Coefficients of nu(I) Phi'(I) for degrees min_index..N-1 (exact there)."""
    al, be, ga = series_nu_coeffs(S.flow)
    n0, N, d = S.min_index, S.N, S.dim
    out = np.zeros((N - n0, d, d), dtype=complex)
    for k in range(n0, N):
        # Phi' has coefficient (j+1) C_{j+1} at degree j
        acc = ga * (k + 1) * S.coeff(k + 1) + be * k * S.coeff(k) + al * (k - 1) * S.coeff(k - 1)
        out[k - n0] = 1j * acc
    return out


def hamiltonian_from_kernel(S: InvariantSeries) -> HamiltonianSeries:
    """Solve Phi Psi = nu Phi' for Psi degree by degree.

    Needs the lowest series coefficient to be invertible; returns Q_0..Q_{N-1-n0}.
    """
    n0 = S.min_index
    L = S.N - n0
    R = ode_lhs(S)
    C_low = S.coeff(n0)
    if L <= 0:
        return HamiltonianSeries(np.zeros((1, S.dim, S.dim), dtype=complex))
    if np.linalg.cond(C_low) > SINGULAR_COND:
        raise SingularKernel("lowest series coefficient is singular; Psi is not determined")
    Q = np.zeros((L, S.dim, S.dim), dtype=complex)
    for k in range(L):
        rhs = R[k].copy()
        for l in range(1, k + 1):
            rhs -= S.coeff(n0 + l) @ Q[k - l]
        Q[k] = np.linalg.solve(C_low, rhs)
    return HamiltonianSeries(Q)


@dataclass(frozen=True)
class HamiltonianResidual:
    pointwise: float
    per_degree: np.ndarray  # norm of (nu Phi' - Phi Psi) at each retained degree

    @property
    def max_degree_residual(self) -> float:
        return float(self.per_degree.max()) if self.per_degree.size else 0.0


def hamiltonian_residual(S: InvariantSeries, Psi: HamiltonianSeries, samples: Iterable = ()) -> HamiltonianResidual:
    """Residuals of K Psi(I) = w dK/dz (pointwise) and nu Phi' = Phi Psi (per degree).

    The per-degree residual covers degrees min_index..N-1, where both sides
    are fully determined by the retained coefficients.  No commutativity of
    Phi and Psi is assumed; the order Phi Psi is kept.
    """
    f = S.flow
    worst = 0.0
    for z in samples:
        K = kernel_eval(S, z, z)
        I = series_variable(f, z, z)
        lhs = K @ Psi(I)
        rhs = f.w(complex(z)) * kernel_dz(S, z, z)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    n0 = S.min_index
    R = ode_lhs(S)
    per = np.zeros(len(R))
    for k in range(n0, S.N):
        acc = R[k - n0].copy()
        for l in range(n0, k + 1):
            acc -= S.coeff(l) @ Psi.coeff(k - l)
        per[k - n0] = np.linalg.norm(acc)
    return HamiltonianResidual(worst, per)


def compatibility_defect(S: InvariantSeries, Psi: HamiltonianSeries) -> np.ndarray:
    """Per-degree norm of sum_l (C_l Q_{k-l} + Q_{k-l}^H C_l), k = n0..n0+deg Psi."""
    n0 = S.min_index
    out = []
    for k in range(n0, n0 + Psi.N + 1):
        acc = np.zeros((S.dim, S.dim), dtype=complex)
        for l in range(n0, k + 1):
            Q = Psi.coeff(k - l)
            acc += S.coeff(l) @ Q + Q.conj().T @ S.coeff(l)
        out.append(np.linalg.norm(acc))
    return np.array(out)


# ---------------------------------------------------------------------------
# gauge trivialization


GAUGE_PAD = 40
GAUGE_PAD_MAX = 640
GAUGE_TAIL = 8


@dataclass(frozen=True)
class GaugeResult:
    g: TruncatedSeries
    phi0: complex
    psi: TruncatedSeries
    residual: float  # relative max residual over the checked degrees
    window: tuple  # (lo, hi) degrees where the residual is fully determined


def _exp_series(h: np.ndarray, n_keep: int) -> np.ndarray:
    """Coefficients 0..n_keep of exp(sum_k h_k u^k), padded until the tail is
    negligible so the retained ones are accurate."""
    pad = GAUGE_PAD
    while True:
        L = n_keep + pad + 1
        hh = np.zeros(L, dtype=complex)
        hh[: min(L, len(h))] = h[:L]
        g = series_exp(TruncatedSeries(hh)).coeffs
        tail = np.abs(g[n_keep + 1:])
        scale = np.max(np.abs(g))
        if tail.size == 0 or tail[-GAUGE_TAIL:].max() <= 1e-18 * scale or pad >= GAUGE_PAD_MAX:
            return np.array(g)
        pad *= 2


def gauge_trivialize(phi: TruncatedSeries, f: FlowSpec, N: int | None = None, M: int | None = None) -> GaugeResult:
    """g = exp(psi/a) with z psi' = phi - phi_0, so that w g' = (phi - phi_0) g.

    Only w = a z is supported.  ``N`` (default 24) is the highest and ``-M``
    (default 24 when phi has negative powers, else 0) the lowest retained
    degree of g.  On the punctured plane g = exp(psi_+/a) exp(psi_-/a) is a
    product of two one-sided series; its retained coefficients are formed
    from padded factors and so are accurate, not truncated sums.
    """
    if phi.is_matrix:
        raise ModeError("gauge trivialization is scalar only")
    if f.b != 0 or f.c != 0:
        raise UnsupportedGaugeCase("gauge trivialization needs w(z) = a z (b = c = 0)")
    a = f.a
    if a == 0:
        raise UnsupportedGaugeCase("a = 0 leaves no flow")
    pmin, pmax = min(phi.min_index, 0), max(phi.max_index, 0)
    N = 24 if N is None else int(N)
    M = (24 if pmin < 0 else 0) if M is None else int(M)
    phi0 = complex(phi[0])

    psi_pos = np.zeros(pmax + 1, dtype=complex)
    for n in range(1, pmax + 1):
        psi_pos[n] = phi[n] / n
    psi_neg = np.zeros(-pmin + 1, dtype=complex)  # index k <-> degree -k
    for k in range(1, -pmin + 1):
        psi_neg[k] = phi[-k] / (-k)

    gp = _exp_series(psi_pos / a, N)
    gm = _exp_series(psi_neg / a, M)
    g = np.zeros(N + M + 1, dtype=complex)
    for deg in range(-M, N + 1):
        # sum_{j - k = deg} gp_j gm_k, j, k >= 0
        k = np.arange(max(0, -deg), min(len(gm), len(gp) - deg))
        g[deg + M] = np.sum(gp[k + deg] * gm[k])
    gs = TruncatedSeries(g, -M)
    psi = TruncatedSeries(np.concatenate([psi_neg[:0:-1], psi_pos]), pmin)

    # residual a k g_k - sum_{j != 0} p_j g_{k-j} on the determined window
    lo, hi = -M + pmax, N + pmin
    worst = 0.0
    scale = max(1.0, float(np.max(np.abs(g)))) * (abs(a) * max(N, M, 1) + sum(abs(phi[j]) for j in phi.indices()))
    for k in range(lo, hi + 1):
        r = a * k * gs[k] - sum(phi[j] * gs[k - j] for j in range(pmin, pmax + 1) if j != 0)
        worst = max(worst, abs(r))
    return GaugeResult(gs, phi0, psi, worst / scale, (lo, hi))
