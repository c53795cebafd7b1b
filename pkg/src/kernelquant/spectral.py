"""Spectral side: moments of a matrix measure, invariant-series coefficients
from a measure, the tridiagonal generator on Laurent-coefficient space, the
L^2(mu) model, orthonormal polynomials and the Jacobi matrix, and the
integral (Bochner-type) reconstruction of the kernel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .flows import FlowSpec
from .kernelspace import InvariantSeries, kernel_eval
from .numcore import EmptyMeasure, KernelQuantError, MatrixMeasure, hermitian_defect
from .polyfam import build_recurrence, kernel_lambda, kernel_lambda_product, recurrence_values

HERM_WARN = 1e-8


class DegreeExceedsSupport(KernelQuantError, ValueError):
    pass


def _require_atoms(mu: MatrixMeasure) -> None:
    if len(mu) == 0:
        raise EmptyMeasure("measure has no atoms")


def moments(mu: MatrixMeasure, n: int) -> np.ndarray:
    """mu_n = sum_k lambda_k^n W_k."""
    _require_atoms(mu)
    if n < 0:
        raise ValueError("moment order must be non-negative")
    return np.tensordot(mu.lambdas ** n, mu.weights, axes=1)


# ---------------------------------------------------------------------------
# series coefficients and reconstruction


def series_coefficients(mu: MatrixMeasure, f: FlowSpec, N: int) -> np.ndarray:
    """Raw C_n = sum_k (i conj b)^{-n} K_n(i lambda_k) W_k, n = 0..N, unsymmetrised."""
    _require_atoms(mu)
    K = recurrence_values(f, N, mu.lambdas)  # (N+1, atoms)
    scale = (1j * f.b.conjugate()) ** -np.arange(N + 1, dtype=float)
    R = K * scale[:, None]
    return np.tensordot(R, mu.weights, axes=1)


def series_hermitian_defects(mu: MatrixMeasure, f: FlowSpec, N: int) -> np.ndarray:
    return np.array([hermitian_defect(C) for C in series_coefficients(mu, f, N)])


def series_from_measure(mu: MatrixMeasure, f: FlowSpec, N: int) -> InvariantSeries:
    """InvariantSeries with C_n = integral of (i conj b)^{-n} K_n(i lambda) dmu.

    Each C_n is checked for Hermiticity; a defect above HERM_WARN is
    reported with a warning, and the Hermitian part is kept.
    """
    C = series_coefficients(mu, f, N)
    worst = max(hermitian_defect(c) for c in C)
    if worst > HERM_WARN:
        warnings.warn(f"series coefficients from the measure are not Hermitian (defect {worst:.2e})", RuntimeWarning)
    C = 0.5 * (C + np.conj(np.transpose(C, (0, 2, 1))))
    return InvariantSeries(f, C)


@dataclass(frozen=True)
class Reconstruction:
    value: np.ndarray
    series_value: np.ndarray
    residual: float  # relative, ||value - series_value|| / max(1, ||value||)


def bochner_reconstruct(mu: MatrixMeasure, f: FlowSpec, v, z, N: int, path: str = "product") -> Reconstruction:
    """sum_k K(conj v, z; lambda_k) W_k, compared with kernel_eval of the
    series built from the same measure.

    ``path="product"`` evaluates each lambda-kernel as
    conj(coherent(v)) * coherent(z), which shares nothing with the series
    path; ``path="invariant"`` composes the coherent series with I instead.
    """
    _require_atoms(mu)
    fn = {"product": kernel_lambda_product, "invariant": kernel_lambda}[path]
    vals = np.array([fn(f, v, z, lam, N) for lam in mu.lambdas])
    value = np.tensordot(vals, mu.weights, axes=1)
    sv = kernel_eval(series_from_measure(mu, f, N), v, z)
    res = float(np.linalg.norm(value - sv)) / max(1.0, float(np.linalg.norm(value)))
    return Reconstruction(value, sv, res)


# ---------------------------------------------------------------------------
# generator on coefficient space


def fhat_tridiagonal(f: FlowSpec, N: int) -> np.ndarray:
    """Matrix T of i*F on span(Gamma_0..Gamma_N): column n holds
    i F Gamma_n = c(n-1) Gamma_{n-1} + a n Gamma_n + b(n+1) Gamma_{n+1}.

    The Gamma_{N+1} term of the last column is dropped.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    T = np.zeros((N + 1, N + 1), dtype=complex)
    for n in range(N + 1):
        T[n, n] = f.a * n
        if n >= 1:
            T[n - 1, n] = f.c * (n - 1)
        if n + 1 <= N:
            T[n + 1, n] = f.b * (n + 1)
    return T


def fhat_spectrum(f: FlowSpec, N: int) -> np.ndarray:
    """Eigenvalues of F = -i T, sorted by real part."""
    ev = np.linalg.eigvals(-1j * fhat_tridiagonal(f, N))
    return ev[np.argsort(ev.real, kind="stable")]


# ---------------------------------------------------------------------------
# L^2(mu) model


@dataclass(frozen=True)
class L2Model:
    """Functions on the atoms of ``mu``; F acts as multiplication by lambda.

    A vector is an array of shape (atoms, d, d) (or (atoms,) for functions
    times the identity); <g, h> = sum_k g_k^H W_k h_k.
    """

    measure: MatrixMeasure
    flow: FlowSpec
    N: int

    def __post_init__(self):
        _require_atoms(self.measure)

    @property
    def family(self):
        return build_recurrence(self.flow, self.N)

    def gammas(self) -> np.ndarray:
        """Gamma_n as the functions lambda -> K_n(i lambda); shape (N+1, atoms)."""
        return recurrence_values(self.flow, self.N, self.measure.lambdas)

    def gammas_from_generator(self) -> np.ndarray:
        """K_n(iF) Gamma_0, with K_n applied to the multiplication operator."""
        fam = self.family
        X = np.diag(1j * self.measure.lambdas)
        one = np.ones(len(self.measure), dtype=complex)
        return np.array([fam.poly_at(n, X) @ one for n in range(self.N + 1)])

    def inner(self, g, h) -> np.ndarray:
        g, h = np.asarray(g, dtype=complex), np.asarray(h, dtype=complex)
        W = self.measure.weights
        if g.ndim == 1:
            g = g[:, None, None] * np.eye(W.shape[1])
        if h.ndim == 1:
            h = h[:, None, None] * np.eye(W.shape[1])
        return np.einsum("kji,kjl,klm->im", g.conj(), W, h)

    def gram(self) -> np.ndarray:
        """blocks[m, n] = <Gamma_m, Gamma_n>, shape (N+1, N+1, d, d)."""
        G = self.gammas()
        return np.einsum("mk,nk,kij->mnij", G.conj(), G, self.measure.weights)

    def gamma_rank(self, tol: float = 1e-10) -> int:
        """Rank of span(Gamma_0..Gamma_N) in L^2(mu).

        The Gram matrix is equilibrated by its diagonal first; the Gamma_n
        differ in size by many orders of magnitude in the disc cases.
        """
        G = self.gram()
        n, d = G.shape[0], G.shape[2]
        M = G.transpose(0, 2, 1, 3).reshape(n * d, n * d)
        M = 0.5 * (M + M.conj().T)
        diag = np.sqrt(np.maximum(np.diag(M).real, 0.0))
        keep = diag > 0
        Ms = M[np.ix_(keep, keep)] / np.outer(diag[keep], diag[keep])
        w = np.linalg.eigvalsh(Ms)
        return int(np.sum(w > tol * max(1.0, w[-1])))

    def fhat_residual(self) -> float:
        """max |i lambda Gamma_n - sum_m T[m, n] Gamma_m| over n <= N-1."""
        G = self.gammas()
        T = fhat_tridiagonal(self.flow, self.N)
        lhs = (1j * self.measure.lambdas)[None, :] * G[: self.N]
        rhs = (T[:, : self.N].T @ G)
        return float(np.max(np.abs(lhs - rhs))) if self.N > 0 else 0.0


# ---------------------------------------------------------------------------
# orthonormal polynomials and the Jacobi matrix (scalar measures)


@dataclass(frozen=True)
class OrthoPolys:
    coeffs: np.ndarray  # coeffs[n, j]: coefficient of lambda^j in P_n
    values: np.ndarray  # values[n, k] = P_n(lambda_k)

    def __call__(self, n: int, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs[n, : n + 1])


def _scalar_weights(mu: MatrixMeasure) -> np.ndarray:
    _require_atoms(mu)
    if mu.dim != 1:
        raise ValueError("orthonormal polynomials are only built for scalar measures")
    return mu.weights[:, 0, 0].real


def support_size(mu: MatrixMeasure) -> int:
    return int(np.sum(_scalar_weights(mu) > 0))


def orthonormal_polys(mu: MatrixMeasure, N: int) -> OrthoPolys:
    """P_0..P_N orthonormal in L^2(mu), positive leading coefficients.

    Stieltjes/Arnoldi process on atom evaluations: P_{n+1} comes from
    lambda P_n orthogonalised (twice) against all earlier P_m, with the
    monomial coefficients carried along.
    """
    w = _scalar_weights(mu)
    if N + 1 > support_size(mu):
        raise DegreeExceedsSupport(f"degree {N} needs at least {N + 1} atoms, measure has {support_size(mu)}")
    lam = mu.lambdas
    K = len(lam)
    V = np.zeros((N + 1, K))
    C = np.zeros((N + 1, N + 1))
    norm0 = np.sqrt(w.sum())
    V[0] = 1.0 / norm0
    C[0, 0] = 1.0 / norm0
    for n in range(N):
        v = lam * V[n]
        c = np.zeros(N + 1)
        c[1:] = C[n, :-1]
        for _ in range(2):
            for m in range(n + 1):
                h = np.sum(w * V[m] * v)
                v = v - h * V[m]
                c = c - h * C[m]
        nrm = np.sqrt(np.sum(w * v * v))
        V[n + 1] = v / nrm
        C[n + 1] = c / nrm
    return OrthoPolys(C, V)


@dataclass(frozen=True)
class JacobiMatrix:
    diag: np.ndarray  # a_0..a_{N-1}
    offdiag: np.ndarray  # b_0..b_{N-2} > 0
    mass: float  # mu_0

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def eigenvalues(self) -> np.ndarray:
        from scipy.linalg import eigh_tridiagonal

        return eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=True)

    def polys(self) -> np.ndarray:
        """Monomial coefficients of P_0..P_{N-1} rebuilt from the three-term
        recurrence b_n P_{n+1} = (lambda - a_n) P_n - b_{n-1} P_{n-1}."""
        N = len(self.diag)
        P = np.zeros((N, N))
        P[0, 0] = 1.0 / np.sqrt(self.mass)
        for n in range(N - 1):
            nxt = np.zeros(N)
            nxt[1:] += P[n, :-1]
            nxt -= self.diag[n] * P[n]
            if n >= 1:
                nxt -= self.offdiag[n - 1] * P[n - 1]
            P[n + 1] = nxt / self.offdiag[n]
        return P


def jacobi_matrix(mu: MatrixMeasure, N: int) -> JacobiMatrix:
    """N x N Jacobi matrix: a_n = <lambda P_n, P_n>, b_n = <lambda P_n, P_{n+1}>."""
    if N < 1:
        raise ValueError("N must be at least 1")
    w = _scalar_weights(mu)
    if N > support_size(mu):
        raise DegreeExceedsSupport(f"a {N}x{N} Jacobi matrix needs {N} atoms, measure has {support_size(mu)}")
    P = orthonormal_polys(mu, N - 1).values
    lam = mu.lambdas
    a = np.array([np.sum(w * lam * P[n] ** 2) for n in range(N)])
    b = np.array([np.sum(w * lam * P[n] * P[n + 1]) for n in range(N - 1)])
    return JacobiMatrix(a, b, float(w.sum()))


def hankel_orthonormal(mu: MatrixMeasure, N: int) -> np.ndarray:
    """P_0..P_N from the Cholesky factor of the Hankel moment matrix.

    Independent (and less stable) route used as a small-N oracle.
    """
    H = np.array([[moments(mu, i + j)[0, 0].real for j in range(N + 1)] for i in range(N + 1)])
    L = np.linalg.cholesky(H)
    return np.linalg.inv(L)
