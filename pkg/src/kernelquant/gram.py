"""Gram blocks Gamma_m^* Gamma_n of the Laurent coefficients of a coherent
state map, expressed through the invariant-series coefficients C_l.

For b != 0 the blocks are banded combinations sum_l beta^l_{mn} C_l of the
series coefficients; for b = 0 the table is diagonal, Gamma_m^* Gamma_n =
C_m delta_{mn}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import mpmath
from scipy.special import comb

from .flows import Domain, FlowSpec, invariant_pair
from .numcore import KernelQuantError, as_matrix, check_hermitian, mat_min_eigenvalue, PSD_TOL


# working precision for the banded sums sum_l beta^l_{mn} C_l, whose terms
# cancel by many orders of magnitude at moderate m, n
GRAM_DPS = 40
# private fixed-precision context; the global mpmath precision is shared by threads
_MP = mpmath.MPContext()
_MP.dps = GRAM_DPS


class NotPositive(KernelQuantError, ValueError):
    pass


def _binom(n: int, k: int) -> float:
    if n < 0 or k < 0 or k > n:
        return 0.0
    return float(comb(n, k, exact=True))


def beta_band(f: FlowSpec, m: int, n: int) -> range:
    """Values of l that can carry a non-zero beta^l_{mn} (for m <= n)."""
    lo = n if f.domain.kind is Domain.PLANE else max(n - m, 0)
    return range(lo, n + m + 1)


def _beta_upper(f: FlowSpec, m: int, n: int, l: int, b, bb, om):
    """beta^l_{mn} for m <= n in whatever arithmetic b, bb, om carry."""
    if f.domain.kind is Domain.PLANE:
        if l < n or l > n + m:
            return 0 * b
        return (
            (1j * bb) ** (n - m)
            * _binom(m, l - n)
            * _binom(l, m)
            * om ** (m + n - l)
            * (b * bb) ** (l - n)
        )
    if f.domain.kind is not Domain.DISC:
        raise ValueError(f"no beta formula on the {f.domain.kind.value}")
    if l < n - m or l > n + m:
        return 0 * b
    if l == 0:
        # constant term of the kernel
        return 0 * b + (1 if m == n == 0 else 0)
    total = 0 * b
    for j in range(m + 1):
        p = n + m - l - 2 * j
        q = j + l - m
        r = j + l - n
        if p < 0 or q < 0 or r < 0:
            continue
        total += (
            _binom(l - 1 + j, l - 1)
            * _binom(l, 2 * l + 2 * j - n - m)
            * _binom(2 * l + 2 * j - n - m, r)
            * (2 * om) ** p
            * b ** r
            * bb ** q
        )
    return 1j ** (n - m) * total


def _check_beta_args(f: FlowSpec) -> None:
    if f.b == 0:
        raise ValueError("beta coefficients need b != 0; use the diagonal table")
    if f.domain.kind not in (Domain.PLANE, Domain.DISC):
        raise ValueError(f"no beta formula on the {f.domain.kind.value}")


def beta_coeff(f: FlowSpec, m: int, n: int, l: int) -> complex:
    """Linearisation coefficient beta^l_{mn}; zero outside its band.

    For m > n this is conj(beta^l_{nm}).
    """
    _check_beta_args(f)
    if m > n:
        return beta_coeff(f, n, m, l).conjugate()
    return complex(_beta_upper(f, m, n, l, f.b, f.b.conjugate(), f.omega))


@dataclass(frozen=True)
class GramTable:
    """blocks[m, n] = Gamma_m^* Gamma_n for m, n in min_index..min_index+N."""

    flow: FlowSpec
    blocks: np.ndarray  # shape (N+1, N+1, d, d)
    min_index: int = 0

    @property
    def N(self) -> int:
        return self.blocks.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.blocks.shape[2]

    def block(self, m: int, n: int) -> np.ndarray:
        i, j = m - self.min_index, n - self.min_index
        if 0 <= i <= self.N and 0 <= j <= self.N:
            return self.blocks[i, j]
        return np.zeros((self.dim, self.dim), dtype=complex)

    def symmetry_defect(self) -> float:
        B = self.blocks
        return float(np.max(np.abs(B - np.conj(np.transpose(B, (1, 0, 3, 2))))))

    def psd_min_eig(self) -> float:
        return min(mat_min_eigenvalue(self.blocks[i, i]) for i in range(self.N + 1))

    def with_block(self, m: int, n: int, value) -> "GramTable":
        """Copy with one block replaced (used for perturbation studies)."""
        B = np.array(self.blocks)
        B[m - self.min_index, n - self.min_index] = as_matrix(value)
        return GramTable(self.flow, B, self.min_index)


def _stack(C: Sequence) -> np.ndarray:
    mats = [as_matrix(c) for c in C]
    if not mats:
        raise ValueError("need at least one series coefficient")
    return np.array(mats)


def gram_from_series(C: Sequence, f: FlowSpec, N: int | None = None, min_index: int = 0) -> GramTable:
    """Gram table Gamma_m^* Gamma_n for 0 <= m, n <= N from C_0, C_1, ...

    Coefficients beyond the supplied list are taken as zero; the resulting
    polynomial kernel is still flow invariant, so the table is exact.  The
    banded sums are accumulated in GRAM_DPS digits, so each block is the
    correctly rounded value for the given C_l.
    ``min_index`` (b = 0 only) shifts the index set to a Laurent range.
    """
    Cs = _stack(C)
    for c in Cs:
        check_hermitian(c)
    d = Cs.shape[1]
    if N is None:
        N = Cs.shape[0] - 1
    blocks = np.zeros((N + 1, N + 1, d, d), dtype=complex)

    if f.b == 0:
        for c in Cs:
            if mat_min_eigenvalue(c) < -PSD_TOL:
                raise NotPositive("b = 0 needs positive semidefinite series coefficients")
        for i in range(min(N + 1, Cs.shape[0])):
            blocks[i, i] = Cs[i]
        return GramTable(f, blocks, min_index)

    if min_index != 0:
        raise ValueError("b != 0 forces the index set 0, 1, 2, ...")
    _check_beta_args(f)
    L = Cs.shape[0]
    ctx = _MP
    to_mp = np.vectorize(ctx.mpc, otypes=[object])
    to_c = np.vectorize(complex, otypes=[complex])
    b = ctx.mpc(f.b)
    bb, om = ctx.conj(b), ctx.mpf(f.omega)
    Cmp = [to_mp(c) for c in Cs]
    for m in range(N + 1):
        for n in range(m, N + 1):
            acc = np.full((d, d), ctx.mpc(0), dtype=object)
            for l in beta_band(f, m, n):
                if l < L:
                    acc = acc + _beta_upper(f, m, n, l, b, bb, om) * Cmp[l]
            if m == n:
                acc = (acc + acc.T.conj()) / 2
            blocks[m, n] = to_c(acc)
            if m != n:
                blocks[n, m] = blocks[m, n].conj().T
    return GramTable(f, blocks, 0)


def difference_residual(g: GramTable) -> np.ndarray:
    """Residual of the two-variable difference equation at every (m, n).

    Returns an array of shape (N, N, d, d) for m, n in the first N indices;
    terms that would need index N+1 are never touched because the last
    row/column is excluded.
    """
    f = g.flow
    a, b, c = f.a, f.b, f.c
    ab, bb, cb = a.conjugate(), b.conjugate(), c.conjugate()
    lo = g.min_index
    size = g.N  # rows/cols 0..N-1
    res = np.zeros((size, size, g.dim, g.dim), dtype=complex)
    for i in range(size):
        m = lo + i
        for j in range(size):
            n = lo + j
            res[i, j] = (
                cb * (m - 1) * g.block(m - 1, n)
                + c * (n - 1) * g.block(m, n - 1)
                + (a * n + ab * m) * g.block(m, n)
                + b * (n + 1) * g.block(m, n + 1)
                + bb * (m + 1) * g.block(m + 1, n)
            )
    return res


def verify_difference_eq(g: GramTable) -> np.ndarray:
    """Per-(m, n) residual norms of the difference equation, shape (N, N)."""
    R = difference_residual(g)
    return np.linalg.norm(R, axis=(2, 3))


@dataclass(frozen=True)
class Summability:
    partial_sums: np.ndarray
    roots: np.ndarray  # ||Gamma_m^* Gamma_n||^(1/n) for n >= 1 (nan at n = 0)


def gram_summability(g: GramTable, m: int) -> Summability:
    """Partial sums of sum_n ||Gamma_m^* Gamma_n||^2 along row ``m`` and the
    n-th root sequence used by the root test."""
    norms = np.array([np.linalg.norm(g.block(m, g.min_index + j), 2) for j in range(g.N + 1)])
    idx = g.min_index + np.arange(g.N + 1)
    roots = np.full(norms.shape, np.nan)
    pos = idx >= 1
    roots[pos] = norms[pos] ** (1.0 / idx[pos])
    return Summability(np.cumsum(norms ** 2), roots)


def gram_magnitude(C: Sequence, f: FlowSpec, N: int) -> np.ndarray:
    """M[m, n] = sum_l |beta^l_{mn}| ||C_l||, the size of the terms summed
    into block (m, n); rounding error in that block is of order eps * M."""
    norms = [float(np.linalg.norm(as_matrix(c))) for c in C]
    M = np.zeros((N + 1, N + 1))
    if f.b == 0:
        for i in range(min(N + 1, len(norms))):
            M[i, i] = norms[i]
        return M
    for m in range(N + 1):
        for n in range(m, N + 1):
            M[m, n] = M[n, m] = sum(abs(beta_coeff(f, m, n, l)) * norms[l] for l in beta_band(f, m, n) if l < len(norms))
    return M


def difference_scale(g: GramTable, magnitude: np.ndarray | None = None) -> np.ndarray:
    """Per-(m, n) sum of the magnitudes of the five terms of the difference
    equation; dividing the residual by it gives a backward-style relative error.

    ``magnitude`` (from gram_magnitude) replaces block norms that are much
    smaller than the terms they were summed from.
    """
    f = g.flow
    a, b, c = f.a, f.b, f.c
    lo, size = g.min_index, g.N

    def nb(m, n):
        v = float(np.linalg.norm(g.block(m, n)))
        i, j = m - lo, n - lo
        if magnitude is not None and 0 <= i <= g.N and 0 <= j <= g.N:
            v = max(v, float(magnitude[i, j]))
        return v

    out = np.zeros((size, size))
    for i in range(size):
        m = lo + i
        for j in range(size):
            n = lo + j
            out[i, j] = (
                abs(c) * abs(m - 1) * nb(m - 1, n)
                + abs(c) * abs(n - 1) * nb(m, n - 1)
                + abs(a * n + a.conjugate() * m) * nb(m, n)
                + abs(b) * abs(n + 1) * nb(m, n + 1)
                + abs(b) * abs(m + 1) * nb(m + 1, n)
            )
    return out


def beta_probe(f: FlowSpec, M: int, L: int, P: int = 64, r: float = 0.5) -> np.ndarray:
    """Brute-force beta^l_{mn} = [conj(v)^m z^n] I(conj v, z)^l for m, n <= M,
    l <= L, read off a 2D FFT of I^l sampled on the torus |conj v| = |z| = r.

    Independent of beta_coeff: it only evaluates the invariant pointwise.
    Aliasing from degrees >= P is negligible once r^P is.
    """
    th = r * np.exp(2j * np.pi * np.arange(P) / P)
    base = np.array([[invariant_pair(f, u.conjugate(), z) for z in th] for u in th])
    scale = r ** -(np.arange(M + 1)[:, None] + np.arange(M + 1)[None, :])
    out = np.zeros((M + 1, M + 1, L + 1), dtype=complex)
    F = np.ones_like(base)
    for l in range(L + 1):
        c = np.fft.fft2(F) / P ** 2
        out[:, :, l] = c[: M + 1, : M + 1] * scale
        F = F * base
    return out
