"""Shared value types: Hermitian matrices, truncated Laurent series and
finitely-atomic PSD-matrix measures, plus their JSON encodings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-10


class KernelQuantError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(KernelQuantError, ValueError):
    pass


class ModeError(KernelQuantError, TypeError):
    pass


class EmptyMeasure(KernelQuantError, ValueError):
    pass


class DivergenceError(KernelQuantError, ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# matrices


def as_matrix(M) -> np.ndarray:
    """Coerce a scalar or square array-like to a complex square ndarray."""
    A = np.asarray(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("matrix has non-finite entries")
    return A


def hermitian_defect(M) -> float:
    """Return ||M - M^H|| / max(1, ||M||) (Frobenius)."""
    A = np.asarray(M, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(A)))
    return float(np.linalg.norm(A - A.conj().T)) / scale


def is_hermitian(M, tol: float = HERM_TOL) -> bool:
    return hermitian_defect(M) <= tol


def check_hermitian(M, tol: float = HERM_TOL) -> np.ndarray:
    A = as_matrix(M)
    if hermitian_defect(A) > tol:
        raise InvalidMatrix(f"matrix is not Hermitian (defect {hermitian_defect(A):.3e})")
    return A


def mat_min_eigenvalue(M) -> float:
    """Smallest eigenvalue of the symmetrised matrix (M + M^H)/2.

    Raises InvalidMatrix for non-finite entries or a matrix that is not
    Hermitian within HERM_TOL (relative to its norm).
    """
    A = check_hermitian(M)
    return float(np.linalg.eigvalsh(0.5 * (A + A.conj().T))[0])


def is_psd(M, tol: float = PSD_TOL) -> bool:
    return mat_min_eigenvalue(M) >= -tol


def psd_sqrt(M, inverse: bool = False, floor: float = PSD_TOL) -> np.ndarray:
    """Hermitian square root (or inverse square root) of a PSD matrix.

    Eigenvalues below ``floor`` are clamped to ``floor``; for the inverse
    root that caps the amplification at ``floor**-0.5``.
    """
    A = check_hermitian(M)
    w, U = np.linalg.eigh(0.5 * (A + A.conj().T))
    w = np.maximum(w, floor)
    d = w ** (-0.5 if inverse else 0.5)
    return (U * d) @ U.conj().T


# ---------------------------------------------------------------------------
# truncated Laurent series


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients of sum_{n=min_index}^{max_index} c_n z^n.

    ``coeffs`` has shape (L,) in scalar mode and (L, d, d) in matrix mode.
    """

    coeffs: np.ndarray
    min_index: int = 0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim not in (1, 3) or (c.ndim == 3 and c.shape[1] != c.shape[2]):
            raise ModeError(f"coefficients must have shape (L,) or (L,d,d), got {c.shape}")
        if c.shape[0] == 0:
            raise ValueError("a series needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise InvalidMatrix("series has non-finite coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "min_index", int(self.min_index))

    @property
    def max_index(self) -> int:
        return self.min_index + self.coeffs.shape[0] - 1

    @property
    def is_matrix(self) -> bool:
        return self.coeffs.ndim == 3

    def __getitem__(self, n: int):
        if n < self.min_index or n > self.max_index:
            if self.is_matrix:
                d = self.coeffs.shape[1]
                return np.zeros((d, d), dtype=complex)
            return 0j
        return self.coeffs[n - self.min_index]

    def indices(self) -> range:
        return range(self.min_index, self.max_index + 1)

    def truncate(self, max_index: int) -> "TruncatedSeries":
        if max_index < self.min_index:
            raise ValueError("truncation below the lowest retained power")
        return TruncatedSeries(self.coeffs[: max_index - self.min_index + 1], self.min_index)

    def derivative(self) -> "TruncatedSeries":
        """Term-by-term d/dz; exact at every retained degree."""
        n = np.arange(self.min_index, self.max_index + 1)
        shape = (-1,) + (1,) * (self.coeffs.ndim - 1)
        dc = self.coeffs * n.reshape(shape)
        if self.min_index == 0:
            if len(n) == 1:
                return TruncatedSeries(np.zeros_like(self.coeffs), 0)
            return TruncatedSeries(dc[1:], 0)
        return TruncatedSeries(dc, self.min_index - 1)

    def __call__(self, z):
        z = complex(z)
        powers = np.array([z ** n for n in self.indices()])
        if self.is_matrix:
            return np.tensordot(powers, self.coeffs, axes=1)
        return complex(powers @ self.coeffs)


def series_multiply(A: TruncatedSeries, B: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at min(N_A, N_B).

    With negative lowest powers the cap drops to
    min(N_A + min_B, N_B + min_A), the last degree not reached by unretained
    terms.  In matrix mode the left factor stays on the left:
    c_n = sum_k A_k B_{n-k}.
    """
    if A.is_matrix != B.is_matrix:
        raise ModeError("cannot multiply a scalar series by a matrix series")
    if A.is_matrix and A.coeffs.shape[1] != B.coeffs.shape[1]:
        raise ModeError("matrix dimensions differ")
    lo = A.min_index + B.min_index
    hi = min(A.max_index + min(B.min_index, 0), B.max_index + min(A.min_index, 0))
    if hi < lo:
        raise ValueError("aligned truncation leaves no retained degree")
    shape = (hi - lo + 1,) + A.coeffs.shape[1:]
    out = np.zeros(shape, dtype=complex)
    for i, a in zip(A.indices(), A.coeffs):
        for j, b in zip(B.indices(), B.coeffs):
            n = i + j
            if n > hi:
                break
            out[n - lo] += a @ b if A.is_matrix else a * b
    return TruncatedSeries(out, lo)


def series_exp(h: TruncatedSeries) -> TruncatedSeries:
    """exp of a scalar power series (min_index 0), exact at retained degrees.

    Uses n g_n = sum_{k=1}^n k h_k g_{n-k}, which follows from g' = h' g.
    """
    if h.is_matrix:
        raise ModeError("series_exp is scalar only")
    if h.min_index != 0:
        raise ValueError("series_exp needs a power series (min_index 0)")
    c = h.coeffs
    g = np.zeros_like(c)
    g[0] = np.exp(c[0])
    for n in range(1, len(c)):
        k = np.arange(1, n + 1)
        g[n] = np.sum(k * c[k] * g[n - k]) / n
    return TruncatedSeries(g, 0)


# ---------------------------------------------------------------------------
# discrete matrix measures


@dataclass(frozen=True)
class MatrixMeasure:
    """sum_k W_k delta_{lambda_k} with PSD weights W_k.

    Atoms are sorted on construction; repeated locations are rejected.
    """

    lambdas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).reshape(-1)
        W = np.asarray(self.weights, dtype=complex)
        if W.ndim == 1:
            W = W.reshape(-1, 1, 1)
        if W.ndim != 3 or W.shape[0] != lam.shape[0] or W.shape[1] != W.shape[2]:
            raise InvalidMatrix("weights must have shape (K, d, d) matching the atoms")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(W))):
            raise InvalidMatrix("measure has non-finite entries")
        order = np.argsort(lam, kind="stable")
        lam, W = lam[order], W[order]
        if np.any(np.diff(lam) <= 0):
            raise ValueError("atom locations must be distinct")
        for Wk in W:
            if mat_min_eigenvalue(Wk) < -PSD_TOL:
                raise InvalidMatrix("atom weight is not positive semidefinite")
        lam.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "weights", W)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "MatrixMeasure":
        if len(atoms) == 0:
            return cls(np.zeros(0), np.zeros((0, 1, 1)))
        lam = [float(a[0]) for a in atoms]
        W = [as_matrix(a[1]) for a in atoms]
        return cls(np.array(lam), np.array(W))

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def __len__(self) -> int:
        return self.lambdas.shape[0]

    def atoms(self):
        return list(zip(self.lambdas.tolist(), self.weights))


def measure_integrate(mu: MatrixMeasure, f: Callable[[float], complex]) -> np.ndarray:
    """sum_k f(lambda_k) W_k; not Hermitian in general when f is complex."""
    if len(mu) == 0:
        raise EmptyMeasure("cannot integrate against an empty measure")
    vals = np.array([complex(f(float(x))) for x in mu.lambdas])
    return np.tensordot(vals, mu.weights, axes=1)


# ---------------------------------------------------------------------------
# JSON encodings: complex as [re, im], matrices row-major


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(x) -> complex:
    if x is None:
        return 0j
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    raise ValueError(f"cannot read a complex number from {x!r}")


def matrix_to_json(M) -> list:
    A = np.asarray(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    return [[complex_to_json(v) for v in row] for row in A]


def matrix_from_json(x) -> np.ndarray:
    # a bare scalar stands for a 1x1 matrix
    if isinstance(x, (int, float)) or (
        isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x)
    ):
        return np.array([[complex_from_json(x)]])
    A = np.array([[complex_from_json(v) for v in row] for row in x], dtype=complex)
    return as_matrix(A)


def measure_to_json(mu: MatrixMeasure) -> dict:
    return {"atoms": [{"lambda": lam, "W": matrix_to_json(W)} for lam, W in mu.atoms()]}


def measure_from_json(obj: dict) -> MatrixMeasure:
    atoms = [(float(a["lambda"]), matrix_from_json(a["W"])) for a in obj["atoms"]]
    return MatrixMeasure.from_atoms(atoms)
