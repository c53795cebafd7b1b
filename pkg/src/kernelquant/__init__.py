"""Numerical positive-kernel (coherent-state) quantization of holomorphic
flows on the plane, the disc and their punctured and annular relatives."""

from .numcore import (
    DivergenceError,
    EmptyMeasure,
    InvalidMatrix,
    KernelQuantError,
    MatrixMeasure,
    ModeError,
    TruncatedSeries,
    mat_min_eigenvalue,
    measure_integrate,
    series_multiply,
)
from .flows import (
    Domain,
    DomainError,
    FlowClass,
    FlowKind,
    FlowSpec,
    InvalidFlow,
    NotQuantizable,
    RiemannDomain,
    classify,
    evolve,
    invariant,
    invariant_value,
)
from .polyfam import (
    PolyFamily,
    build_recurrence,
    closed_form,
    coherent_lambda,
    kernel_lambda,
)
from .gram import GramTable, beta_coeff, gram_from_series, gram_summability, verify_difference_eq
from .kernelspace import (
    HamiltonianSeries,
    InvariantSeries,
    connection_form,
    flow_invariance_residual,
    gauge_trivialize,
    gram_matrix,
    hamiltonian_residual,
    kernel_eval,
    normalized_kernel,
)
from .spectral import (
    JacobiMatrix,
    L2Model,
    bochner_reconstruct,
    fhat_tridiagonal,
    jacobi_matrix,
    moments,
    orthonormal_polys,
    series_from_measure,
)

__version__ = "0.1.0"
