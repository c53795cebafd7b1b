import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import FAMILY_FLOWS
from kernelquant.flows import Domain, FlowSpec, evolve
from kernelquant.gram import beta_coeff, beta_band
from kernelquant.numcore import DivergenceError
from kernelquant.polyfam import (
    CaseError,
    ClosedFormUnavailable,
    DegenerateRecurrence,
    build_recurrence,
    closed_form,
    coherent_lambda,
    convergence_radius,
    equivariance_residual,
    family_constant,
    family_name,
    generating_function,
    kernel_lambda,
    kernel_lambda_product,
    kernel_lambda_residual,
    laguerre_minus1,
    meixner_pollaczek0,
    recurrence_values,
)

# K_n(i lam) from the recurrence in 50-digit arithmetic, frozen
MP_ORACLE = [
    (FlowSpec.disc(0.6, 0.8 - 0.3j), 0.7, 5, 0.13604258795369056 + 0.030858747063702237j),
    (FlowSpec.disc(0.6, 0.8 - 0.3j), 0.7, 12, -0.027692222229159097 - 0.06421589433134724j),
    (FlowSpec.disc(1.3, 0.5j), -1.3, 10, 2000272.6687178398),
    (FlowSpec.plane(0.7j, 0.4 + 1j), 2.2, 9, 5.130070678094242e-06 + 1.4916550626808685e-06j),
    (FlowSpec.disc(-0.5, 0.5), 0.9, 8, 55.45202688514286),
]


def test_exponential_k2():
    fam = build_recurrence(FlowSpec.plane(0j, 1.0), 4)
    np.testing.assert_allclose(fam.coeffs[2], [0, 0, 0.5, 0, 0], atol=1e-16)
    assert fam.coeffs[0, 0] == 1.0


def test_k0_is_one(family_flow):
    fam = build_recurrence(family_flow, 6)
    assert fam.coeffs[0, 0] == 1.0
    assert np.all(fam.coeffs[0, 1:] == 0)
    np.testing.assert_allclose(fam.values(np.array([-1.0, 0.0, 2.0]))[0], 1.0)


def test_disc_k2_by_hand():
    om, b = 1.0, 1j
    f = FlowSpec.disc(om, b)
    for lam in (-1.3, 0.2, 2.5):
        expected = -lam * (lam - 2 * om) / (2 * b * b)
        assert recurrence_values(f, 2, lam)[2] == pytest.approx(expected, rel=1e-14)


def test_degree_exactly_n(family_flow):
    fam = build_recurrence(family_flow, 10)
    for n in range(11):
        assert abs(fam.coeffs[n, n]) > 0
        assert np.all(fam.coeffs[n, n + 1 :] == 0)


def test_b_zero_degenerate():
    with pytest.raises(DegenerateRecurrence):
        build_recurrence(FlowSpec.rotation(Domain.DISC, 1j), 3)


@pytest.mark.parametrize("f,lam,n,expected", MP_ORACLE)
def test_recurrence_against_high_precision(f, lam, n, expected):
    assert recurrence_values(f, n, lam)[n] == pytest.approx(expected, rel=1e-12)


def test_table_matches_values(family_flow):
    fam = build_recurrence(family_flow, 8)
    for lam in (-0.7, 0.4):
        direct = np.array([fam.poly_at(n, 1j * lam) for n in range(9)])
        np.testing.assert_allclose(direct, fam.values(lam), rtol=1e-10, atol=1e-12)


def test_poly_at_matrix_argument():
    fam = build_recurrence(FAMILY_FLOWS["pochhammer"], 5)
    lam = np.array([-0.5, 1.2])
    X = np.diag(1j * lam)
    for n in range(6):
        np.testing.assert_allclose(np.diag(fam.poly_at(n, X)), fam.values(lam)[n], atol=1e-13)


# ---------------------------------------------------------------------------
# closed forms


def test_exponential_closed_form_example():
    assert closed_form(FlowSpec.plane(0j, 1.0), 3, 2.0) == pytest.approx(-4j / 3)


def test_laguerre_n1():
    f = FlowSpec.disc(0.7, 0.7j)
    lam = 1.9
    assert closed_form(f, 1, lam) == pytest.approx(1j * lam / f.b)


def test_closed_form_n0_prefactors():
    assert closed_form(FAMILY_FLOWS["exponential"], 0, 0.3) == 1.0
    assert closed_form(FAMILY_FLOWS["laguerre"], 0, 0.3) == 1.0
    assert closed_form(FAMILY_FLOWS["mp_hyperbolic"], 0, 0.3) == 1.0
    f = FAMILY_FLOWS["pochhammer"]
    assert closed_form(f, 0, 0.3) == pytest.approx(1j / f.omega)


def test_family_names():
    assert {k: family_name(f) for k, f in FAMILY_FLOWS.items()} == {
        "exponential": "exponential",
        "pochhammer": "pochhammer",
        "mp_hyperbolic": "meixner_pollaczek",
        "mp_elliptic": "meixner_pollaczek",
        "laguerre": "laguerre",
    }


def test_closed_form_errors():
    with pytest.raises(ClosedFormUnavailable):
        closed_form(FlowSpec.disc(0.0, 0.4), 2, 1.0)
    with pytest.raises(DegenerateRecurrence):
        closed_form(FlowSpec.rotation(Domain.PUNCTURED_PLANE, 1j), 2, 1.0)


def test_laguerre_minus1_values():
    # L_n^(-1)(x) = -(x/n) L_{n-1}^(1)(x)
    from scipy.special import eval_genlaguerre

    for n in range(1, 8):
        for x in (0.3, 1.0, 2.5):
            expected = -x / n * eval_genlaguerre(n - 1, 1, x)
            assert laguerre_minus1(n, x) == pytest.approx(expected, rel=1e-12)


def test_meixner_pollaczek_limit():
    # P_n^(0)(x; phi) as the mu -> 0 limit of the lambda-parameter family,
    # via the generating function (1 - e^{i phi} t)^{ix} (1 - e^{-i phi} t)^{-ix}
    import mpmath

    x, phi = 0.37, 0.9
    with mpmath.workdps(30):
        g = lambda t: (1 - mpmath.exp(1j * phi) * t) ** (1j * x) * (1 - mpmath.exp(-1j * phi) * t) ** (-1j * x)
        coeffs = mpmath.taylor(g, 0, 7)
    for n in range(8):
        assert meixner_pollaczek0(n, x, phi) == pytest.approx(complex(coeffs[n]), rel=1e-12, abs=1e-14)


def test_closed_form_constant_per_family(family_flow):
    const = family_constant(family_flow)
    rng = np.random.default_rng(5)
    lams = rng.uniform(-3, 3, 20)
    K = recurrence_values(family_flow, 25, lams)
    for n in range(26):
        ref = np.array([closed_form(family_flow, n, lam) for lam in lams])
        err = np.max(np.abs(ref - const * K[n])) / np.max(np.abs(ref))
        assert err <= 1e-9, (n, err)


def test_generating_functions(family_flow):
    const = family_constant(family_flow)
    rng = np.random.default_rng(8)
    rz = convergence_radius(family_flow)
    rmax = min(0.5, 0.5 * rz)
    for _ in range(50):
        lam = rng.uniform(-2, 2)
        u = rmax * rng.uniform(0, 1) * cmath.exp(2j * math.pi * rng.uniform())
        series = const * coherent_lambda(family_flow, u, lam, 120)
        assert generating_function(family_flow, u, lam) == pytest.approx(series, rel=1e-9, abs=1e-12)


def test_convergence_radius_cases():
    assert convergence_radius(FAMILY_FLOWS["exponential"]) == math.inf
    f = FAMILY_FLOWS["pochhammer"]
    assert convergence_radius(f) == pytest.approx(abs(f.b) / 0.7)
    assert convergence_radius(FAMILY_FLOWS["mp_hyperbolic"]) == 1.0
    assert convergence_radius(FAMILY_FLOWS["laguerre"]) == 1.0
    assert convergence_radius(FAMILY_FLOWS["mp_elliptic"]) == pytest.approx(math.exp(-math.acosh(1.3 / 0.5)))


# ---------------------------------------------------------------------------
# coherent states and kernels


def test_coherent_exponential():
    f = FlowSpec.plane(0j, 1.0)
    assert coherent_lambda(f, 0.3, 1.0, 40) == pytest.approx(cmath.exp(0.3j), rel=1e-12)


def test_coherent_at_zero(family_flow):
    assert coherent_lambda(family_flow, 0.0, 1.7, 20) == 1.0


def test_coherent_laguerre_closed():
    f = FlowSpec.disc(1.0, 1.0)
    lam, z = 0.5, 0.2
    expected = cmath.exp(lam * z / (f.omega * z - 1j * f.b))
    assert coherent_lambda(f, z, lam, 60) == pytest.approx(expected, rel=1e-9)


def test_coherent_frozen_sum():
    f = FlowSpec.disc(1.0, 0.5)
    assert coherent_lambda(f, 0.2, 0.8, 80) == pytest.approx(1.0664226330031645 + 0.2967824335485326j, rel=1e-12)


def test_coherent_divergence():
    f = FAMILY_FLOWS["mp_hyperbolic"]
    with pytest.raises(DivergenceError):
        coherent_lambda(f, 1.5, 0.7, 200)


def test_bochner_kernel_translation():
    f = FlowSpec.plane(0j, 1.0)
    v, z, lam = 0.3 - 0.2j, -0.4 + 0.1j, 1.3
    expected = cmath.exp(1j * lam * (z - v.conjugate()))
    assert kernel_lambda(f, v, z, lam, 60) == pytest.approx(expected, rel=1e-12)
    assert kernel_lambda_product(f, v, z, lam, 60) == pytest.approx(expected, rel=1e-12)


def test_unimodular_on_real_axis():
    f = FlowSpec.plane(0j, 1.0)
    for x in (-1.0, 0.5, 2.0):
        assert abs(kernel_lambda(f, x, x, 0.8, 60)) == pytest.approx(1.0, abs=1e-12)


def test_two_paths_disc_hyperbolic():
    f = FAMILY_FLOWS["mp_hyperbolic"]
    rng = np.random.default_rng(2)
    for _ in range(10):
        v = 0.3 * rng.uniform() * cmath.exp(2j * math.pi * rng.uniform())
        z = 0.3 * rng.uniform() * cmath.exp(2j * math.pi * rng.uniform())
        k, res = kernel_lambda_residual(f, v, z, rng.uniform(-2, 2), 60)
        assert res <= 1e-9 * max(1.0, abs(k))


def _linearization_residual(f, lam, M):
    K = recurrence_values(f, 2 * M, lam)
    s = 1j * f.b.conjugate()
    worst = 0.0
    for m in range(M + 1):
        for n in range(M + 1):
            lhs = K[m].conjugate() * K[n]
            band = beta_band(f, min(m, n), max(m, n))
            rhs = sum(s ** -l * beta_coeff(f, m, n, l) * K[l] for l in band)
            scale = max(1.0, sum(abs(s ** -l * beta_coeff(f, m, n, l) * K[l]) for l in band))
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def test_linearization(family_flow):
    for lam in (-1.1, 0.3, 1.7):
        assert _linearization_residual(family_flow, lam, 8) <= 1e-8


@given(st.sampled_from(sorted(FAMILY_FLOWS)), st.floats(0, 0.3), st.floats(0, 2 * math.pi), st.floats(-0.3, 0.3), st.floats(-2, 2))
def test_equivariance(name, rz, ph, t, lam):
    f = FAMILY_FLOWS[name]
    z = rz * min(1.0, convergence_radius(f)) * cmath.exp(1j * ph)
    zt = evolve(f, t, z)
    if abs(zt) > 0.6 * min(1.0, convergence_radius(f)):
        return
    assert equivariance_residual(f, z, t, lam, 80) <= 1e-8


@given(st.sampled_from(sorted(FAMILY_FLOWS)), st.floats(-3, 3))
def test_closed_form_ratio_constant(name, lam):
    f = FAMILY_FLOWS[name]
    K = recurrence_values(f, 12, lam)
    const = family_constant(f)
    for n in range(13):
        ref = closed_form(f, n, lam)
        assert abs(ref - const * K[n]) <= 1e-9 * max(abs(ref), 1e-300) + 1e-13 * abs(const * K[n])


def test_case_error_off_domain():
    with pytest.raises((CaseError, DegenerateRecurrence)):
        family_name(FlowSpec.rotation(Domain.ANNULUS, 1j, r=0.5))
