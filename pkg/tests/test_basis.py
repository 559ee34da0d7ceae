import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specjac.basis import (
    PolyVec,
    apply_classical_generator,
    apply_generator,
    apply_generator_direct,
    classical_jacobi,
    eigenvalue,
    norm_c_n,
    norm_c_n_asymptotic,
    pnphi,
    pnphi_delta_identity,
)
from specjac.bernstein import make_phi
from specjac.errors import DomainError, PrecisionLoss
from specjac.measure import beta_rule, classical_rule
from specjac.model import power_model, zero_model

from strategies import models

poly_coeffs = st.lists(st.fractions(min_value=-10, max_value=10, max_denominator=50), min_size=1, max_size=8)


def rel_residual(a: PolyVec, b: PolyVec) -> float:
    n = max(len(a), len(b))
    scale = max(a.max_abs(), b.max_abs(), 1e-300)
    return max(abs(float(a[k] - b[k])) for k in range(n)) / scale


# --------------------------------------------------------------- PolyVec


@given(poly_coeffs, poly_coeffs, st.fractions(min_value=-2, max_value=2, max_denominator=20))
def test_polyvec_algebra_matches_evaluation(a, b, x):
    p, q = PolyVec(tuple(a)), PolyVec(tuple(b))
    assert ((p * q)(float(x))) == pytest.approx(p(float(x)) * q(float(x)), rel=1e-12, abs=1e-9)
    assert ((p + q)(float(x))) == pytest.approx(p(float(x)) + q(float(x)), rel=1e-12, abs=1e-9)
    assert p.shift()(float(x)) == pytest.approx(float(x) * p(float(x)), rel=1e-12, abs=1e-9)


def test_polyvec_trims_and_differentiates():
    p = PolyVec((1, 2, 3, 0, 0))
    assert p.degree == 2
    assert p.derivative().coeffs == (2, 6)
    assert PolyVec(()).coeffs == (0,)


# ------------------------------------------------------------- classical


def test_classical_constant():
    assert classical_jacobi(0, 4.5, 2, "exact").coeffs == (1,)


def test_classical_orthonormal():
    x, w = classical_rule(4.5, 2)
    polys = [classical_jacobi(n, 4.5, 2, "mp")(x) for n in range(9)]
    gram = np.array([[np.dot(w, a * b) for b in polys] for a in polys])
    assert np.max(np.abs(gram - np.eye(9))) <= 1e-9


def test_classical_eigen_equation():
    for n in range(1, 8):
        p = classical_jacobi(n, 4.5, 2, "mp")
        lhs = apply_classical_generator(4.5, 2, p)
        assert rel_residual(lhs, p * (-eigenvalue(4.5, n, "mp"))) <= 1e-30


def test_classical_domain():
    with pytest.raises(DomainError):
        classical_jacobi(2, 2, 3)


# ------------------------------------------------------------ pnphi


def test_pnphi_constant(phi_delta1):
    assert pnphi(0, phi_delta1, "exact").coeffs == (1,)


def test_pnphi_delta_identity(phi_delta1):
    for n in range(9):
        direct = pnphi(n, phi_delta1, "mp")
        rebuilt = pnphi_delta_identity(n, 1, 4.5, "mp")
        assert rel_residual(direct, rebuilt) <= 1e-10


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=0, max_value=10))
def test_pnphi_delta_identity_other_deltas(delta, n):
    lam = delta + 3.5
    p = make_phi(power_model(delta, lam))
    assert rel_residual(pnphi(n, p, "mp"), pnphi_delta_identity(n, delta, lam, "mp")) <= 1e-10


def test_zero_kernel_pnphi_proportional_to_classical():
    p = make_phi(zero_model(4.5, 2))
    for n in range(1, 8):
        a, b = pnphi(n, p, "mp"), classical_jacobi(n, 4.5, 2, "mp")
        ratios = [float(a[k] / b[k]) for k in range(n + 1)]
        assert max(ratios) - min(ratios) <= 1e-12 * abs(ratios[0])


def test_pnphi_biorthogonal_to_beta_moments_in_degree_zero(delta1, phi_delta1):
    # beta[P_n] = 0 for n >= 1 since V_0 = 1
    x, w = beta_rule(delta1)
    for n in range(1, 10):
        assert abs(np.dot(w, pnphi(n, phi_delta1, "mp")(x))) <= 1e-10


# -------------------------------------------------------------- generator


def test_generator_examples(phi_delta1):
    assert apply_generator(phi_delta1, PolyVec.monomial(0, "exact")).coeffs == (0,)
    img = apply_generator(phi_delta1, PolyVec.monomial(1, "exact"))
    assert img.coeffs == (Fraction(3, 2), Fraction(-9, 2))


@given(models(), st.integers(min_value=0, max_value=12))
def test_eigen_equation(model, n):
    p = make_phi(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionLoss)
        poly = pnphi(n, p, "mp")
    lhs = apply_generator(p, poly, "mp")
    rhs = poly * (-eigenvalue(model.lambda1, n, "mp"))
    assert rel_residual(lhs, rhs) <= 1e-10


def test_eigen_equation_exact(phi_delta1):
    lam = phi_delta1.model.lambda1
    for n in range(13):
        poly = pnphi(n, phi_delta1, "exact", normalized=False)
        assert apply_generator(phi_delta1, poly, "exact") == poly * (-eigenvalue(lam, n, "exact"))


@given(models(), st.integers(min_value=1, max_value=8))
def test_generator_agrees_with_defining_formula(model, n):
    p = make_phi(model)
    mono = PolyVec.monomial(n, "float")
    rule = apply_generator(p, mono, "float")
    direct = apply_generator_direct(p, mono)
    assert rel_residual(rule, direct) <= 1e-10


# ------------------------------------------------------------- constants


def test_norm_c_examples():
    assert all(norm_c_n(1, n, 4.5) == pytest.approx(1.0, rel=1e-14) for n in range(20))
    assert norm_c_n(3.5, 1, 4.5) == pytest.approx(3.5, rel=1e-14)
    ratios = [norm_c_n(3.5, n, 4.5) / norm_c_n(2, n, 4.5) for n in range(1, 21)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


@given(st.floats(min_value=1.0, max_value=6.0), st.floats(min_value=0.5, max_value=5.0))
def test_norm_c_asymptotic(s, gap):
    # gamma-ratio asymptotics: the relative error is c/n + O(1/n^2)
    lam = s + gap
    err = [norm_c_n(s, n, lam) / norm_c_n_asymptotic(s, n, lam) - 1 for n in (4000, 8000)]
    assert abs(err[0]) <= 0.02
    if abs(err[0]) < 1e-9:
        assert abs(err[1]) < 1e-9
    else:
        assert err[1] / err[0] == pytest.approx(0.5, abs=0.01)


def test_norm_c_domain():
    with pytest.raises(DomainError):
        norm_c_n(5, 2, 4.5)


def test_eigenvalues_strictly_increasing():
    vals = [eigenvalue(4.5, n) for n in range(51)]
    assert vals[:3] == [0, 4.5, 11]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        eigenvalue(4.5, -1)


def test_precision_warning_for_high_degree_floats():
    p = make_phi(power_model(1, 4.5))
    with pytest.warns(PrecisionLoss):
        pnphi(30, p, "float")
    assert math.isfinite(pnphi(30, p, "mp").max_abs())
