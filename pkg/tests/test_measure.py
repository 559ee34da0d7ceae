import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from specjac.bernstein import make_phi
from specjac.errors import DomainError, SlowDecay, UnsupportedKernel
from specjac.measure import (
    classical_moment,
    classical_rule,
    density,
    density_classical,
    density_delta,
    density_mellin,
    fit_decay_exponent,
    integrate_beta,
    mellin_beta,
    mellin_inversion,
    moment,
    moments,
)
from specjac.model import ModelSpec, TabulatedKernel, power_model, validate, zero_model
from specjac.numeric import rising

from strategies import models


def delta_family_moment(delta, lam, n):
    return Fraction(delta, n + delta) * rising(Fraction(delta + 2), n) / rising(Fraction(lam), n)


def test_moment_examples(phi_delta1, zero_large):
    assert moment(phi_delta1, 0, "exact") == 1
    assert moment(phi_delta1, 1, "exact") == Fraction(1, 3)
    assert moment(phi_delta1, 2, "exact") == Fraction(16, 99)
    p = make_phi(zero_large)
    for n in range(10):
        assert moment(p, n, "exact") == classical_moment(3, Fraction(3, 2), n, "exact")
    with pytest.raises(DomainError):
        moment(p, -1)


def test_moment_sequence_matches_single_moments(phi_delta1):
    seq = moments(phi_delta1, 12, "exact")
    assert len(seq) == 13
    assert all(seq[n] == moment(phi_delta1, n, "exact") for n in range(13))


@given(st.integers(min_value=1, max_value=4), st.integers(min_value=3, max_value=12), st.integers(0, 20))
def test_delta_family_moments_closed_form(delta, gap, n):
    lam = Fraction(2 * (delta + 2) + 2 * gap + 1, 2)  # half-integers keep lambda - delta off the integers
    p = make_phi(power_model(delta, lam))
    assert moment(p, n, "exact") == delta_family_moment(delta, lam, n)


@given(models())
def test_moments_are_stieltjes(model):
    seq = [float(v) for v in moments(make_phi(model), 32, "mp").values]
    assert seq[0] == 1
    for n in range(31):
        assert 0 < seq[n + 1] < seq[n]
        assert seq[n + 1] ** 2 <= seq[n] * seq[n + 2] * (1 + 1e-12)


# ---------------------------------------------------------------- Mellin


def test_mellin_examples(phi_delta1):
    assert mellin_beta(phi_delta1, 1) == pytest.approx(1.0, abs=1e-14)
    assert mellin_beta(phi_delta1, 2) == pytest.approx(1 / 3, rel=1e-13)
    with pytest.raises(DomainError):
        mellin_beta(make_phi(zero_model(3, 0.5)), 0.4)


@given(models(), st.integers(min_value=0, max_value=25))
def test_mellin_at_integers_is_moment(model, n):
    p = make_phi(model)
    assert mellin_beta(p, n + 1).real == pytest.approx(float(moment(p, n, "mp")), rel=1e-10)


def test_mellin_conjugate_symmetry(phi_delta1):
    z = 2 + 7.5j
    assert mellin_beta(phi_delta1, z.conjugate()) == pytest.approx(mellin_beta(phi_delta1, z).conjugate())


def test_mellin_decay_exponent(phi_delta1):
    slope = fit_decay_exponent(lambda z: mellin_beta(phi_delta1, z), 2.0)
    assert phi_delta1.delta_index() == 2.5
    assert abs(slope - 2.5) < 0.1


def test_tabulated_kernels_have_no_mellin():
    nodes = tuple(np.geomspace(1.01, 30, 20))
    tab = TabulatedKernel(nodes, tuple(r**-3.0 for r in nodes), 2.0)
    p = make_phi(validate(ModelSpec(6, 3, tab)))
    with pytest.raises(UnsupportedKernel):
        mellin_beta(p, 2)
    with pytest.raises(UnsupportedKernel):
        density_mellin(p, 0.5)


# ------------------------------------------------------------- densities


def test_classical_density_examples():
    assert density_classical(2, 1, 0.3) == pytest.approx(1.0)
    expected = math.gamma(4.5) / (math.gamma(2) * math.gamma(2.5)) * 0.5 * 0.5**1.5
    assert density_classical(4.5, 2, 0.5) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(8.75 * 0.5**2.5, rel=1e-14)
    with pytest.raises(DomainError):
        density_classical(4.5, 2, 1.0)


@given(st.floats(min_value=0.3, max_value=5.0), st.floats(min_value=0.3, max_value=5.0))
def test_classical_rule_reproduces_moments(mu, gap):
    lam = mu + gap
    x, w = classical_rule(lam, mu)
    for n in range(11):
        assert np.dot(w, x**n) == pytest.approx(float(classical_moment(lam, mu, n)), rel=1e-10)


def test_delta_density_normalised_and_reproduces_moments(delta1, phi_delta1):
    assert integrate_beta(delta1, np.ones_like) == pytest.approx(1.0, abs=1e-8)
    for n in range(11):
        assert integrate_beta(delta1, lambda x: x**n) == pytest.approx(float(moment(phi_delta1, n, "mp")), abs=1e-8)
    # independent check by adaptive quadrature
    total, _ = integrate.quad(lambda x: density_delta(delta1, x), 0, 1, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_delta_density_edges(delta1):
    x = np.array([1e-6, 1 - 1e-6])
    vals = density_delta(delta1, x)
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
    # (1-x)^(lambda-delta-2) = (1-x)^1.5 near 1
    ratio = density_delta(delta1, 1 - 1e-4) / density_delta(delta1, 1 - 4e-4)
    assert ratio == pytest.approx(4**-1.5, rel=1e-2)


def test_density_needs_closed_form():
    with pytest.raises(UnsupportedKernel):
        density(power_model(1, 5, 3), 0.5)


def test_density_mellin_matches_closed_forms(delta1, phi_delta1):
    assert density_mellin(phi_delta1, 0.5) == pytest.approx(density_delta(delta1, 0.5), abs=1e-6)
    zm = zero_model(4.5, 2)
    pz = make_phi(zm)
    for x in np.linspace(0.1, 0.9, 9):
        assert density_mellin(pz, x) == pytest.approx(density_classical(4.5, 2, x), abs=1e-6)
        assert abs(mellin_inversion(pz, x).imag) < 1e-8


def test_density_mellin_refuses_slow_decay():
    p = make_phi(zero_model(1.8, 1))  # Delta = 0.8
    with pytest.raises(SlowDecay):
        density_mellin(p, 0.5)


def test_beta_rule_for_generic_power_model():
    # mu != delta + 1 has no closed density but the Mellin route still works
    model = power_model(1, 6, 3)
    p = make_phi(model)
    xs = np.linspace(0.05, 0.95, 19)
    vals = np.array([density_mellin(p, x) for x in xs])
    assert np.all(vals > 0)
    total, _ = integrate.quad(lambda x: density_mellin(p, x, tol=1e-8), 0.001, 0.999, limit=100, epsabs=1e-6)
    assert total == pytest.approx(1.0, abs=2e-3)
