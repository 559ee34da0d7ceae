import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from specjac.basis import eigenvalue
from specjac.bernstein import d_phi, decay_params, derived_bernstein, make_phi, phi, psi, rho, w_phi
from specjac.errors import InvalidDecayParams, PoleError
from specjac.model import power_model, zero_model
from specjac.numeric import pochhammer

from strategies import deltas, models


# ------------------------------------------------------------------- psi


def test_psi_examples(phi_delta1, zero_small):
    assert psi(phi_delta1, 0) == 0
    assert psi(phi_delta1, 1) == pytest.approx(1.5)
    p = make_phi(zero_small)
    for u in (0.2, 1.0, 3.7):
        assert psi(p, u) == pytest.approx(u * (u - 0.5), rel=1e-14)


@given(models(), st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=0.0, max_value=50.0))
def test_psi_is_convex(model, a, b):
    p = make_phi(model)
    mid = psi(p, (a + b) / 2)
    assert mid <= (psi(p, a) + psi(p, b)) / 2 + 1e-9 * (1 + abs(mid))


@given(models())
def test_psi_grows_like_square(model):
    p = make_phi(model)
    assert psi(p, 1e6) / 1e12 == pytest.approx(1.0, rel=1e-5)


# ----------------------------------------------------------------- theta


def test_theta_examples(phi_delta1, zero_small, zero_large):
    assert phi_delta1.theta == 0 and phi_delta1.vartheta == 1
    p = make_phi(zero_small)
    assert p.theta == 0.5 and p.vartheta == 0.5
    assert make_phi(zero_large).theta == 0


@given(models())
def test_theta_is_a_root_in_unit_interval(model):
    p = make_phi(model)
    assert 0 <= p.theta < 1
    assert abs(psi(p, p.theta)) <= 1e-12
    assert psi(p, 1.0) > 0
    assert (p.theta > 0) == model.small_mu


@given(deltas, st.floats(min_value=3.2, max_value=9.0))
def test_delta_family_has_vartheta_one(delta, gap):
    p = make_phi(power_model(delta, delta + gap))
    assert p.vartheta == 1


# ------------------------------------------------------------------- phi


def test_phi_closed_forms(phi_delta1, zero_small):
    for u in (0.0, 0.5, 1.0, 7.0):
        assert phi(phi_delta1, u) == pytest.approx((u + 2) * u / (u + 1), abs=1e-15)
    p = make_phi(zero_model(5, 2.5))
    assert phi(p, 0.0) == pytest.approx(1.5)
    assert phi(make_phi(zero_small), 1.0) == pytest.approx(1.0)
    # removable singularity at theta
    assert phi(make_phi(zero_small), 0.5) == pytest.approx(0.5, rel=1e-8)


@given(models())
def test_phi_is_bernstein_on_log_grid(model):
    p = make_phi(model)
    u = np.geomspace(1e-3, 1e3, 200)
    v = np.array([phi(p, x) for x in u])
    assert np.all(v[u > p.theta] > 0)
    dv = np.diff(v) / np.diff(u)
    assert np.all(dv >= -1e-6 * np.abs(dv).max())
    # concavity: slopes do not increase
    assert np.all(np.diff(dv) <= 1e-6 * np.abs(dv).max())
    assert phi(p, 1e6) / 1e6 == pytest.approx(1.0, rel=1e-5)


# ------------------------------------------------------------------- W


def test_w_examples(phi_delta1, zero_large):
    assert w_phi(phi_delta1, 0) == 1
    assert w_phi(phi_delta1, 2) == 4
    p = make_phi(zero_large)
    for n in range(8):
        assert w_phi(p, n) == pochhammer(Fraction(3, 2), n)


@given(models(), st.integers(min_value=0, max_value=60))
def test_w_ratio_is_phi(model, n):
    # w_phi(p, n) is the product of phi(1..n)
    p = make_phi(model)
    ratio = float(w_phi(p, n + 1, "mp") / w_phi(p, n, "mp"))
    assert ratio == pytest.approx(phi(p, n + 1), rel=1e-13)


@given(deltas)
def test_power_law_gamma_ratio_matches_product(delta):
    p = make_phi(power_model(delta, delta + 4))
    for z in range(1, 41):
        log_closed = (special.gammaln(z + delta + 1) + special.gammaln(z + delta - 1) + special.gammaln(delta + 1)
                      - special.gammaln(z + delta) - special.gammaln(delta + 2) - special.gammaln(delta))
        assert p.log_w_phi(z - 1) == pytest.approx(log_closed, rel=1e-12, abs=1e-12)
        assert float(np.real(p.log_w_complex(complex(z)))) == pytest.approx(log_closed, rel=1e-12, abs=1e-12)


def test_w_closed_form_delta_family(phi_delta1):
    for n in range(20):
        assert w_phi(phi_delta1, n) == Fraction(1, n + 1) * pochhammer(Fraction(3), n)


# ------------------------------------------------------------ pochhammer


def test_pochhammer_examples():
    assert pochhammer(2.5, 0) == 1
    assert pochhammer(3, 2) == 12
    assert pochhammer(2.5, 1.5) == pytest.approx(math.gamma(4) / math.gamma(2.5), rel=1e-14)
    assert pochhammer(2.5, 1.5) == pytest.approx(4.51351, rel=1e-5)
    with pytest.raises(PoleError):
        pochhammer(-0.5, -0.5)


@given(st.floats(min_value=0.1, max_value=30.0), st.floats(min_value=0.0, max_value=30.0))
def test_pochhammer_recurrence(a, x):
    assert pochhammer(a, x + 1) == pytest.approx((a + x) * pochhammer(a, x), rel=1e-12)


# ------------------------------------------------------------------- rho


def test_rho_examples():
    assert rho(4.5, 0) == 0
    assert rho(4.5, 4.5) == pytest.approx(1.0, abs=1e-15)
    assert rho(4.5, 11) == pytest.approx(2.0, abs=1e-15)


# below lambda = 1 the |lambda - 1| branch makes rho a shifted inverse
@given(st.floats(min_value=1.0, max_value=40.0), st.integers(min_value=0, max_value=50))
def test_rho_inverts_eigenvalues(lam, n):
    assert rho(lam, float(eigenvalue(lam, n))) == pytest.approx(n, abs=1e-12 * max(n, 1))


# ----------------------------------------------------------- derived + d


def test_d_phi_examples(phi_delta1, zero_small):
    assert d_phi(phi_delta1) == 0
    assert d_phi(make_phi(power_model(3, 8))) == 2
    assert d_phi(make_phi(zero_small)) == 0
    assert d_phi(make_phi(zero_model(4, 2))) == 1


def test_derived_examples(phi_delta1, params_delta1, zero_small):
    vp = derived_bernstein(make_phi(zero_small), "varphi")
    for u in (0.0, 1.0, 3.0):
        assert vp(u) == pytest.approx(u + 0.5, rel=1e-12)
    assert vp.induced_model.mu == Fraction(3, 2)
    d1 = derived_bernstein(phi_delta1, "phi_d1_eps", params_delta1)
    for u in (0.5, 2.0, 9.0):
        assert d1(u) == pytest.approx(phi(phi_delta1, u), rel=1e-14)
    star = derived_bernstein(phi_delta1, "phi_star_m", params_delta1)
    assert star.at(1, "exact") == Fraction(3, 7)


def test_varphi_induced_model_has_varphi_as_exponent(phi_delta1):
    vp = derived_bernstein(phi_delta1, "varphi")
    induced = make_phi(vp.induced_model)
    for u in (0.3, 1.0, 5.0):
        assert phi(induced, u) == pytest.approx(vp(u), rel=1e-10)


def test_decay_params_rules(phi_delta1, zero_small):
    params = decay_params(phi_delta1, 3.5)
    assert params.d_theta_eps == 1 and params.d_one_eps == 1 and params.epsilon == 0
    with pytest.raises(InvalidDecayParams):
        decay_params(phi_delta1, 4.6)
    with pytest.raises(InvalidDecayParams):
        decay_params(phi_delta1, 3.5, 0.5)  # d_phi = 0 forces epsilon = 0
    p3 = make_phi(power_model(3, 8))
    assert decay_params(p3, 6, 1).d_theta_eps == 2
    with pytest.raises(InvalidDecayParams):
        decay_params(p3, 6, 3)
    small = decay_params(make_phi(zero_small), 2)
    assert small.d_theta_eps == Fraction(1, 2) and small.d_one_eps == 1
    with pytest.raises(InvalidDecayParams):
        derived_bernstein(phi_delta1, "nonsense", params)
