from fractions import Fraction

import pytest

from specjac.basis import PolyVec, apply_generator
from specjac.bernstein import decay_params, make_phi
from specjac.model import power_model, zero_model
from specjac.semigroup import default_bound_index
from specjac.verify import (
    check_factorizations,
    check_interweaving,
    check_intertwining_left,
    check_intertwining_right,
    check_norm_ratios,
    check_symmetry_defect,
    diagonal_op,
    run_all,
    symmetry_defects,
)

MODELS = {
    "delta1": lambda: power_model(1, Fraction(9, 2)),
    "zero_small": lambda: zero_model(3, Fraction(1, 2)),
    "zero_large": lambda: zero_model(3, Fraction(3, 2)),
    "power2": lambda: power_model(2, 7, Fraction(5, 2)),
    "power_small_mu": lambda: power_model(1, 5, Fraction(3, 2)),
}


def _setup(name):
    phi_fn = make_phi(MODELS[name]())
    m = Fraction(default_bound_index(phi_fn)).limit_denominator(64)
    return phi_fn, decay_params(phi_fn, m)


def test_lambda_on_first_monomial(phi_delta1, params_delta1):
    op = diagonal_op("Lambda_phi_d1", phi_delta1, params_delta1, 3)
    x = PolyVec((Fraction(0), Fraction(1)))
    lam_x = op(x)
    assert lam_x.coeffs == (0, Fraction(2, 3))
    assert apply_generator(phi_delta1, lam_x, "exact").coeffs == (1, -3)


def test_diagonal_op_rejects_bad_input(phi_delta1, params_delta1):
    with pytest.raises(ValueError):
        diagonal_op("nope", phi_delta1, params_delta1, 3)
    op = diagonal_op("V_phi_star_m", phi_delta1, params_delta1, 2)
    with pytest.raises(ValueError):
        op(PolyVec.monomial(3, "exact"))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_intertwinings_hold(name):
    phi_fn, params = _setup(name)
    right = check_intertwining_right(phi_fn, params, 30)
    left = check_intertwining_left(phi_fn, params, 30)
    assert right.passed, right
    assert left.passed, left
    expected = "intertwining_left_U" if phi_fn.model.small_mu else "intertwining_left_V"
    assert left.name == expected


def test_exact_models_have_zero_residual():
    for name in ("delta1", "zero_small", "zero_large"):
        phi_fn, params = _setup(name)
        assert check_intertwining_right(phi_fn, params, 30).residual == 0
        assert check_intertwining_left(phi_fn, params, 30).residual == 0
        assert check_factorizations(phi_fn, params, 30).residual == 0


@pytest.mark.parametrize("name", sorted(MODELS))
def test_factorizations_hold(name):
    phi_fn, params = _setup(name)
    res = check_factorizations(phi_fn, params, 30)
    assert res.passed, res.details


def test_wrong_index_breaks_intertwining(phi_delta1):
    # the right intertwining is specific to d; a different classical index fails
    params = decay_params(phi_delta1, Fraction(7, 2))
    good = check_intertwining_left(phi_delta1, params, 10)
    assert good.passed
    from specjac.basis import apply_classical_generator
    op = diagonal_op("V_phi_star_m", phi_delta1, params, 3, "exact")
    p = PolyVec.monomial(2, "exact")
    lhs = apply_classical_generator(Fraction(9, 2), Fraction(3), op(p), "exact")
    rhs = op(apply_generator(phi_delta1, p, "exact"))
    assert lhs != rhs


def test_symmetry_defect_examples(phi_delta1):
    defects = symmetry_defects(phi_delta1, 4)
    assert defects[2][1] == Fraction(4, 297)
    assert defects[1][2] == -Fraction(4, 297)
    assert all(defects[n][n] == 0 for n in range(5))
    for name in ("zero_small", "zero_large"):
        phi_fn, _ = _setup(name)
        assert check_symmetry_defect(phi_fn, 30).residual <= 1e-12


@pytest.mark.parametrize("name", sorted(MODELS))
def test_interweaving(name):
    phi_fn, params = _setup(name)
    assert check_interweaving(phi_fn, params, 20).residual <= 1e-12


def test_norm_ratios_zero_kernel_decrease():
    phi_fn = make_phi(zero_model(3, Fraction(1, 2)))
    params = decay_params(phi_fn, 2)
    ratios = check_norm_ratios(phi_fn, params, 20)
    assert ratios.lambda_direct[20] < ratios.lambda_direct[5]
    assert ratios.lambda_trend() == "decreasing"


def test_norm_ratios_delta1(phi_delta1, params_delta1):
    ratios = check_norm_ratios(phi_delta1, params_delta1, 30)
    assert min(ratios.lambda_direct) >= 0.1
    assert ratios.v_ratio[0] == 1
    assert ratios.v_ratio[1] < 1
    # vartheta = 1 here, so the closed form and the direct ratio agree
    for a, b in zip(ratios.lambda_direct, ratios.lambda_closed):
        assert a == pytest.approx(b, rel=1e-12)


def test_norm_ratio_closed_form_needs_correction():
    import math
    phi_fn = make_phi(zero_model(3, Fraction(1, 2)))
    params = decay_params(phi_fn, 2)
    vt = float(phi_fn.vartheta_in("float"))
    ratios = check_norm_ratios(phi_fn, params, 10)
    for n in range(11):
        corr = math.gamma(vt + 2 * n) / math.gamma(vt) / math.factorial(2 * n)
        assert ratios.lambda_direct[n] == pytest.approx(ratios.lambda_closed[n] * corr, rel=1e-10)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_run_all(name):
    phi_fn, params = _setup(name)
    results = run_all(phi_fn, params, 20)
    assert all(r.passed for r in results), [(r.name, r.residual) for r in results if not r.passed]
    names = {r.name for r in results}
    assert ("symmetry_defect" in names) == phi_fn.model.kernel.is_zero
