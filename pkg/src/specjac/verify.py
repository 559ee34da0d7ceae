"""Operator identities checked on monomials, in rational arithmetic when the inputs allow it.

Every operator in play is diagonal or bidiagonal on monomials, so each
identity reduces to comparing finite coefficient vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .basis import PolyVec, apply_classical_generator, apply_generator, eigenvalue, norm_c_sq
from .bernstein import DecayParams, PhiFunction, derived_bernstein, make_phi
from .measure import moments
from .numeric import num, rising
from .semigroup import tau_laplace

DEFAULT_TOL = 1e-10
KINDS = ("Lambda_phi_d1", "V_phi_star_m", "U_varphi")


@dataclass(frozen=True)
class DiagonalOp:
    """Operator p_n -> multipliers[n] p_n on polynomials of degree <= N."""

    kind: str
    multipliers: tuple

    @property
    def degree(self) -> int:
        return len(self.multipliers) - 1

    def __call__(self, p: PolyVec) -> PolyVec:
        if p.degree > self.degree:
            raise ValueError(f"{self.kind} is tabulated to degree {self.degree}, got {p.degree}")
        return PolyVec(tuple(c * self.multipliers[k] for k, c in enumerate(p.coeffs)))


def diagonal_op(kind: str, phi_fn: PhiFunction, params: DecayParams, n_max: int, mode: str = "auto") -> DiagonalOp:
    mode = params.resolve(mode)
    if kind == "Lambda_phi_d1":
        d1 = params.get("d_one_eps", mode)
        w = phi_fn.w_table(n_max, mode)
        mults = [rising(d1, n) / num(w[n], mode) for n in range(n_max + 1)]
    elif kind == "V_phi_star_m":
        m = params.get("m", mode)
        w = phi_fn.w_table(n_max, mode)
        mults = [num(w[n], mode) / rising(m, n) for n in range(n_max + 1)]
    elif kind == "U_varphi":
        varphi = derived_bernstein(phi_fn, "varphi")
        at0 = varphi.at(0, mode)
        mults = [at0 / varphi.at(n, mode) for n in range(n_max + 1)]
    else:
        raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")
    return DiagonalOp(kind, tuple(mults))


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float
    mode: str
    details: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def _residual(lhs: PolyVec, rhs: PolyVec) -> float:
    """max |lhs - rhs| over coefficients, relative to the largest coefficient."""
    n = max(len(lhs), len(rhs))
    diff = max(abs(float(lhs[k] - rhs[k])) for k in range(n))
    scale = max(lhs.max_abs(), rhs.max_abs(), 1e-300)
    return diff / scale if diff else 0.0


def _monomial(n: int, mode: str) -> PolyVec:
    return PolyVec.monomial(n, "exact" if mode == "exact" else ("float" if mode == "float" else "mp"))


def check_intertwining_right(phi_fn: PhiFunction, params: DecayParams, n_max: int = 30,
                             tol: float = DEFAULT_TOL) -> CheckResult:
    """Generator composed with Lambda against Lambda composed with the classical generator of index d."""
    mode = params.resolve("auto")
    lam_op = diagonal_op("Lambda_phi_d1", phi_fn, params, n_max, mode)
    lam = phi_fn.model.param("lambda1", mode)
    d = params.get("d_theta_eps", mode)
    worst = 0.0
    per_n = {}
    for n in range(n_max + 1):
        p = _monomial(n, mode)
        lhs = apply_generator(phi_fn, lam_op(p), mode)
        rhs = lam_op(apply_classical_generator(lam, d, p, mode))
        per_n[n] = _residual(lhs, rhs)
        worst = max(worst, per_n[n])
    return CheckResult("intertwining_right", worst, tol, mode, per_n)


def check_intertwining_left(phi_fn: PhiFunction, params: DecayParams, n_max: int = 30,
                            tol: float = DEFAULT_TOL) -> CheckResult:
    """V-identity (classical generator of index m after V) when mu >= 1 + hbar, U-identity otherwise.

    The U-identity uses the generator of the induced model, so the shifted
    Laplace exponent is recomputed from its own kernel.
    """
    mode = params.resolve("auto")
    lam = phi_fn.model.param("lambda1", mode)
    worst = 0.0
    per_n = {}
    if not phi_fn.model.small_mu:
        op = diagonal_op("V_phi_star_m", phi_fn, params, n_max, mode)
        m = params.get("m", mode)
        for n in range(n_max + 1):
            p = _monomial(n, mode)
            lhs = apply_classical_generator(lam, m, op(p), mode)
            rhs = op(apply_generator(phi_fn, p, mode))
            per_n[n] = _residual(lhs, rhs)
            worst = max(worst, per_n[n])
        return CheckResult("intertwining_left_V", worst, tol, mode, per_n)
    op = diagonal_op("U_varphi", phi_fn, params, n_max, mode)
    induced = make_phi(derived_bernstein(phi_fn, "varphi").induced_model)
    for n in range(n_max + 1):
        p = _monomial(n, mode)
        lhs = apply_generator(induced, op(p), mode)
        rhs = op(apply_generator(phi_fn, p, mode))
        per_n[n] = _residual(lhs, rhs)
        worst = max(worst, per_n[n])
    return CheckResult("intertwining_left_U", worst, tol, mode, per_n)


def _rel(a, b) -> float:
    diff = abs(float(a - b))
    return diff / max(abs(float(a)), abs(float(b)), 1e-300) if diff else 0.0


def check_factorizations(phi_fn: PhiFunction, params: DecayParams, n_max: int = 30,
                         tol: float = DEFAULT_TOL) -> CheckResult:
    """Moment-level factorisations: beta Lambda = beta_d, and beta_m V = beta or beta_varphi U = beta."""
    mode = params.resolve("auto")
    lam = phi_fn.model.param("lambda1", mode)
    d = params.get("d_theta_eps", mode)
    beta = moments(phi_fn, n_max, mode)
    lam_op = diagonal_op("Lambda_phi_d1", phi_fn, params, n_max, mode)
    details = {"beta_Lambda": 0.0}
    for n in range(n_max + 1):
        lhs = lam_op.multipliers[n] * beta[n]
        rhs = rising(d, n) / rising(lam, n)
        details["beta_Lambda"] = max(details["beta_Lambda"], _rel(lhs, rhs))
    if not phi_fn.model.small_mu:
        op = diagonal_op("V_phi_star_m", phi_fn, params, n_max, mode)
        m = params.get("m", mode)
        details["beta_m_V"] = max(_rel(op.multipliers[n] * rising(m, n) / rising(lam, n), beta[n]) for n in range(n_max + 1))
    else:
        op = diagonal_op("U_varphi", phi_fn, params, n_max, mode)
        induced = make_phi(derived_bernstein(phi_fn, "varphi").induced_model)
        beta_v = moments(induced, n_max, mode)
        details["beta_varphi_U"] = max(_rel(op.multipliers[n] * num(beta_v[n], mode), beta[n]) for n in range(n_max + 1))
    return CheckResult("factorizations", max(details.values()), tol, mode, details)


def symmetry_defects(phi_fn: PhiFunction, n_max: int = 30, mode: str = "auto") -> list:
    """defect[n][m] = beta[(J p_n) p_m] - beta[p_n (J p_m)] from exact moments."""
    mode = phi_fn.resolve(mode)
    lam = phi_fn.model.param("lambda1", mode)
    beta = moments(phi_fn, 2 * n_max, mode)
    psi = [phi_fn.psi_at(n, mode) if n else num(0, mode) for n in range(n_max + 1)]
    lam_n = [eigenvalue(lam, n, mode) for n in range(n_max + 1)]
    out = []
    for n in range(n_max + 1):
        row = []
        for m in range(n_max + 1):
            lower = beta[n + m - 1] if n + m >= 1 else num(0, mode)
            row.append((psi[n] - psi[m]) * lower - (lam_n[n] - lam_n[m]) * beta[n + m])
        out.append(row)
    return out


def check_symmetry_defect(phi_fn: PhiFunction, n_max: int = 30, tol: float = 1e-12) -> CheckResult:
    """Largest symmetry defect; small exactly when the kernel vanishes."""
    mode = phi_fn.resolve("auto")
    defects = symmetry_defects(phi_fn, n_max, mode)
    worst = max(abs(float(v)) for row in defects for v in row)
    return CheckResult("symmetry_defect", worst, tol, mode, {"matrix": defects})


def check_interweaving(phi_fn: PhiFunction, params: DecayParams, n_max: int = 20,
                       tol: float = 1e-12) -> CheckResult:
    """Laplace transform of the warm-up law at lambda_n against c_n(d)^2 / c_n(m)^2."""
    lam = float(phi_fn.model.lambda1)
    d, m = float(params.d_theta_eps), float(params.m)
    per_n = {}
    for n in range(n_max + 1):
        lhs = tau_laplace(params, eigenvalue(lam, n, "float"))
        rhs = float(norm_c_sq(d, n, lam, "mp") / norm_c_sq(m, n, lam, "mp"))
        per_n[n] = _rel(lhs, rhs)
    return CheckResult("interweaving", max(per_n.values()), tol, "float", per_n)


@dataclass(frozen=True)
class NormRatios:
    lambda_direct: tuple
    lambda_closed: tuple
    v_ratio: tuple

    def lambda_trend(self) -> str:
        return _trend(self.lambda_direct)

    def v_trend(self) -> str:
        return _trend(self.v_ratio)


def _trend(seq) -> str:
    vals = [float(v) for v in seq[1:]]
    if all(abs(a - b) <= 1e-14 * max(abs(a), 1.0) for a, b in zip(vals, vals[1:])):
        return "constant"
    if all(b <= a for a, b in zip(vals, vals[1:])):
        return "decreasing"
    if all(b >= a for a, b in zip(vals, vals[1:])):
        return "increasing"
    return "mixed"


def check_norm_ratios(phi_fn: PhiFunction, params: DecayParams, n_max: int = 30) -> NormRatios:
    """Norm ratios of Lambda and V on monomials.

    ``lambda_direct`` is ||Lambda p_n||^2_beta / ||p_n||^2 from the moments;
    ``lambda_closed`` is W(2n+1)(d1)_n^2 / (W(n+1)^2 (d1)_{2n}), which agrees
    with it only when vartheta = 1 (the direct value carries an extra factor
    (vartheta)_{2n} / (2n)!).  ``v_ratio`` is prod_k phi*_m(k) / phi*_m(k+n).
    """
    mode = params.resolve("auto")
    lam = phi_fn.model.param("lambda1", mode)
    d1 = params.get("d_one_eps", mode)
    w = phi_fn.w_table(2 * n_max, mode)
    beta = moments(phi_fn, 2 * n_max, mode)
    lam_op = diagonal_op("Lambda_phi_d1", phi_fn, params, n_max, mode)
    star = derived_bernstein(phi_fn, "phi_star_m", params)
    direct, closed, v_ratio = [], [], []
    for n in range(n_max + 1):
        gamma_norm = rising(d1, 2 * n) / rising(lam, 2 * n)
        direct.append(float(lam_op.multipliers[n] ** 2 * beta[2 * n] / gamma_norm))
        closed.append(float(num(w[2 * n], mode) * rising(d1, n) ** 2 / (num(w[n], mode) ** 2 * rising(d1, 2 * n))))
        prod = num(1, mode)
        for k in range(1, n + 1):
            prod = prod * star.at(k, mode) / star.at(k + n, mode)
        v_ratio.append(float(prod))
    return NormRatios(tuple(direct), tuple(closed), tuple(v_ratio))


def run_all(phi_fn: PhiFunction, params: DecayParams, n_max: int = 30) -> list[CheckResult]:
    """Every identity check, as used by the CLI."""
    results = [
        check_intertwining_right(phi_fn, params, n_max),
        check_intertwining_left(phi_fn, params, n_max),
        check_factorizations(phi_fn, params, n_max),
        check_interweaving(phi_fn, params, min(n_max, 20)),
    ]
    sym = check_symmetry_defect(phi_fn, n_max)
    if phi_fn.model.kernel.is_zero:
        results.append(sym)
    else:
        # with a jump kernel the defect must be visibly non-zero
        results.append(CheckResult("symmetry_defect_nonzero", 0.0 if sym.residual >= 1e-3 else math.inf, 0.0, sym.mode,
                                   {"max_defect": sym.residual}))
    return results
