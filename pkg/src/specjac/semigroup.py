"""Spectral evaluation of the semigroup, the warm-up law and the decay constants."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .basis import DEGREE_CAP, PolyVec, classical_jacobi, norm_c_n, pnphi
from .basis import eigenvalue as _eigenvalue
from .bernstein import DecayParams, PhiFunction, decay_params, rho
from .coeigen import coeigen, project_poly
from .errors import DomainError, ParamOutOfRange, QuadratureFailure, TruncationWarning
from .measure import beta_rule, classical_moment, classical_rule, jacobi_rule
from .numeric import mp, num, rising

MIN_T = 0.01
DEFAULT_TOL = 1e-10
DEFAULT_GRID = 101


def eigenvalue(lambda1, n: int) -> float:
    """lambda_n = n^2 + (lambda1 - 1) n."""
    return float(_eigenvalue(lambda1, n, "float"))


# ------------------------------------------------------------ projections


def project(f, n: int, phi_fn: PhiFunction, mode: str = "mp") -> float:
    """<f, V_n>_beta.

    Polynomials are projected exactly through integer moments of w_n;
    other callables are integrated against w_n by Gauss-Jacobi quadrature.
    """
    if isinstance(f, PolyVec):
        return float(project_poly(phi_fn, f, n, mode))
    ce = coeigen(phi_fn, n)
    if ce.smooth_factor is None:
        raise DomainError("projecting a general function needs an explicit co-eigenfunction")
    a, b = ce.edges
    x, w = jacobi_rule(a, b, 256)
    return float(np.dot(w, np.asarray(f(x), dtype=float) * ce.smooth_factor(x)))


def _poly_norm_sq(f: PolyVec, phi_fn: PhiFunction) -> float:
    from .measure import moments

    m = moments(phi_fn, 2 * f.degree, "mp")
    total = mp.mpf(0)
    for i, a in enumerate(f.coeffs):
        for j, b in enumerate(f.coeffs):
            total += num(a, "mp") * num(b, "mp") * m[i + j]
    return float(total)


def _function_norm(f, phi_fn: PhiFunction) -> float:
    if isinstance(f, PolyVec):
        return math.sqrt(max(_poly_norm_sq(f, phi_fn), 0.0))
    x, w = beta_rule(phi_fn.model)
    return math.sqrt(float(np.dot(w, np.asarray(f(x), dtype=float) ** 2)))


def default_bound_index(phi_fn: PhiFunction):
    """Midpoint of the admissible range of the reference index, used for the term bounds."""
    model = phi_fn.model
    lower = float(model.mu) + (1.0 if model.small_mu else 0.0)
    return 0.5 * (lower + float(model.lambda1))


def term_bound(phi_fn: PhiFunction, n: int, m=None) -> float:
    """Bound c_n(m) / c_n(vartheta) on the norm of V_n."""
    m = default_bound_index(phi_fn) if m is None else float(m)
    lam = float(phi_fn.model.lambda1)
    return float(norm_c_n(m, n, lam)) / float(norm_c_n(phi_fn.vartheta, n, lam))


# --------------------------------------------------------------- expansion


@dataclass(frozen=True)
class SpectralExpansion:
    """Truncated expansion sum_n multiplier_n <f, V_n> P_n."""

    phi_fn: PhiFunction
    eigenvalues: tuple
    projections: tuple
    basis: tuple
    f_norm: float
    exact: bool

    @property
    def n_terms(self) -> int:
        return len(self.eigenvalues) - 1

    def polynomial(self, multipliers) -> PolyVec:
        total = PolyVec((mp.mpf(0),))
        for mult, proj, p in zip(multipliers, self.projections, self.basis):
            if proj == 0:
                continue
            total = total + p * (num(mult, "mp") * num(proj, "mp"))
        return total

    def evaluate(self, x, multipliers) -> np.ndarray:
        return np.asarray(self.polynomial(multipliers)(x), dtype=float)

    def tail_bound(self, multiplier_fn, m=None, extra: int = 200) -> float:
        """Sum of term bounds past the truncation; 0 when the projections vanish there exactly."""
        if self.exact:
            return 0.0
        n0 = self.n_terms + 1
        return self.f_norm * sum(multiplier_fn(n) * term_bound(self.phi_fn, n, m) for n in range(n0, n0 + extra))


def expand(f, phi_fn: PhiFunction, n_terms: int) -> SpectralExpansion:
    if n_terms > DEGREE_CAP:
        raise DomainError(f"truncation {n_terms} exceeds the basis cap {DEGREE_CAP}")
    lam = phi_fn.model.lambda1
    exact = isinstance(f, PolyVec) and f.degree <= n_terms
    projections, basis = [], []
    for n in range(n_terms + 1):
        projections.append(project(f, n, phi_fn))
        basis.append(pnphi(n, phi_fn, "mp"))
    eig = tuple(eigenvalue(lam, n) for n in range(n_terms + 1))
    return SpectralExpansion(phi_fn, eig, tuple(projections), tuple(basis), _function_norm(f, phi_fn), exact)


def choose_truncation(phi_fn: PhiFunction, t: float, tol: float = DEFAULT_TOL, m=None) -> int:
    """Smallest N with exp(-lambda_N t) c_N(m) / c_N(vartheta) < tol, capped at the basis limit."""
    lam = phi_fn.model.lambda1
    for n in range(1, DEGREE_CAP + 1):
        if math.exp(-eigenvalue(lam, n) * t) * term_bound(phi_fn, n, m) < tol:
            return n
    return DEGREE_CAP


@dataclass(frozen=True)
class GridResult:
    x: np.ndarray
    values: np.ndarray
    n_terms: int
    tail_bound: float
    poly: PolyVec | None = field(default=None, repr=False)


def _grid(x):
    return np.linspace(0.0, 1.0, DEFAULT_GRID) if x is None else np.asarray(x, dtype=float)


def _resolve_terms(f, phi_fn, t, n_terms, tol):
    if n_terms is not None:
        return n_terms
    if isinstance(f, PolyVec):
        return min(f.degree, DEGREE_CAP)
    return choose_truncation(phi_fn, t, tol)


def _finish(exp: SpectralExpansion, mults, multiplier_fn, x, tol) -> GridResult:
    tail = exp.tail_bound(multiplier_fn)
    if tail > tol:
        warnings.warn(f"estimated truncation error {tail:.3g} exceeds {tol:g}", TruncationWarning, stacklevel=3)
    poly = exp.polynomial(mults)
    return GridResult(x, np.asarray(poly(x), dtype=float), exp.n_terms, tail, poly)


def apply(f, t: float, phi_fn: PhiFunction, n_terms: int | None = None, x=None, tol: float = DEFAULT_TOL) -> GridResult:
    """J_t f on a grid from the truncated spectral expansion."""
    if t < MIN_T:
        raise DomainError(f"the spectral expansion is not usable for t < {MIN_T}; use the simulator instead")
    n_terms = _resolve_terms(f, phi_fn, t, n_terms, tol)
    exp_ = expand(f, phi_fn, n_terms)
    mults = [math.exp(-lam_n * t) for lam_n in exp_.eigenvalues]
    lam = phi_fn.model.lambda1
    return _finish(exp_, mults, lambda n: math.exp(-eigenvalue(lam, n) * t), _grid(x), tol)


def classical_apply(f, t: float, lambda1, mu, n_terms: int | None = None, x=None, tol: float = DEFAULT_TOL) -> GridResult:
    """Classical Jacobi semigroup on a grid, with the orthonormal Jacobi basis."""
    if t < MIN_T:
        raise DomainError(f"the spectral expansion is not usable for t < {MIN_T}")
    if n_terms is None:
        if isinstance(f, PolyVec):
            n_terms = min(f.degree, DEGREE_CAP)
        else:
            n_terms = next((n for n in range(1, DEGREE_CAP + 1) if math.exp(-eigenvalue(lambda1, n) * t) < tol),
                           DEGREE_CAP)
    basis = [classical_jacobi(n, lambda1, mu, "mp") for n in range(n_terms + 1)]
    if isinstance(f, PolyVec):
        mom = [classical_moment(lambda1, mu, k, "mp") for k in range(f.degree + n_terms + 1)]
        proj = []
        for p in basis:
            s = mp.mpf(0)
            for i, a in enumerate(f.coeffs):
                for j, b in enumerate(p.coeffs):
                    s += num(a, "mp") * b * mom[i + j]
            proj.append(s)
        f_norm = 0.0 if f.degree <= n_terms else math.sqrt(sum(float(v) ** 2 for v in proj))
        exact = f.degree <= n_terms
    else:
        nodes, w = classical_rule(lambda1, mu)
        fx = np.asarray(f(nodes), dtype=float)
        proj = [float(np.dot(w, fx * p(nodes))) for p in basis]
        f_norm = math.sqrt(float(np.dot(w, fx**2)))
        exact = False
    x = _grid(x)
    total = PolyVec((mp.mpf(0),))
    for n, (c, p) in enumerate(zip(proj, basis)):
        total = total + p * (num(c, "mp") * mp.exp(-eigenvalue(lambda1, n) * t))
    tail = 0.0 if exact else f_norm * sum(math.exp(-eigenvalue(lambda1, n) * t) for n in range(n_terms + 1, n_terms + 200))
    if tail > tol:
        warnings.warn(f"estimated truncation error {tail:.3g} exceeds {tol:g}", TruncationWarning, stacklevel=2)
    return GridResult(x, np.asarray(total(x), dtype=float), n_terms, tail, total)


# ------------------------------------------------------------- warm-up law


def tau_laplace(params: DecayParams, u):
    """E[exp(-u tau)] = (d)_r (lambda1-m)_r / ((m)_r (lambda1-d)_r) with r = rho(u)."""
    lam = float(params.lambda1)
    m = float(params.m)
    d = float(params.d_theta_eps)
    r = rho(lam, u)
    log_val = (
        special.gammaln(d + r) - special.gammaln(d)
        + special.gammaln(lam - m + r) - special.gammaln(lam - m)
        - special.gammaln(m + r) + special.gammaln(m)
        - special.gammaln(lam - d + r) + special.gammaln(lam - d)
    )
    val = np.exp(log_val)
    return float(val) if np.ndim(val) == 0 else val


def warmup_multiplier(params: DecayParams, n: int, mode: str = "auto"):
    """E[exp(-lambda_n tau)] as a Pochhammer ratio; rational when the parameters are."""
    mode = params.resolve(mode)
    lam = num(params.lambda1, mode)
    m, d = params.get("m", mode), params.get("d_theta_eps", mode)
    return rising(d, n) * rising(lam - m, n) / (rising(m, n) * rising(lam - d, n))


def subordinated_eigenvalue(params: DecayParams, n: int) -> float:
    """-log E[exp(-lambda_n tau)]: eigenvalues of the subordinated generator."""
    if n < 0:
        raise DomainError("index must be non-negative")
    return -float(mp.log(warmup_multiplier(params, n, "mp")))


def warmup_apply(f, t: float, params: DecayParams, n_terms: int | None = None, x=None,
                 tol: float = DEFAULT_TOL) -> GridResult:
    """J_{t + tau} f: multipliers exp(-lambda_n t) E[exp(-lambda_n tau)]."""
    if t < 0:
        raise DomainError("t must be non-negative")
    phi_fn = params.phi_fn
    lam = phi_fn.model.lambda1
    if n_terms is None:
        if isinstance(f, PolyVec):
            n_terms = min(f.degree, DEGREE_CAP)
        else:
            n_terms = DEGREE_CAP
    exp_ = expand(f, phi_fn, n_terms)

    def mult(n):
        return math.exp(-eigenvalue(lam, n) * t) * float(warmup_multiplier(params, n, "mp"))

    mults = [mult(n) for n in range(n_terms + 1)]
    return _finish(exp_, mults, mult, _grid(x), tol)


# ------------------------------------------------------ variance, entropy


def variance_beta(values, weights) -> float:
    values = np.asarray(values, dtype=float)
    mean = float(np.dot(weights, values))
    return float(np.dot(weights, (values - mean) ** 2))


def entropy_beta(values, weights) -> float:
    """Ent(f) = beta[f log f] - beta[f] log beta[f], with f clipped at 1e-300."""
    v = np.clip(np.asarray(values, dtype=float), 1e-300, None)
    mean = float(np.dot(weights, v))
    return float(np.dot(weights, v * np.log(v))) - mean * math.log(mean)


# ------------------------------------------------------------ Bessel sums


def bessel_sums(f: PolyVec, phi_fn: PhiFunction, params: DecayParams, n_max: int = 20) -> dict:
    """Weighted sums of squared analysis coefficients of f, next to beta[f^2].

    ``v_d1`` weights <f, V_n> by c_n(d_1); ``p_d1`` weights <f, P_n> by
    c_n(d_1); ``v_ratio`` weights <f, V_n> by c_n(vartheta)/c_n(m).
    """
    lam = float(phi_fn.model.lambda1)
    d1 = float(params.d_one_eps)
    m = float(params.m)
    x, w = beta_rule(phi_fn.model)
    fx = np.asarray(f(x), dtype=float)
    sums = {"v_d1": 0.0, "p_d1": 0.0, "v_ratio": 0.0}
    for n in range(n_max + 1):
        cd = float(norm_c_n(d1, n, lam))
        v_coef = project(f, n, phi_fn)
        p_coef = float(np.dot(w, fx * pnphi(n, phi_fn, "mp")(x)))
        ratio = float(norm_c_n(phi_fn.vartheta, n, lam)) / float(norm_c_n(m, n, lam))
        sums["v_d1"] += (cd * v_coef) ** 2
        sums["p_d1"] += (cd * p_coef) ** 2
        sums["v_ratio"] += (ratio * v_coef) ** 2
    sums["norm_sq"] = float(np.dot(w, fx**2))
    return sums


# ---------------------------------------------------------- decay constants


def _lower(params: DecayParams) -> float:
    model = params.phi_fn.model
    return float(model.mu) + (1.0 if model.small_mu else 0.0)


def hypocoercive_prefactor(params: DecayParams, mode: str = "auto"):
    """m (lambda1 - d) / (d (lambda1 - m)), always larger than 1."""
    mode = params.resolve(mode)
    lam = num(params.lambda1, mode)
    m, d = params.get("m", mode), params.get("d_theta_eps", mode)
    return m * (lam - d) / (d * (lam - m))


def _is_half(params: DecayParams) -> bool:
    return abs(2 * float(params.m) - float(params.lambda1)) <= 1e-15 * float(params.lambda1)


def entropy_rate(params: DecayParams) -> float:
    """Log-Sobolev rate of the reference classical semigroup, known in closed form (2 lambda1) for m = lambda1/2."""
    if not _is_half(params):
        raise ParamOutOfRange("the entropy rate is < 2 lambda1 and not computed unless m = lambda1/2")
    return 2.0 * float(params.lambda1)


def optimal_entropy_rate(params: DecayParams) -> float:
    """2 lambda1, available whenever lambda1 > 2 (1{mu < 1 + hbar} + mu)."""
    lam = float(params.lambda1)
    if not lam > 2 * _lower(params):
        raise ParamOutOfRange("the rate 2 lambda1 needs lambda1 > 2 (1{mu < 1+hbar} + mu)")
    return 2.0 * lam


def hypercontractivity_q(rate: float, t: float) -> float:
    """Largest q with ||J_{t+tau}||_{2->q} <= 1: 1 + exp(rate t)."""
    return 1.0 + math.exp(rate * t)


def ultracontractivity_exponent(params: DecayParams) -> float:
    """p = (lambda1 - m) / (lambda1 - m - 1), needs lambda1 - m > 1."""
    gap = float(params.lambda1) - float(params.m)
    if not gap > 1:
        raise ParamOutOfRange(f"ultracontractivity needs lambda1 - m > 1, got {gap:.17g}")
    return gap / (gap - 1.0)


def sobolev_constant(params: DecayParams, mode: str = "auto"):
    """4 / (lambda1 (lambda1 - 2)), the constant for m = lambda1/2 and lambda1 > 2."""
    if not _is_half(params):
        raise ParamOutOfRange("the Sobolev constant is only explicit for m = lambda1/2")
    mode = params.resolve(mode)
    lam = num(params.lambda1, mode)
    if not float(lam) > 2:
        raise ParamOutOfRange("the Sobolev constant needs lambda1 > 2")
    return 4 / (lam * (lam - 2))


def tau_negative_moment(params: DecayParams, p: float) -> float:
    """E[tau^-p] = (1/Gamma(p)) int_0^inf E[exp(-u tau)] u^(p-1) du; needs p < m - d."""
    m, d = float(params.m), float(params.d_theta_eps)
    if not 0 < p < m - d:
        raise ParamOutOfRange(f"E[tau^-p] is finite only for 0 < p < m - d = {m - d:.17g}")

    # in log scale u = e^s both tails decay exponentially, like e^(p s) on the
    # left and e^((p + d - m) s) on the right; cut where they fall below e^-40
    s_lo = -40.0 / p
    s_hi = min(700.0, 40.0 / (m - d - p) + 10.0)

    def integrand(s):
        u = math.exp(s)
        return tau_laplace(params, u) * u**p

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            head, _ = integrate.quad(integrand, s_lo, 0.0, limit=200)
            tail, _ = integrate.quad(integrand, 0.0, s_hi, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"E[tau^-p] quadrature did not converge: {exc}") from exc
    return (head + tail) / math.gamma(p)


def heat_kernel_bound(params: DecayParams, t: float) -> float:
    """Right-hand side of the bound on |q_t(x, y) - 1| for the subordinated semigroup."""
    lam, m, d = float(params.lambda1), float(params.m), float(params.d_theta_eps)
    if not t > 2:
        raise ParamOutOfRange("the heat-kernel bound holds for t > 2")
    if not 1 < lam - m < (m - d) * (lam - m - 1):
        raise ParamOutOfRange("the heat-kernel bound needs 1 < lambda1 - m < (m - d)(lambda1 - m - 1)")
    p = ultracontractivity_exponent(params)
    c = float(sobolev_constant(params, "mp"))
    ratio = float(hypocoercive_prefactor(params, "mp"))
    return c * (tau_negative_moment(params, p) + 1.0) * ratio ** ((1.0 - 2.0 * t) / 2.0)


@dataclass(frozen=True)
class DecayReport:
    """Explicit constants; an entry is None when its hypothesis fails, with the reason in ``notes``."""

    m: float
    d: float
    prefactor: float
    variance_rate: float
    subordinated_gap: float
    entropy_rate: float | None
    hypercontractivity_q: float | None
    ultracontractivity_exponent: float | None
    sobolev_constant: float | None
    heat_kernel_bound: float | None
    t: float
    notes: dict

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "notes"}
        out.update({f"note_{k}": v for k, v in self.notes.items()})
        return out


def decay_report(params: DecayParams, t: float = 1.0) -> DecayReport:
    notes = {}

    def attempt(name, fn):
        try:
            return float(fn())
        except ParamOutOfRange as exc:
            notes[name] = str(exc)
            return None

    rate = attempt("entropy_rate", lambda: entropy_rate(params))
    q = None if rate is None else hypercontractivity_q(rate, t)
    if rate is None:
        notes["hypercontractivity_q"] = "needs a known entropy rate"
    return DecayReport(
        m=float(params.m),
        d=float(params.d_theta_eps),
        prefactor=float(hypocoercive_prefactor(params, "mp")),
        variance_rate=2.0 * float(params.lambda1),
        subordinated_gap=subordinated_eigenvalue(params, 1),
        entropy_rate=rate,
        hypercontractivity_q=q,
        ultracontractivity_exponent=attempt("ultracontractivity_exponent", lambda: ultracontractivity_exponent(params)),
        sobolev_constant=attempt("sobolev_constant", lambda: sobolev_constant(params, "mp")),
        heat_kernel_bound=attempt("heat_kernel_bound", lambda: heat_kernel_bound(params, t)),
        t=t,
        notes=notes,
    )


__all__ = [
    "DecayReport",
    "GridResult",
    "SpectralExpansion",
    "apply",
    "bessel_sums",
    "choose_truncation",
    "classical_apply",
    "decay_params",
    "decay_report",
    "entropy_beta",
    "entropy_rate",
    "eigenvalue",
    "expand",
    "heat_kernel_bound",
    "hypocoercive_prefactor",
    "optimal_entropy_rate",
    "project",
    "sobolev_constant",
    "subordinated_eigenvalue",
    "tau_laplace",
    "tau_negative_moment",
    "ultracontractivity_exponent",
    "variance_beta",
    "warmup_apply",
    "warmup_multiplier",
]
