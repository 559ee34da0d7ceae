"""Co-eigenfunctions V_n = w_n / beta of the generator.

``w_n`` is the signed measure biorthogonal to the eigenpolynomials.  Three
routes are provided:

* integer Mellin moments ``int x^k w_n``, available for every kernel, which
  give exact projections of polynomials;
* the Mellin transform on vertical lines (zero and power-law kernels), from
  which ``w_n`` is recovered by numerical inversion;
* for the power-law family with ``mu = delta + 1`` an explicit power series
  around 0 and its resummation ``x^(delta-1) (1-x)^(lambda1-delta-2) Q_n(x)``
  with ``Q_n`` a polynomial of degree n + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .basis import PolyVec, classical_jacobi, norm_C, pnphi
from .bernstein import PhiFunction, make_phi
from .errors import DomainError, SlowConvergence, UnsupportedKernel
from .measure import (
    density,
    density_mellin,
    edge_exponents,
    has_density,
    invert_mellin,
    jacobi_rule,
    log_mellin_beta,
    moments,
)
from .model import ValidatedModel, is_delta_family
from .numeric import mp, num, rising, sqrt

SWITCH_X = 0.85
SERIES_TOL = 1e-14
SERIES_MAX_TERMS = 20000


# ------------------------------------------------------- Mellin transforms


def _prefactor(phi_fn: PhiFunction, n: int, mode: str):
    """(lambda1 - vartheta)_n sqrt(C_n(vartheta)) / (n! (lambda1)_n)."""
    lam = phi_fn.model.param("lambda1", mode)
    vt = phi_fn.vartheta_in(mode)
    c_n = sqrt(norm_C(n, vt, lam, mode), mode)
    return rising(lam - vt, n) * c_n / (math.factorial(n) * rising(lam, n))


def log_wn_mellin(phi_fn: PhiFunction, n: int, z):
    """log of the Mellin transform of w_n, on complex numpy arrays."""
    z = np.asarray(z, dtype=complex)
    lam = float(phi_fn.model.lambda1)
    out = math.log(float(_prefactor(phi_fn, n, "mp"))) + log_mellin_beta(phi_fn, z)
    out = out + special.loggamma(lam + z - 1.0) - special.loggamma(lam + n + z - 1.0)
    out = out + special.gammaln(lam + n) - special.gammaln(lam)
    with np.errstate(divide="ignore"):
        for j in range(1, n + 1):
            out = out + np.log(z - j)
    return out


def wn_mellin(phi_fn: PhiFunction, n: int, z):
    """int_0^1 x^(z-1) w_n(dx) for Re z > theta."""
    if phi_fn.closed_form is None:
        raise UnsupportedKernel("the Mellin transform of w_n needs a zero or power-law kernel")
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr.real <= phi_fn.theta):
        raise DomainError(f"need Re z > theta = {phi_fn.theta:.17g}")
    val = np.exp(log_wn_mellin(phi_fn, n, z_arr))
    return complex(val) if np.ndim(z) == 0 else val


def wn_moment(phi_fn: PhiFunction, n: int, k: int, mode: str = "mp"):
    """int x^k w_n(dx), built from the moments of beta; valid for every kernel."""
    if k < n:
        return num(0, phi_fn.resolve(mode))
    return wn_moments(phi_fn, n, k, mode)[k]


def wn_moments(phi_fn: PhiFunction, n: int, k_max: int, mode: str = "mp") -> list:
    """[int x^k w_n(dx) for k = 0..k_max]."""
    mode = phi_fn.resolve(mode)
    lam = phi_fn.model.param("lambda1", mode)
    pre = _prefactor(phi_fn, n, mode)
    beta_m = moments(phi_fn, k_max, mode)
    out = []
    for k in range(k_max + 1):
        if k < n:
            out.append(num(0, mode))
            continue
        falling = math.factorial(k) // math.factorial(k - n)
        out.append(pre * falling * rising(lam, k) / rising(lam + n, k) * beta_m[k])
    return out


def project_poly(phi_fn: PhiFunction, f: PolyVec, n: int, mode: str = "mp"):
    """<f, V_n>_beta for a polynomial f, exact up to the arithmetic used."""
    if f.degree < n:
        return num(0, phi_fn.resolve(mode))
    mom = wn_moments(phi_fn, n, f.degree, mode)
    total = num(0, phi_fn.resolve(mode))
    for k in range(n, f.degree + 1):
        total = total + num(f[k], phi_fn.resolve(mode)) * mom[k]
    return total


# ------------------------------------------------------ power-law family


def _check_delta_family(model: ValidatedModel) -> tuple:
    if not is_delta_family(model):
        raise UnsupportedKernel("explicit co-eigenfunctions need a power-law kernel with mu = delta + 1")
    return model.kernel.delta, model.lambda1


def _series_constant(delta, lambda1, n: int):
    """delta (lambda1-1) Gamma(lambda1+n-1) sqrt(C_n(1)) / (n! Gamma(delta+2)), in mpmath."""
    d, lam = num(delta, "mp"), num(lambda1, "mp")
    return d * (lam - 1) * mp.gamma(lam + n - 1) * mp.sqrt(norm_C(n, 1, lam, "mp")) / (
        math.factorial(n) * mp.gamma(d + 2)
    )


@lru_cache(maxsize=None)
def _stirling2(m: int) -> tuple:
    """Rows S(m, 0..m) of Stirling numbers of the second kind."""
    if m == 0:
        return (1,)
    prev = _stirling2(m - 1) + (0,)
    return tuple((j * prev[j] if j else 0) + (prev[j - 1] if j else 0) for j in range(m + 1))


@lru_cache(maxsize=None)
def smooth_factor_delta(delta, lambda1, n: int) -> PolyVec:
    """Q_n with w_n(x) = x^(delta-1) (1-x)^(lambda1-delta-2) Q_n(x) (mpmath coefficients).

    Expanding (k-1)(delta+k)_n in falling factorials k(k-1)...(k-j+1) turns
    each piece of the series into a binomial series in closed form.
    """
    d, lam = num(delta, "mp"), num(lambda1, "mp")
    p = PolyVec((mp.mpf(-1), mp.mpf(1)))
    for i in range(n):
        p = p * PolyVec((d + i, mp.mpf(1)))
    e = [mp.mpf(0)] * (p.degree + 1)
    for m_deg, coeff in enumerate(p.coeffs):
        for j, s in enumerate(_stirling2(m_deg)):
            e[j] += coeff * s
    const = _series_constant(delta, lambda1, n)
    one_minus = PolyVec((mp.mpf(1), mp.mpf(-1)))
    total = PolyVec((mp.mpf(0),))
    for j, ej in enumerate(e):
        if ej == 0:
            continue
        sign = 1 if (n + 1 + j) % 2 == 0 else -1
        term = PolyVec.monomial(j, "mp") * (sign * ej * mp.rgamma(lam + n - d - j))
        for _ in range(n + 1 - j):
            term = term * one_minus
        total = total + term
    return total * const


@dataclass(frozen=True)
class _SeriesCoefficients:
    log_abs: np.ndarray
    sign: np.ndarray


@lru_cache(maxsize=64)
def _series_coefficients(delta: float, lambda1: float, n: int, terms: int) -> _SeriesCoefficients:
    d, lam = delta, lambda1
    const = float(_series_constant(delta, lambda1, n)) * math.sin(math.pi * (d - lam)) / math.pi
    k = np.arange(terms, dtype=float)
    arg = k + d - n - lam + 1.0
    log_abs = special.gammaln(arg) - special.gammaln(k + 1.0) + math.log(abs(const))
    log_abs += special.gammaln(d + k + n) - special.gammaln(d + k)
    with np.errstate(divide="ignore"):
        log_abs += np.log(np.abs(k - 1.0))
    sign = special.gammasgn(arg) * np.sign(k - 1.0) * math.copysign(1.0, const)
    log_abs.setflags(write=False)
    sign.setflags(write=False)
    return _SeriesCoefficients(log_abs, sign)


def wn_series_delta(model: ValidatedModel, n: int, x, tol: float = SERIES_TOL, max_terms: int = SERIES_MAX_TERMS):
    """Power series of w_n around 0 for the power-law family, summed until the ratio-test tail is below tol."""
    delta, lam = _check_delta_family(model)
    d, lam_f = float(delta), float(lam)
    gap = lam_f - d
    if abs(gap - round(gap)) < 1e-12 and round(gap) >= 1:
        raise DomainError("the series form needs lambda1 - delta outside the positive integers")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((x_arr <= 0) | (x_arr >= 1)):
        raise DomainError("the series is evaluated on (0, 1)")
    out = np.empty_like(x_arr)
    for i, xv in enumerate(x_arr):
        out[i] = _sum_series(d, lam_f, n, xv, tol, max_terms)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def _sum_series(d: float, lam: float, n: int, x: float, tol: float, max_terms: int) -> float:
    terms = 256
    lx = math.log(x)
    while True:
        coeffs = _series_coefficients(d, lam, n, terms)
        k = np.arange(terms)
        logs = coeffs.log_abs + k * lx
        vals = np.where(np.isfinite(logs), coeffs.sign * np.exp(logs), 0.0)
        partial = np.cumsum(vals)
        mags = np.exp(logs)
        # ratio-test tail estimate |t_{k+1}| / (1 - r)
        ratio = np.exp(np.diff(logs))
        tail = np.full(terms, np.inf)
        ok = np.isfinite(ratio) & (ratio < 1)
        tail[:-1][ok] = mags[1:][ok] / (1 - ratio[ok])
        done = np.nonzero((tail <= tol * np.maximum(np.abs(partial), 1e-300)) & (k > n + 2))[0]
        if done.size:
            return float(partial[done[0]] * x ** (d - 1))
        if terms >= max_terms:
            raise SlowConvergence(f"series for w_{n} at x={x:.6g} needs more than {max_terms} terms")
        terms = min(2 * terms, max_terms)


# ------------------------------------------------------------- CoEigen


@dataclass(frozen=True)
class CoEigen:
    """Co-eigenfunction of degree n.

    ``representation`` is ``series-delta`` (power-law family, evaluated by the
    series below x = 0.85 and by its resummed form above), ``polynomial``
    (zero kernel, where V_n is itself a polynomial) or ``mellin`` (other
    power-law kernels, evaluated by Mellin inversion).
    """

    phi_fn: PhiFunction
    n: int
    representation: str
    delta: float
    smooth_factor: PolyVec | None = None
    edges: tuple | None = None
    _moments: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    @property
    def model(self) -> ValidatedModel:
        return self.phi_fn.model

    def w(self, x):
        """Value of w_n at points of (0, 1)."""
        x_arr = np.asarray(x, dtype=float)
        if np.any((x_arr <= 0) | (x_arr >= 1)):
            raise DomainError("w_n is evaluated on the open interval (0, 1)")
        if self.representation == "mellin":
            flat = [self.mellin_w(float(t)) for t in x_arr.ravel()]
            out = np.array(flat).reshape(x_arr.shape)
        elif self.representation == "series-delta":
            out = self.closed_w(x_arr)
            low = x_arr <= SWITCH_X
            if np.any(low):
                try:
                    out = np.where(low, wn_series_delta(self.model, self.n, np.where(low, x_arr, 0.5)), out)
                except DomainError:
                    pass
        else:
            out = self.closed_w(x_arr)
        return float(out) if np.ndim(x) == 0 else out

    def closed_w(self, x):
        a, b = self.edges
        x = np.asarray(x, dtype=float)
        return x**a * (1 - x) ** b * self.smooth_factor(x)

    def mellin_w(self, x: float, tol: float = 1e-9) -> float:
        fn = self.phi_fn
        return invert_mellin(lambda z: log_wn_mellin(fn, self.n, z), self.delta, fn.theta, x, tol=tol).real

    def v(self, x):
        """V_n = w_n / beta."""
        x_arr = np.asarray(x, dtype=float)
        if np.any((x_arr <= 0) | (x_arr >= 1)):
            raise DomainError("V_n is evaluated on the open interval (0, 1)")
        if self.n == 0:
            out = np.ones_like(x_arr)
        elif self.representation == "mellin":
            out = np.array([self.mellin_w(float(t)) / density_mellin(self.phi_fn, float(t)) for t in x_arr.ravel()])
            out = out.reshape(x_arr.shape)
        else:
            out = self.w(x_arr) / density(self.model, x_arr)
        return float(out) if np.ndim(x) == 0 else out

    def moment(self, k: int, mode: str = "mp"):
        key = (k, mode)
        if key not in self._moments:
            self._moments[key] = wn_moment(self.phi_fn, self.n, k, mode)
        return self._moments[key]

    def l2_norm_sq(self) -> float:
        """int w_n^2 dx by Gauss-Jacobi quadrature; inf when w_n is not square integrable."""
        if self.smooth_factor is None:
            raise UnsupportedKernel("the L2 norm needs an explicit co-eigenfunction")
        a, b = self.edges
        if 2 * a <= -1 or 2 * b <= -1:
            return math.inf
        nodes = max(64, self.smooth_factor.degree + 8)
        x, wts = jacobi_rule(2 * a, 2 * b, nodes)
        return float(np.dot(wts, self.smooth_factor(x) ** 2))


def coeigen(phi_fn: PhiFunction | ValidatedModel, n: int) -> CoEigen:
    """Build the co-eigenfunction of degree n for the kernels where it can be evaluated."""
    if isinstance(phi_fn, ValidatedModel):
        phi_fn = make_phi(phi_fn)
    if n < 0:
        raise DomainError("degree must be non-negative")
    model = phi_fn.model
    big_delta = phi_fn.delta_index()
    if is_delta_family(model):
        q = smooth_factor_delta(model.kernel.delta, model.lambda1, n)
        return CoEigen(phi_fn, n, "series-delta", big_delta, q, edge_exponents(model))
    if model.kernel.is_zero:
        return CoEigen(phi_fn, n, "polynomial", big_delta, _zero_smooth_factor(phi_fn, n), edge_exponents(model))
    if phi_fn.closed_form is not None:
        return CoEigen(phi_fn, n, "mellin", big_delta)
    raise UnsupportedKernel("pointwise co-eigenfunctions need a zero or power-law kernel")


def _zero_smooth_factor(phi_fn: PhiFunction, n: int) -> PolyVec:
    """Zero kernel: V_n is the classical polynomial rescaled so that <P_n, V_n> = 1."""
    model = phi_fn.model
    lam, mu = num(model.lambda1, "mp"), num(model.mu, "mp")
    classical = classical_jacobi(n, lam, mu, "mp")
    eigen = pnphi(n, phi_fn, "mp")
    scale = num(eigen.coeffs[-1], "mp") / num(classical.coeffs[-1], "mp")
    norm = mp.gamma(lam) / (mp.gamma(mu) * mp.gamma(lam - mu))
    return classical * (norm / scale)


def wn(model: ValidatedModel, n: int, x):
    return coeigen(model, n).w(x)


def vn(model: ValidatedModel, n: int, x):
    """V_n(x) = w_n(x) / beta(x)."""
    return coeigen(model, n).v(x)


# --------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class SmoothnessReport:
    delta: float
    w_in_l2: bool
    continuity_class: int | None
    mellin_density: bool


def smoothness_report(phi_fn: PhiFunction | ValidatedModel) -> SmoothnessReport:
    if isinstance(phi_fn, ValidatedModel):
        phi_fn = make_phi(phi_fn)
    d = phi_fn.delta_index()
    cls = math.ceil(d - 1e-12) - 2 if d >= 2 else None
    return SmoothnessReport(d, d > 0.5, cls, d > 1)


def count_sign_changes(fn, lo: float = 1e-3, hi: float = 1 - 1e-3, points: int = 2000) -> int:
    """Sign changes of fn on a grid, each one refined by bisection so touching zeros are ignored."""
    x = np.linspace(lo, hi, points)
    vals = np.asarray(fn(x), dtype=float)
    count = 0
    for i in range(points - 1):
        if vals[i] == 0 or vals[i] * vals[i + 1] < 0:
            count += 1
    return count


# ----------------------------------------------------------- Rodrigues


def wn_rodrigues(phi_fn: PhiFunction | ValidatedModel, n: int, x: float) -> float:
    """w_n from the Rodrigues formula, differentiating the product convolution symbolically.

    With g = gamma_{lambda1+n, lambda1}, (x^n (g <> beta))(x) is a finite sum
    of powers of x times int_x^1 s^(-lambda1-j) beta(s) ds, so its n-th
    derivative only needs one boundary term and n quadratures.  Integrating by
    parts shows that the Rodrigues operator multiplies Mellin transforms by
    (-1)^n (z-1)...(z-n) / n!, so the result carries a factor (-1)^n to match
    the normalisation <P_n, V_n> = 1.
    """
    if isinstance(phi_fn, ValidatedModel):
        phi_fn = make_phi(phi_fn)
    model = phi_fn.model
    if not has_density(model):
        raise UnsupportedKernel("the Rodrigues route needs a closed-form density")
    x = float(x)
    if not 0 < x < 1:
        raise DomainError("x must lie in (0, 1)")
    beta_x = density(model, x)
    if n == 0:
        return beta_x
    lam = float(model.lambda1)
    log_c = special.gammaln(lam + n) - special.gammaln(lam) - special.gammaln(n)
    total = 0.0
    for j in range(n):
        falling = math.prod(lam + n - 1 + j - i for i in range(n))
        integral, _ = integrate.quad(lambda s, j=j: s ** (-lam - j) * density(model, s), x, 1.0, limit=200,
                                     epsabs=0.0, epsrel=1e-12)
        total += math.comb(n - 1, j) * (-1) ** j * falling * x ** (lam - 1 + j) * integral
    total -= math.factorial(n - 1) * (-1) ** (n - 1) * beta_x
    rod = math.exp(log_c) * total / math.factorial(n)
    const = float(_prefactor(phi_fn, n, "mp")) * math.factorial(n)
    return (-1) ** n * const * rod
