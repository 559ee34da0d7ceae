"""Invariant measure: moments, Mellin transform, densities and quadrature rules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, special

from .bernstein import PhiFunction
from .errors import DomainError, SlowConvergence, SlowDecay, UnsupportedKernel
from .model import ValidatedModel, is_delta_family
from .numeric import num, rising


# ---------------------------------------------------------------- moments


def moment(phi_fn: PhiFunction, n: int, mode: str = "float"):
    """beta[x^n] = (vartheta)_n W(n+1) / ((lambda1)_n n!)."""
    if n < 0:
        raise DomainError("moment index must be non-negative")
    mode = phi_fn.resolve(mode)
    vt = phi_fn.vartheta_in(mode)
    lam = phi_fn.model.param("lambda1", mode)
    return rising(vt, n) * phi_fn.w_phi(n, mode) / (rising(lam, n) * math.factorial(n))


@dataclass(frozen=True)
class MomentSequence:
    phi_fn: PhiFunction
    values: tuple

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    def mellin(self, z):
        return mellin_beta(self.phi_fn, z)


def moments(phi_fn: PhiFunction, n_max: int, mode: str = "float") -> MomentSequence:
    """beta[x^0], ..., beta[x^n_max] sharing a single W table."""
    mode = phi_fn.resolve(mode)
    vt = phi_fn.vartheta_in(mode)
    lam = phi_fn.model.param("lambda1", mode)
    w = phi_fn.w_table(n_max, mode)
    out = []
    ratio = num(1, mode)  # (vt)_n / ((lam)_n n!)
    for n in range(n_max + 1):
        if n:
            ratio = ratio * (vt + n - 1) / ((lam + n - 1) * n)
        out.append(ratio * w[n])
    return MomentSequence(phi_fn, tuple(out))


def classical_moment(lambda1, mu, n: int, mode: str = "float"):
    """Moments (mu)_n / (lambda1)_n of the beta(mu, lambda1 - mu) law."""
    return rising(num(mu, mode), n) / rising(num(lambda1, mode), n)


# ----------------------------------------------------------------- Mellin


def log_mellin_beta(phi_fn: PhiFunction, z):
    z = np.asarray(z, dtype=complex)
    vt = phi_fn.vartheta
    lam = float(phi_fn.model.lambda1)
    out = (
        special.loggamma(vt + z - 1.0)
        - special.loggamma(vt)
        - special.loggamma(lam + z - 1.0)
        + special.loggamma(lam)
        + phi_fn.log_w_complex(z)
        - special.loggamma(z)
    )
    return out


def mellin_beta(phi_fn: PhiFunction, z):
    """int_0^1 x^(z-1) beta(dx) for Re z > theta (zero and power-law kernels)."""
    if phi_fn.closed_form is None:
        raise UnsupportedKernel("the Mellin transform needs a zero or power-law kernel")
    if np.any(np.real(np.asarray(z, dtype=complex)) <= phi_fn.theta):
        raise DomainError(f"Mellin transform needs Re z > theta = {phi_fn.theta:.17g}")
    val = np.exp(log_mellin_beta(phi_fn, z))
    return complex(val) if np.ndim(z) == 0 else val


def fit_decay_exponent(fn, a: float, b_lo: float = 50.0, b_hi: float = 500.0, points: int = 64) -> float:
    """Least-squares slope of -log|fn(a+ib)| against log b on a log grid."""
    b = np.geomspace(b_lo, b_hi, points)
    mags = np.abs(fn(a + 1j * b))
    slope, _ = np.polyfit(np.log(b), np.log(mags), 1)
    return float(-slope)


# -------------------------------------------------------------- densities


def _check_open_unit(x):
    x_arr = np.asarray(x, dtype=float)
    if np.any((x_arr <= 0) | (x_arr >= 1)) or np.any(~np.isfinite(x_arr)):
        raise DomainError("densities are evaluated on the open interval (0, 1)")
    return x_arr


def density_classical(lambda1, mu, x):
    """beta(mu, lambda1 - mu) density."""
    lam, m = float(lambda1), float(mu)
    x_arr = _check_open_unit(x)
    logc = special.gammaln(lam) - special.gammaln(m) - special.gammaln(lam - m)
    val = np.exp(logc + (m - 1) * np.log(x_arr) + (lam - m - 1) * np.log1p(-x_arr))
    return float(val) if np.ndim(x) == 0 else val


def _delta_of(model: ValidatedModel) -> float:
    if not is_delta_family(model):
        raise UnsupportedKernel("closed-form density needs a power-law kernel with mu = delta + 1")
    return float(model.kernel.delta)


def density_delta(model: ValidatedModel, x):
    """Closed-form invariant density of the power-law family (mu = delta + 1)."""
    d = _delta_of(model)
    lam = float(model.lambda1)
    x_arr = _check_open_unit(x)
    gam = density_classical(lam, d, x_arr)
    val = ((lam - d - 2) * x_arr + 1) / ((d + 1) * (1 - x_arr)) * gam
    return float(val) if np.ndim(x) == 0 else val


def has_density(model: ValidatedModel) -> bool:
    return model.kernel.is_zero or is_delta_family(model)


def edge_exponents(model: ValidatedModel) -> tuple[float, float]:
    """Exponents (a, b) with density ~ x^a near 0 and ~ (1-x)^b near 1."""
    lam = float(model.lambda1)
    if model.kernel.is_zero:
        mu = float(model.mu)
        return mu - 1.0, lam - mu - 1.0
    d = _delta_of(model)
    return d - 1.0, lam - d - 2.0


def density(model: ValidatedModel, x):
    """Invariant density for the kernels where it is known in closed form."""
    if model.kernel.is_zero:
        return density_classical(model.lambda1, model.mu, x)
    return density_delta(model, x)


def density_smooth_part(model: ValidatedModel, x):
    """density(x) / (x^a (1-x)^b) with (a, b) = edge_exponents: a polynomial."""
    lam = float(model.lambda1)
    x = np.asarray(x, dtype=float)
    if model.kernel.is_zero:
        mu = float(model.mu)
        logc = special.gammaln(lam) - special.gammaln(mu) - special.gammaln(lam - mu)
        return np.exp(logc) * np.ones_like(x)
    d = _delta_of(model)
    logc = special.gammaln(lam) - special.gammaln(d) - special.gammaln(lam - d)
    return np.exp(logc) * ((lam - d - 2) * x + 1) / (d + 1)


def invert_mellin(log_transform, delta: float, theta: float, x: float, a: float | None = None,
                  tol: float = 1e-9, b_max: float = 4e5) -> complex:
    """(1/2pi) int M(a+ib) x^(-a-ib) db by the trapezoid rule on a symmetric grid.

    ``log_transform`` returns log M on numpy arrays of complex points, M is
    analytic for Re z > theta and decays like |b|^-delta.  The imaginary part
    of the result should vanish and is returned as a consistency check.
    """
    if delta <= 1:
        raise SlowDecay(f"Mellin transform decays like |b|^-{delta:.3g}; inversion needs exponent > 1")
    x = float(x)
    if not 0 < x < 1:
        raise DomainError("x must lie in (0, 1)")
    if a is None:
        a = theta + 1.0
    lx = math.log(x)
    b0 = 50.0
    c_est = abs(np.exp(log_transform(np.array([a + 1j * b0]))[0])) * b0**delta
    # The tail past B is an oscillating integral of size ~ C B^-Delta / |log x|
    # (with a factor 10 of slack); it is never worse than the absolute bound.
    amp = c_est * x ** (-a) / math.pi
    b_abs = (amp / ((delta - 1.0) * tol)) ** (1.0 / (delta - 1.0))
    b_osc = (10.0 * amp / (abs(lx) * tol)) ** (1.0 / delta) if lx != 0 else math.inf
    b_trunc = max(b0, min(b_abs, b_osc))
    if b_trunc > b_max:
        raise SlowConvergence(f"inversion would need |b| up to {b_trunc:.3g} for tol={tol:g}")
    # Trapezoid error decays like exp(-2 pi eta / h), eta being how far the
    # contour can move left before reaching the pole line Re z = theta.
    eta = 0.9 * (a - theta)
    h = 2 * math.pi * eta / (math.log(1.0 / tol) + eta * abs(lx) + 2.0)
    n = int(math.ceil(b_trunc / h))
    z = a + 1j * (h * np.arange(-n, n + 1))
    vals = np.exp(log_transform(z) - z * lx)
    total = vals.sum() - 0.5 * (vals[0] + vals[-1])
    return complex(total * h / (2 * math.pi))


def mellin_inversion(phi_fn: PhiFunction, x: float, a: float | None = None, tol: float = 1e-9) -> complex:
    """Invariant density at x recovered from its Mellin transform (complex, see invert_mellin)."""
    if phi_fn.closed_form is None:
        raise UnsupportedKernel("Mellin inversion needs a zero or power-law kernel")
    return invert_mellin(lambda z: log_mellin_beta(phi_fn, z), phi_fn.delta_index(), phi_fn.theta, x, a, tol)


def density_mellin(phi_fn: PhiFunction, x: float, a: float | None = None, tol: float = 1e-9) -> float:
    """Invariant density recovered from its Mellin transform."""
    return mellin_inversion(phi_fn, x, a, tol).real


# ------------------------------------------------------------- quadrature


@lru_cache(maxsize=64)
def jacobi_rule(a: float, b: float, n: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on (0,1) for int g(x) x^a (1-x)^b dx.

    Golub-Welsch on the Jacobi matrix of (1-t)^b (1+t)^a; for a few hundred
    nodes this is markedly more accurate than scipy's roots_jacobi.
    """
    if not (a > -1 and b > -1):
        raise DomainError("Jacobi weights need exponents > -1")
    al, be = b, a
    k = np.arange(1, n, dtype=float)
    s = 2 * k + al + be
    diag = np.empty(n)
    diag[0] = (be - al) / (al + be + 2)
    diag[1:] = (be * be - al * al) / (s * (s + 2))
    off = np.empty(n - 1)
    if n > 1:
        # the general term is 0/0 at k = 1 when al + be = -1
        off[0] = 4 * (1 + al) * (1 + be) / ((2 + al + be) ** 2 * (3 + al + be))
        kk, ss = k[1:], s[1:]
        off[1:] = 4 * kk * (kk + al) * (kk + be) * (kk + al + be) / (ss * ss * (ss + 1) * (ss - 1))
    t, vecs = linalg.eigh_tridiagonal(diag, np.sqrt(off))
    x = 0.5 * (1.0 + t)
    w = math.exp(special.betaln(a + 1.0, b + 1.0)) * vecs[0] ** 2
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def beta_rule(model: ValidatedModel, n: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with sum(w f(x)) = beta[f], exact for polynomials of degree < 2n - 1."""
    if not has_density(model):
        raise UnsupportedKernel("quadrature against beta needs a known density")
    a, b = edge_exponents(model)
    x, w = jacobi_rule(a, b, n)
    return x, w * density_smooth_part(model, x)


def classical_rule(lambda1, mu, n: int = 256) -> tuple[np.ndarray, np.ndarray]:
    lam, m = float(lambda1), float(mu)
    x, w = jacobi_rule(m - 1.0, lam - m - 1.0, n)
    logc = special.gammaln(lam) - special.gammaln(m) - special.gammaln(lam - m)
    return x, w * math.exp(logc)


def integrate_beta(model: ValidatedModel, f, n: int = 256) -> float:
    x, w = beta_rule(model, n)
    return float(np.dot(w, f(x)))


__all__ = [
    "MomentSequence",
    "beta_rule",
    "classical_moment",
    "classical_rule",
    "density",
    "density_classical",
    "density_delta",
    "density_mellin",
    "edge_exponents",
    "fit_decay_exponent",
    "has_density",
    "integrate_beta",
    "invert_mellin",
    "jacobi_rule",
    "mellin_beta",
    "mellin_inversion",
    "moment",
    "moments",
]
