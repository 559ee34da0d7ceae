"""The Laplace exponent of the generator and the Bernstein functions built from it.

For a model ``(lambda1, mu, h)`` the function

    psi(u) = u^2 + (mu - hbar - 1) u + u * int_1^inf (1 - r^-u) h(r) dr

vanishes at 0 and, when ``mu < 1 + hbar``, at a second point ``theta`` in
``(0, 1)``.  Dividing out that root gives the Bernstein function
``phi(u) = psi(u) / (u - theta)``, and its partial products
``W(n+1) = phi(1) * ... * phi(n)`` drive every moment and polynomial formula in
the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidDecayParams, RootNotBracketed
from .model import ModelSpec, PowerLawKernel, ValidatedModel, ZeroKernel, validate
from .numeric import exact, exact_sqrt, loggamma_ratio, mp, num, pochhammer  # noqa: F401

THETA_TOL = 1e-14
THETA_MAX_ITER = 200


def best_number(x):
    """Keep rationals exact and everything else as an mpmath float."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    return mp.mpf(x)


def _can_exact(*values) -> bool:
    return all(isinstance(v, (Fraction, int)) for v in values)


@dataclass(frozen=True)
class ClosedForm:
    """phi(u) = prod(u - zeros) / prod(u + poles), so W is a ratio of gamma functions."""

    zeros: tuple
    poles: tuple

    def value(self, u):
        u = np.asarray(u, dtype=float)
        out = np.ones_like(u)
        for a in self.zeros:
            out = out * (u - float(a))
        for b in self.poles:
            out = out / (u + float(b))
        return out

    def log_w(self, z):
        """log W(z) for complex z, normalised so that W(1) = 1."""
        zeros = [float(a) for a in self.zeros]
        poles = [float(b) for b in self.poles]
        top = loggamma_ratio(z, [-a for a in zeros], poles)
        base = loggamma_ratio(1.0, [-a for a in zeros], poles)
        return top - base


def _quadratic_roots(b, c):
    """Roots (small, large) of u^2 + b u + c, exact when the discriminant is a square."""
    disc = b * b - 4 * c
    if _can_exact(b, c):
        s = exact_sqrt(disc)
        if s is not None:
            return (-b - s) / 2, (-b + s) / 2
        b, c = num(b, "mp"), num(c, "mp")
        disc = b * b - 4 * c
    s = mp.sqrt(disc)
    return best_number((-b - s) / 2), best_number((-b + s) / 2)


def _le(a, b) -> bool:
    if _can_exact(a, b):
        return a <= b
    return num(a, "mp") <= num(b, "mp")


def _closed_form(model: ValidatedModel):
    """(theta, closed form, d_phi) for kernels with a gamma-ratio W, else None."""
    kernel = model.kernel
    mode = "exact" if model.exact_capable else "mp"
    mu = num(model.mu, mode)
    if isinstance(kernel, ZeroKernel) or kernel.is_zero:
        if model.small_mu:
            theta, zeros = 1 - mu, (0,)
        else:
            theta, zeros = 0, (1 - mu,)
        form = ClosedForm(tuple(best_number(a) for a in zeros), ())
    elif isinstance(kernel, PowerLawKernel):
        d = num(kernel.delta, mode)
        # psi(u) = u (u - r1)(u - r2)/(u + d) with r1 r2 = d(mu - 1) - 1
        r1, r2 = _quadratic_roots(mu - 1 + d, d * (mu - 1) - 1)
        if model.small_mu:
            theta, zeros = r2, (0, r1)
        else:
            theta, zeros = 0, (r1, r2)
        form = ClosedForm(tuple(best_number(a) for a in zeros), (best_number(d),))
    else:
        return None
    a_phi = min(form.poles) if form.poles else None
    candidates = [-a for a in form.zeros if -a >= 0 and (a_phi is None or _le(-a, a_phi))]
    if candidates:
        d_phi = min(candidates)
    else:
        d_phi = a_phi
    return best_number(theta), form, None if d_phi is None else best_number(d_phi)


def find_theta(model: ValidatedModel, tol: float = THETA_TOL) -> tuple[float, float]:
    """Positive root of psi by bisection (0 when mu >= 1 + hbar); returns (theta, vartheta).

    psi(u) = u g(u) with g increasing, so the root is bracketed by g(0) < 0 < g(1).
    """
    if not model.small_mu:
        return 0.0, 1.0
    c = float(model.mu) - model.hbar - 1.0

    def g(u):
        return u + c + float(model.kernel.h_integral(u, "float"))

    lo, hi = tol, 1.0 - tol
    if g(1.0) <= 0:
        raise RootNotBracketed(f"psi(1) = {g(1.0):.3g} <= 0; model and kernel integrals are inconsistent")
    if g(lo) >= 0:
        return lo, 1.0 - lo
    for _ in range(THETA_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol:
            break
    theta = 0.5 * (lo + hi)
    return theta, 1.0 - theta


@dataclass(frozen=True)
class PhiFunction:
    """Evaluator bundle for psi, theta, phi and the products W.

    ``theta_best`` and ``d_phi_best`` hold the most precise available values
    (a Fraction when rational, otherwise an mpmath float); ``theta``,
    ``vartheta`` and ``d_phi`` are their float views.
    """

    model: ValidatedModel
    theta_best: object
    closed_form: ClosedForm | None
    d_phi_best: object | None
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    # ----------------------------------------------------------- scalars

    @property
    def theta(self) -> float:
        return float(self.theta_best)

    @property
    def vartheta(self) -> float:
        return 1.0 - self.theta

    @property
    def d_phi(self) -> float | None:
        return None if self.d_phi_best is None else float(self.d_phi_best)

    @property
    def exact_capable(self) -> bool:
        return self.model.exact_capable and isinstance(self.theta_best, Fraction)

    def resolve(self, mode: str) -> str:
        """'auto' becomes 'exact' when every constant is rational, else 'mp'."""
        if mode == "auto":
            return "exact" if self.exact_capable else "mp"
        if mode == "exact" and not self.exact_capable:
            return "mp"
        return mode

    def theta_in(self, mode: str):
        return num(self.theta_best, self.resolve(mode))

    def vartheta_in(self, mode: str):
        return 1 - self.theta_in(mode)

    def delta_index(self) -> float:
        """Decay index of the Mellin transform of the invariant measure."""
        lam, mu, hbar = float(self.model.lambda1), float(self.model.mu), self.model.hbar
        if self.model.small_mu:
            return lam - self.vartheta - hbar
        return lam - self.vartheta - (mu - 1.0)

    # --------------------------------------------------------------- psi

    def psi(self, u):
        """psi on floats or numpy arrays."""
        u_arr = np.asarray(u, dtype=float)
        m = self.model
        val = u_arr * u_arr + (float(m.mu) - m.hbar - 1.0) * u_arr + u_arr * m.kernel.h_integral(u_arr)
        return float(val) if np.ndim(u) == 0 else val

    def psi_at(self, u, mode: str = "auto"):
        """psi at a single point in the requested arithmetic."""
        mode = self.resolve(mode)
        m = self.model
        u = num(u, mode)
        mu = m.param("mu", mode)
        return u * u + (mu - m.hbar_in(mode) - 1) * u + u * m.kernel.h_integral(u, mode)

    # --------------------------------------------------------------- phi

    def phi(self, u):
        """phi on floats or numpy arrays (u >= 0)."""
        if self.closed_form is not None:
            val = self.closed_form.value(u)
            return float(val) if np.ndim(u) == 0 else val
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        theta = self.theta
        out = np.empty_like(u_arr)
        near = np.abs(u_arr - theta) < 1e-9
        far = ~near
        out[far] = self.psi(u_arr[far]) / (u_arr[far] - theta)
        if near.any():
            out[near] = self._psi_slope_at_theta()
        return float(out[0]) if np.ndim(u) == 0 else out

    def _psi_slope_at_theta(self) -> float:
        # one-sided fourth-order difference; psi(theta) = 0 by construction
        h = 1e-3
        t = self.theta
        p = [0.0] + [self.psi(t + k * h) for k in range(1, 5)]
        return (-25 * p[0] + 48 * p[1] - 36 * p[2] + 16 * p[3] - 3 * p[4]) / (12 * h)

    def phi_at(self, u, mode: str = "auto"):
        """phi at a point u > theta in the requested arithmetic."""
        mode = self.resolve(mode)
        u = num(u, mode)
        theta = self.theta_in(mode)
        if u == theta:
            return num(self.phi(float(u)), mode)
        return self.psi_at(u, mode) / (u - theta)

    # ----------------------------------------------------------------- W

    def w_table(self, n_max: int, mode: str = "auto") -> list:
        """[W(1), ..., W(n_max + 1)] with W(n+1) = W(n) phi(n)."""
        mode = self.resolve(mode)
        key = ("w", mode)
        table = self._cache.get(key)
        if table is None:
            table = [num(1, mode)]
            self._cache[key] = table
        while len(table) < n_max + 1:
            k = len(table)
            table.append(table[-1] * self.phi_at(k, mode))
        return table[: n_max + 1]

    def w_phi(self, n: int, mode: str = "auto"):
        """W(n+1) = phi(1) ... phi(n); equals 1 for n = 0."""
        return self.w_table(n, mode)[n]

    def log_w_phi(self, n: int) -> float:
        """log W(n+1) accumulated in floats, safe far beyond overflow of W itself."""
        ks = np.arange(1, n + 1, dtype=float)
        return float(np.sum(np.log(self.phi(ks)))) if n > 0 else 0.0

    def w_complex(self, z):
        """W(z) for complex z via the gamma-ratio closed form."""
        return np.exp(self.log_w_complex(z))

    def log_w_complex(self, z):
        if self.closed_form is None:
            from .errors import UnsupportedKernel

            raise UnsupportedKernel("W off the integers needs a zero or power-law kernel")
        return self.closed_form.log_w(z)


def make_phi(model: ValidatedModel) -> PhiFunction:
    """Locate theta and build the evaluator bundle for ``model``."""
    closed = _closed_form(model)
    if closed is not None:
        theta, form, d_phi = closed
        return PhiFunction(model, theta, form, d_phi)
    theta, _ = find_theta(model)
    return PhiFunction(model, best_number(mp.mpf(theta)), None, None)


def psi(phi_fn: PhiFunction, u):
    return phi_fn.psi(u)


def phi(phi_fn: PhiFunction, u):
    return phi_fn.phi(u)


def w_phi(phi_fn: PhiFunction, n: int, mode: str = "auto"):
    return phi_fn.w_phi(n, mode)


def d_phi(phi_fn: PhiFunction) -> float | None:
    return phi_fn.d_phi


def rho(lambda1, u):
    """Inverse of n -> n^2 + (lambda1 - 1) n on u >= 0."""
    c = 0.5 * abs(float(lambda1) - 1.0)
    u = np.asarray(u, dtype=float)
    # sqrt(u + c^2) - c without cancellation for small u
    val = u / (np.sqrt(u + c * c) + c) if c > 0 else np.sqrt(u)
    return float(val) if val.ndim == 0 else val


# ------------------------------------------------------------ decay params


@dataclass(frozen=True)
class DecayParams:
    """Choice of the reference index ``m`` and the slack ``epsilon``.

    ``d_theta_eps`` is the index of the classical operator that the model
    intertwines with; ``d_one_eps`` is the index used in the norm bounds.
    """

    phi_fn: PhiFunction
    m: object
    epsilon: object | None
    d_theta_eps: object
    d_one_eps: object

    def get(self, name: str, mode: str = "auto"):
        mode = self.phi_fn.resolve(mode)
        value = getattr(self, name)
        if mode == "exact" and not isinstance(value, (Fraction, int)):
            mode = "mp"
        return num(value, mode)

    @property
    def exact_capable(self) -> bool:
        return self.phi_fn.exact_capable and all(
            isinstance(v, (Fraction, int)) for v in (self.m, self.d_theta_eps, self.d_one_eps)
        )

    def resolve(self, mode: str) -> str:
        if mode == "auto":
            return "exact" if self.exact_capable else "mp"
        if mode == "exact" and not self.exact_capable:
            return "mp"
        return mode

    @property
    def lambda1(self):
        return self.phi_fn.model.lambda1


def _as_best(x):
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, (float, str)):
        return exact(x)
    return best_number(x)


def decay_params(phi_fn: PhiFunction, m, epsilon=None) -> DecayParams:
    """Validate ``m`` and ``epsilon`` and compute the two derived indices.

    ``epsilon`` defaults to ``d_phi``; when ``d_phi`` is 0 or unknown that is
    the only admissible value.
    """
    model = phi_fn.model
    m_b = _as_best(m)
    lam = _as_best(model.lambda1)
    mu = _as_best(model.mu)
    lower = mu + (1 if model.small_mu else 0)
    if not (float(lower) < float(m_b) < float(lam)) or not (lower < m_b < lam):
        raise InvalidDecayParams(f"m must lie in ({float(lower):.17g}, {float(lam):.17g}), got {m}")
    if model.small_mu:
        d_theta = 1 - phi_fn.theta_best
        d_one = Fraction(1)
        eps = None if epsilon is None else _as_best(epsilon)
    else:
        dp = phi_fn.d_phi_best
        if dp is None:
            if epsilon is not None:
                raise InvalidDecayParams("d_phi is unknown for this kernel; only epsilon = d_phi is available")
            eps = None
            d_theta = Fraction(1)
        else:
            eps = dp if epsilon is None else _as_best(epsilon)
            if dp == 0 and eps != 0:
                raise InvalidDecayParams("d_phi = 0 forces epsilon = 0")
            if not (eps == dp or (0 < eps and _le(eps, dp))):
                raise InvalidDecayParams(f"epsilon must lie in (0, d_phi] with d_phi = {float(dp):.17g}")
            d_theta = dp + 1 - eps
        d_one = d_theta
    if _le(m_b, d_theta):
        raise InvalidDecayParams(f"m = {float(m_b)} must exceed d = {float(d_theta)}")
    return DecayParams(phi_fn, m_b, eps, best_number(d_theta), best_number(d_one))


# ---------------------------------------------------------- derived phis


@dataclass(frozen=True)
class DerivedBernstein:
    """A Bernstein function derived from phi, evaluable in any arithmetic."""

    name: str
    phi_fn: PhiFunction
    params: DecayParams | None
    induced_model: ValidatedModel | None = None

    def at(self, u, mode: str = "auto"):
        mode = self.phi_fn.resolve(mode)
        if self.params is not None and mode == "exact" and not self.params.exact_capable:
            mode = "mp"
        u = num(u, mode)
        if self.name == "phi_d1_eps":
            d1 = self.params.get("d_one_eps", mode)
            return u / (u + d1 - 1) * self.phi_fn.phi_at(u, mode)
        if self.name == "phi_star_m":
            m = self.params.get("m", mode)
            return self.phi_fn.phi_at(u, mode) / (u + m - 1)
        vt = self.phi_fn.vartheta_in(mode)
        return (u + vt) / (u + 1) * self.phi_fn.phi_at(u + 1, mode)

    def __call__(self, u):
        if np.ndim(u) == 0:
            return float(self.at(float(u), "float"))
        return np.array([float(self.at(float(x), "float")) for x in np.ravel(u)]).reshape(np.shape(u))


DERIVED_KINDS = ("phi_d1_eps", "phi_star_m", "varphi")


def derived_bernstein(phi_fn: PhiFunction, which: str, params: DecayParams | None = None) -> DerivedBernstein:
    """Return one of the auxiliary Bernstein functions.

    ``varphi`` also carries the model it is the Laplace exponent of: same
    lambda, ``mu + 1``, and kernel ``h(r)/r``.
    """
    if which not in DERIVED_KINDS:
        raise InvalidDecayParams(f"unknown derived Bernstein function {which!r}")
    if which == "varphi":
        model = phi_fn.model
        induced = validate(ModelSpec(model.lambda1, model.mu + 1, model.kernel.induced()))
        return DerivedBernstein(which, phi_fn, params, induced)
    if params is None or params.phi_fn is not phi_fn:
        raise InvalidDecayParams(f"{which} needs decay parameters built from this model")
    return DerivedBernstein(which, phi_fn, params)
