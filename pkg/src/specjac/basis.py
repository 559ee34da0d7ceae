"""Polynomials in the monomial basis, classical Jacobi polynomials and the eigenpolynomials.

Coefficient tables are alternating sums whose terms grow like
``(lambda1 - 1)_{2n}``, so they are built in mpmath or exact rational
arithmetic and only rounded to floats for evaluation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bernstein import PhiFunction
from .errors import DomainError, PrecisionLoss
from .numeric import MP_DPS, log_pochhammer, mp, num, rising, sqrt

DEGREE_CAP = 30


@dataclass(frozen=True)
class PolyVec:
    """Polynomial sum_k coeffs[k] x^k with coefficients in any arithmetic."""

    coeffs: tuple

    def __post_init__(self):
        c = list(self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if not c:
            c = [0]
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def monomial(cls, n: int, mode: str = "float") -> "PolyVec":
        return cls(tuple([num(0, mode)] * n + [num(1, mode)]))

    @classmethod
    def constant(cls, value) -> "PolyVec":
        return cls((value,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k] if k < len(self.coeffs) else 0

    def _binary(self, other, sign):
        if not isinstance(other, PolyVec):
            other = PolyVec((other,))
        n = max(len(self), len(other))
        return PolyVec(tuple(self[k] + sign * other[k] for k in range(n)))

    def __add__(self, other):
        return self._binary(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, -1)

    def __neg__(self):
        return PolyVec(tuple(-c for c in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, PolyVec):
            out = [0 * self.coeffs[0]] * (len(self) + len(other) - 1)
            for i, a in enumerate(self.coeffs):
                if a == 0:
                    continue
                for j, b in enumerate(other.coeffs):
                    out[i + j] = out[i + j] + a * b
            return PolyVec(tuple(out))
        return PolyVec(tuple(c * other for c in self.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return PolyVec(tuple(c / scalar for c in self.coeffs))

    def shift(self) -> "PolyVec":
        """Multiply by x."""
        return PolyVec((0 * self.coeffs[0],) + self.coeffs)

    def derivative(self) -> "PolyVec":
        if self.degree == 0:
            return PolyVec((0 * self.coeffs[0],))
        return PolyVec(tuple(k * self.coeffs[k] for k in range(1, len(self))))

    def astype(self, mode: str) -> "PolyVec":
        return PolyVec(tuple(num(c, mode) for c in self.coeffs))

    def to_numpy(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def max_abs(self) -> float:
        return max(abs(float(c)) for c in self.coeffs)

    def __call__(self, x):
        """Horner evaluation; non-float coefficients are evaluated in mpmath."""
        if all(isinstance(c, float) for c in self.coeffs):
            x_arr = np.asarray(x, dtype=float)
            out = np.zeros_like(x_arr) + self.coeffs[-1]
            for c in reversed(self.coeffs[:-1]):
                out = out * x_arr + c
            return float(out) if np.ndim(x) == 0 else out
        cs = [c if not isinstance(c, Fraction) else mp.mpf(c.numerator) / c.denominator for c in self.coeffs]
        cs = [mp.mpf(c) for c in cs]

        def horner(t):
            t = mp.mpf(float(t))
            acc = cs[-1]
            for c in reversed(cs[:-1]):
                acc = acc * t + c
            return float(acc)

        if np.ndim(x) == 0:
            return horner(x)
        x_arr = np.asarray(x, dtype=float)
        return np.array([horner(t) for t in x_arr.ravel()]).reshape(x_arr.shape)


def eigenvalue(lambda1, n: int, mode: str = "float"):
    """n^2 + (lambda1 - 1) n."""
    if n < 0:
        raise DomainError("eigenvalue index must be non-negative")
    return n * n + (num(lambda1, mode) - 1) * n


# ------------------------------------------------------ normalising constants


def norm_C(n: int, mu, lambda1, mode: str = "mp"):
    """C_n(mu) = (2n + lambda1 - 1) n! (lambda1)_{n-1} / ((mu)_n (lambda1 - mu)_n)."""
    if n == 0:
        return num(1, mode)
    lam, m = num(lambda1, mode), num(mu, mode)
    return (2 * n + lam - 1) * math.factorial(n) * rising(lam, n - 1) / (rising(m, n) * rising(lam - m, n))


def norm_C_tilde(n: int, delta, lambda1, mode: str = "mp"):
    """n! (2n + lambda1) (lambda1 + 1)_n / ((delta + 3)_n (lambda1 - delta - 2)_n), as printed for the power-law family."""
    lam, d = num(lambda1, mode), num(delta, mode)
    return math.factorial(n) * (2 * n + lam) * rising(lam + 1, n) / (rising(d + 3, n) * rising(lam - d - 2, n))


def norm_c_sq(s, n: int, lambda1, mode: str = "float"):
    """c_n(s)^2 = (s)_n (lambda1 - 1)_n / (n! (lambda1 - s)_n)."""
    if mode == "float":
        lam, s = float(lambda1), float(s)
        return math.exp(
            log_pochhammer(s, n) + log_pochhammer(lam - 1, n) - math.lgamma(n + 1) - log_pochhammer(lam - s, n)
        )
    lam, s = num(lambda1, mode), num(s, mode)
    return rising(s, n) * rising(lam - 1, n) / (math.factorial(n) * rising(lam - s, n))


def norm_c_n(s, n: int, lambda1, mode: str = "float"):
    """c_n(s); equals 1 for s = 1 and grows like n^(s-1)."""
    if not float(lambda1) > float(s) > 0:
        raise DomainError(f"c_n(s) needs lambda1 > s > 0 (s={s}, lambda1={lambda1})")
    return sqrt(norm_c_sq(s, n, lambda1, mode), mode)


def norm_c_n_asymptotic(s, n: int, lambda1) -> float:
    lam, s = float(lambda1), float(s)
    return n ** (s - 1) * math.sqrt(math.gamma(lam - s) / (math.gamma(s) * math.gamma(lam - 1)))


# -------------------------------------------------------------- polynomials


def _check_precision(poly: PolyVec, mode: str, what: str) -> None:
    total = sum(poly.coeffs)
    biggest = poly.max_abs()
    if biggest == 0:
        return
    ratio = biggest / max(abs(float(total)), 1e-300)
    digits = 15 if mode == "float" else (MP_DPS if mode == "mp" else math.inf)
    if ratio > 10 ** (digits - 6):
        warnings.warn(f"{what}: cancellation factor {ratio:.2e} approaches working precision", PrecisionLoss, stacklevel=3)


def _jacobi_like(n: int, lambda1, s, inv_weight, scale, mode: str) -> PolyVec:
    """scale * sum_k (-1)^(n+k)/(n-k)! (lambda1-1+n)_k (s)_n/(s)_k * inv_weight(k) x^k."""
    lam, s = num(lambda1, mode), num(s, mode)
    s_n = rising(s, n)
    coeffs = []
    for k in range(n + 1):
        sign = 1 if (n + k) % 2 == 0 else -1
        c = sign * rising(lam - 1 + n, k) * s_n / (rising(s, k) * math.factorial(n - k)) * inv_weight(k)
        coeffs.append(scale * c)
    return PolyVec(tuple(coeffs))


def classical_jacobi(n: int, lambda1, mu, mode: str = "mp", normalized: bool = True) -> PolyVec:
    """Jacobi polynomial of degree n, orthonormal for the beta(mu, lambda1 - mu) law."""
    if not float(lambda1) > float(mu) > 0:
        raise DomainError("classical Jacobi polynomials need lambda1 > mu > 0")
    scale = sqrt(norm_C(n, mu, lambda1, mode), mode) if normalized else num(1, mode)
    poly = _jacobi_like(n, lambda1, mu, lambda k: num(1, mode) / math.factorial(k), scale, mode)
    _check_precision(poly, mode, f"classical Jacobi polynomial of degree {n}")
    return poly


def pnphi(n: int, phi_fn: PhiFunction, mode: str = "mp", normalized: bool = True) -> PolyVec:
    """Eigenpolynomial of degree n of the generator.

    Same alternating sum as the classical polynomial with index vartheta, but
    ``1/k!`` is replaced by ``1/W(k+1)``.  With ``normalized=False`` the
    square-root normalisation is dropped, which keeps rational inputs exact.
    """
    mode = phi_fn.resolve(mode)
    lam = phi_fn.model.lambda1
    vt = phi_fn.vartheta_in(mode)
    w = phi_fn.w_table(n, mode)
    scale = sqrt(norm_C(n, vt, lam, mode), mode) if normalized else num(1, mode)
    poly = _jacobi_like(n, lam, vt, lambda k: 1 / w[k], scale, mode)
    _check_precision(poly, mode, f"eigenpolynomial of degree {n}")
    return poly


def pnphi_delta_identity(n: int, delta, lambda1, mode: str = "mp") -> PolyVec:
    """Eigenpolynomial of the power-law family rebuilt from two classical polynomials.

    P_n = n!/(d+2)_n sqrt(C_n(1)) [ P_n^{(lam, d+2)} / sqrt(C_n(d+2))
          + (x/d) (lam+n-1) P_{n-1}^{(lam+2, d+3)} / sqrt(C_{n-1}^{(lam+2)}(d+3)) ]
    """
    lam, d = num(lambda1, mode), num(delta, mode)
    first = classical_jacobi(n, lam, d + 2, mode) / sqrt(norm_C(n, d + 2, lam, mode), mode)
    total = first
    if n >= 1:
        second = classical_jacobi(n - 1, lam + 2, d + 3, mode)
        second = second * ((lam + n - 1) / (d * sqrt(norm_C(n - 1, d + 3, lam + 2, mode), mode)))
        total = first + second.shift()
    factor = math.factorial(n) / rising(d + 2, n) * sqrt(norm_C(n, 1, lam, mode), mode)
    return total * factor


# ------------------------------------------------------------- generators


def apply_generator(phi_fn: PhiFunction, p: PolyVec, mode: str = "auto") -> PolyVec:
    """Image of p under the generator: x^n -> psi(n) x^(n-1) - lambda_n x^n."""
    mode = phi_fn.resolve(mode)
    lam = phi_fn.model.lambda1
    coeffs = [num(c, mode) for c in p.coeffs]
    out = [num(0, mode)] * len(coeffs)
    for k, c in enumerate(coeffs):
        if c == 0 or k == 0:
            continue
        out[k - 1] = out[k - 1] + phi_fn.psi_at(k, mode) * c
        out[k] = out[k] - eigenvalue(lam, k, mode) * c
    return PolyVec(tuple(out))


def apply_monomial_rule(p: PolyVec, lower, lambda1, mode: str) -> PolyVec:
    """x^n -> lower(n) x^(n-1) - lambda_n x^n for an arbitrary coefficient rule."""
    coeffs = [num(c, mode) for c in p.coeffs]
    out = [num(0, mode)] * len(coeffs)
    for k, c in enumerate(coeffs):
        if c == 0 or k == 0:
            continue
        out[k - 1] = out[k - 1] + lower(k) * c
        out[k] = out[k] - eigenvalue(lambda1, k, mode) * c
    return PolyVec(tuple(out))


def apply_classical_generator(lambda1, mu, p: PolyVec, mode: str = "mp") -> PolyVec:
    """Classical Jacobi generator x(1-x)f'' - (lambda1 x - mu) f' on the monomial basis."""
    m = num(mu, mode)
    return apply_monomial_rule(p, lambda k: k * (k - 1 + m), lambda1, mode)


def apply_generator_direct(phi_fn: PhiFunction, p: PolyVec) -> PolyVec:
    """Generator applied from its defining formula rather than the monomial rule.

    x(1-x) f'' - (lambda1 x - mu) f' minus the product convolution of h with f',
    which maps x^k to ``int_1^inf h(r) r^(-k-1) dr x^k``.
    Only used as an independent check of :func:`apply_generator` in floats.
    """
    model = phi_fn.model
    lam, mu = float(model.lambda1), float(model.mu)
    f1 = p.astype("float").derivative()
    f2 = f1.derivative()
    x = PolyVec((0.0, 1.0))
    out = x * (PolyVec((1.0, -1.0))) * f2 - PolyVec((-mu, lam)) * f1
    jump = []
    for k, c in enumerate(f1.coeffs):
        # int_1^inf h(r) (x/r)^k dr/r = x^k (hbar - I(k+1)), I(u) = int (1 - r^-u) h
        jump.append(c * (model.hbar - float(model.kernel.h_integral(k + 1, "float"))))
    return out - PolyVec(tuple(jump))
