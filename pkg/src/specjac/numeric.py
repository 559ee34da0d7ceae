"""Arithmetic modes and small special-function helpers.

Three arithmetics are used throughout the package:

* ``"float"``: IEEE doubles, for evaluation on grids.
* ``"mp"``: mpmath floats at :data:`MP_DPS` decimal digits, for coefficient
  tables of alternating sums.
* ``"exact"``: :class:`fractions.Fraction`, available whenever every input is
  rational.

Algebraic routines are written once against the ordinary arithmetic operators
and are fed numbers of the requested kind through :func:`num`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

import mpmath
import numpy as np
from scipy import special

from .errors import PoleError

MP_DPS = 40

# Private context so the package never changes mpmath's global precision.
mp = mpmath.MPContext()
mp.dps = MP_DPS

MODES = ("float", "mp", "exact")


def exact(x) -> Fraction:
    """Rational value of ``x``; floats are read through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} has no rational form")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot represent {type(x).__name__} exactly")


def is_exact(x) -> bool:
    try:
        exact(x)
    except (TypeError, ValueError):
        return False
    return True


def num(x, mode: str):
    """Convert ``x`` to the number type used by ``mode``."""
    if mode == "float":
        return float(x)
    if mode == "exact":
        return exact(x)
    if mode == "mp":
        if isinstance(x, Fraction):
            return mp.mpf(x.numerator) / x.denominator
        if isinstance(x, float):
            return mp.mpf(repr(x))
        if isinstance(x, mpmath.mpf):
            return mp.mpf(x)
        return mp.mpf(x)
    raise ValueError(f"unknown arithmetic mode {mode!r}")


def sqrt(x, mode: str):
    """Square root; exact inputs are promoted to ``mp`` unless a perfect square."""
    if mode == "float":
        return math.sqrt(x)
    if mode == "exact":
        root = exact_sqrt(x)
        if root is None:
            return mp.sqrt(num(x, "mp"))
        return root
    return mp.sqrt(x)


def exact_sqrt(q: Fraction) -> Fraction | None:
    """Square root of a non-negative rational when it is rational, else None."""
    q = Fraction(q)
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def rising(a, n: int):
    """(a)_n for integer n >= 0 as a plain product, exact in any arithmetic."""
    if n < 0:
        raise ValueError("rising factorial needs n >= 0")
    out = a * 0 + 1
    for k in range(n):
        out = out * (a + k)
    return out


def _is_pole(v: float) -> bool:
    return v <= 0 and float(v).is_integer()


def pochhammer(a, x):
    """(a)_x = Gamma(a+x)/Gamma(a) for real ``a`` and ``x``.

    Integer ``x`` uses the product form and works in every arithmetic.
    Otherwise the value is assembled from log-gamma with the signs tracked
    separately, so large arguments do not overflow.
    """
    if isinstance(x, (int, np.integer)) or (isinstance(x, Fraction) and x.denominator == 1):
        n = int(x)
        if n >= 0:
            return rising(a, n)
        # (a)_{-n} = 1 / (a-n)_n
        den = rising(a + n, -n)
        if den == 0:
            raise PoleError(f"(a)_x has a pole at a={a}, x={x}")
        return 1 / den
    a = float(a)
    x = float(x)
    if x == 0.0:
        return 1.0
    if _is_pole(a + x):
        raise PoleError(f"Gamma pole at a+x = {a + x}")
    if _is_pole(a):
        return 0.0
    log_abs = special.gammaln(a + x) - special.gammaln(a)
    sign = special.gammasgn(a + x) * special.gammasgn(a)
    return float(sign * math.exp(log_abs))


def log_pochhammer(a, x):
    """log (a)_x for a > 0 and a + x > 0, vectorised over numpy arrays."""
    return special.gammaln(np.add(a, x)) - special.gammaln(a)


def loggamma_ratio(z, shifts_num, shifts_den):
    """log prod Gamma(z+s_i) / prod Gamma(z+t_j) for complex ``z`` (numpy arrays)."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for s in shifts_num:
        out = out + special.loggamma(z + s)
    for t in shifts_den:
        out = out - special.loggamma(z + t)
    return out


def to_float_array(values) -> np.ndarray:
    return np.array([float(v) for v in values], dtype=float)
