"""Operator parameters and jump kernels.

A model is the triple ``(lambda1, mu, kernel)`` where the kernel ``h`` lives on
``(1, inf)``.  The jump part only enters through a few functionals of ``h``:
its mass ``hbar``, the tail function ``pi_tail(y) = e^y h(e^y)`` of the jump
measure in log-scale, and ``int (1 - r^-u) h(r) dr``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import AssumptionViolation, ConfigError, DomainError, KernelNotRadon
from .numeric import exact, is_exact, num


# --------------------------------------------------------------------- kernels


@dataclass(frozen=True)
class JumpLaw:
    """Piecewise exponential description of ``pi_tail`` used by the simulator.

    On ``[starts[i], starts[i+1])`` the tail equals
    ``levels[i] * exp(rates[i] * (y - starts[i]))``; past the last start it
    keeps the last piece (which must then have a negative rate or zero level).
    """

    starts: np.ndarray
    levels: np.ndarray
    rates: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.levels[0]) if len(self.levels) else 0.0


@dataclass(frozen=True)
class ZeroKernel:
    """h identically zero: the classical Jacobi operator."""

    name = "zero"
    is_zero = True
    exact_capable = True

    def h(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def hbar(self, mode: str = "float"):
        return num(0, mode)

    def pi_total_mass(self) -> float:
        return 0.0

    def pi_tail(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def h_integral(self, u, mode: str = "float"):
        return num(0, mode) if np.ndim(u) == 0 else np.zeros_like(np.asarray(u, dtype=float))

    def induced(self) -> "ZeroKernel":
        return self

    def jump_law(self) -> JumpLaw:
        return JumpLaw(np.zeros(0), np.zeros(0), np.zeros(0))

    def check(self) -> None:
        pass


@dataclass(frozen=True)
class PowerLawKernel:
    """h(r) = r^(-delta-1), so that pi_tail(y) = exp(-delta*y) and hbar = 1/delta."""

    delta: float | Fraction
    name = "power"
    is_zero = False

    @property
    def exact_capable(self) -> bool:
        return is_exact(self.delta)

    def h(self, r):
        return np.asarray(r, dtype=float) ** (-float(self.delta) - 1.0)

    def hbar(self, mode: str = "float"):
        return 1 / num(self.delta, mode)

    def pi_total_mass(self) -> float:
        return 1.0

    def pi_tail(self, y):
        return np.exp(-float(self.delta) * np.asarray(y, dtype=float))

    def h_integral(self, u, mode: str = "float"):
        if np.ndim(u) > 0:
            d = float(self.delta)
            u = np.asarray(u, dtype=float)
            return u / (d * (u + d))
        d = num(self.delta, mode)
        u = num(u, mode)
        # 1/d - 1/(u+d), written without cancellation
        return u / (d * (u + d))

    def induced(self) -> "PowerLawKernel":
        return PowerLawKernel(self.delta + 1)

    def jump_law(self) -> JumpLaw:
        return JumpLaw(np.zeros(1), np.ones(1), np.array([-float(self.delta)]))

    def check(self) -> None:
        d = float(self.delta)
        if not math.isfinite(d) or d < 1:
            raise ConfigError(f"power-law kernel needs delta >= 1, got {self.delta}")


def _expm1_ratio(p: float, length: float) -> float:
    """(exp(p*L) - 1)/p with the p -> 0 limit, and L = inf allowed for p < 0."""
    if math.isinf(length):
        if p >= 0:
            return math.inf
        return -1.0 / p
    x = p * length
    if abs(x) < 1e-300:
        return length
    return math.expm1(x) / p


@dataclass(frozen=True)
class _Segment:
    # h(r) = c * (r/a)^s on [a, b)
    a: float
    b: float
    c: float
    s: float


@dataclass(frozen=True)
class TabulatedKernel:
    """Kernel given on a grid of nodes ``r_i > 1``.

    Between nodes ``log h`` is linear in ``log r`` (each piece is a power law).
    Below the first node the first piece is extended down to ``r = 1``; beyond
    the last node ``h`` decays like ``r^(-1-tail_exponent)``.  A segment
    touching a zero value is identically zero.
    """

    nodes: tuple[float, ...]
    values: tuple[float, ...]
    tail_exponent: float
    name = "tabulated"
    exact_capable = False
    _segments: tuple[_Segment, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(float(r) for r in self.nodes))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "tail_exponent", float(self.tail_exponent))
        self.check()
        object.__setattr__(self, "_segments", self._build_segments())

    @classmethod
    def from_csv(cls, path: str | Path, tail_exponent: float) -> "TabulatedKernel":
        nodes, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    r, h = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if nodes:
                        raise ConfigError(f"malformed row {row!r} in {path}") from None
                    continue  # header line
                nodes.append(r)
                values.append(h)
        if not nodes:
            raise ConfigError(f"no kernel rows found in {path}")
        return cls(tuple(nodes), tuple(values), tail_exponent)

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def check(self) -> None:
        r = np.asarray(self.nodes)
        v = np.asarray(self.values)
        if r.ndim != 1 or r.shape != v.shape or r.size == 0:
            raise ConfigError("tabulated kernel needs matching, non-empty node and value lists")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ConfigError("tabulated kernel contains non-finite entries")
        if np.any(r <= 1.0):
            raise ConfigError("tabulated kernel nodes must lie strictly above 1")
        if np.any(np.diff(r) <= 0):
            raise ConfigError("tabulated kernel nodes must be strictly increasing")
        if np.any(v < 0):
            raise KernelNotRadon("tabulated kernel has negative values")
        if not (self.tail_exponent > 0 and math.isfinite(self.tail_exponent)):
            raise KernelNotRadon("tail exponent must be positive for h to be integrable")
        rh = r * v
        bad = np.nonzero(np.diff(rh) > 1e-15 * np.maximum(rh[:-1], 1.0))[0]
        if bad.size:
            i = int(bad[0])
            raise KernelNotRadon(
                f"r*h(r) increases between r={r[i]} and r={r[i + 1]}; the jump measure would be negative"
            )

    def _build_segments(self) -> tuple[_Segment, ...]:
        r, v = self.nodes, self.values
        tail_s = -1.0 - self.tail_exponent
        segs = []
        if len(r) > 1 and v[0] > 0 and v[1] > 0:
            head_s = math.log(v[1] / v[0]) / math.log(r[1] / r[0])
        else:
            head_s = tail_s
        segs.append(_Segment(1.0, r[0], v[0] * r[0] ** (-head_s), head_s))
        for i in range(len(r) - 1):
            if v[i] > 0 and v[i + 1] > 0:
                s = math.log(v[i + 1] / v[i]) / math.log(r[i + 1] / r[i])
                segs.append(_Segment(r[i], r[i + 1], v[i], s))
            else:
                segs.append(_Segment(r[i], r[i + 1], 0.0, 0.0))
        segs.append(_Segment(r[-1], math.inf, v[-1], tail_s))
        return tuple(segs)

    def h(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for seg in self._segments:
            mask = (r > seg.a) & (r <= seg.b)
            if seg.c > 0:
                out = np.where(mask, seg.c * (r / seg.a) ** seg.s, out)
        return out

    def hbar(self, mode: str = "float"):
        total = math.fsum(
            seg.c * seg.a * _expm1_ratio(seg.s + 1.0, math.log(seg.b / seg.a))
            for seg in self._segments
            if seg.c > 0
        )
        return num(total, mode)

    def pi_total_mass(self) -> float:
        return float(self._segments[0].c)

    def pi_tail(self, y):
        y = np.asarray(y, dtype=float)
        r = np.exp(y)
        return r * self.h(r)

    def _h_integral_scalar(self, u: float) -> float:
        if u == 0:
            return 0.0
        terms = []
        for seg in self._segments:
            if seg.c == 0:
                continue
            length = math.log(seg.b / seg.a)
            full = _expm1_ratio(seg.s + 1.0, length)
            damped = seg.a ** (-u) * _expm1_ratio(seg.s + 1.0 - u, length)
            terms.append(seg.c * seg.a * (full - damped))
        return math.fsum(terms)

    def h_integral(self, u, mode: str = "float"):
        if np.ndim(u) > 0:
            return np.array([self._h_integral_scalar(float(x)) for x in np.ravel(u)]).reshape(np.shape(u))
        return num(self._h_integral_scalar(float(u)), mode)

    def induced(self) -> "TabulatedKernel":
        return TabulatedKernel(
            self.nodes,
            tuple(v / r for r, v in zip(self.nodes, self.values)),
            self.tail_exponent + 1.0,
        )

    def jump_law(self) -> JumpLaw:
        starts, levels, rates = [], [], []
        for seg in self._segments:
            starts.append(math.log(seg.a))
            levels.append(seg.c * seg.a)
            rates.append(seg.s + 1.0 if seg.c > 0 else 0.0)
        return JumpLaw(np.array(starts), np.array(levels), np.array(rates))


Kernel = ZeroKernel | PowerLawKernel | TabulatedKernel


# ----------------------------------------------------------------------- model


@dataclass(frozen=True)
class ModelSpec:
    lambda1: float | Fraction
    mu: float | Fraction
    kernel: Kernel = field(default_factory=ZeroKernel)


@dataclass(frozen=True)
class ValidatedModel:
    """A model that satisfies the standing assumptions.

    ``small_mu`` records the regime ``mu < 1 + hbar`` in which the generator's
    Laplace exponent has a positive root.
    """

    spec: ModelSpec
    hbar: float
    pi_total_mass: float
    small_mu: bool

    @property
    def lambda1(self):
        return self.spec.lambda1

    @property
    def mu(self):
        return self.spec.mu

    @property
    def kernel(self) -> Kernel:
        return self.spec.kernel

    @property
    def exact_capable(self) -> bool:
        return is_exact(self.lambda1) and is_exact(self.mu) and self.kernel.exact_capable

    def param(self, name: str, mode: str):
        return num(getattr(self.spec, name), mode)

    def hbar_in(self, mode: str):
        return self.kernel.hbar(mode)

    def pi_tail(self, y):
        return pi_tail(self, y)

    def h_integral_term(self, u, mode: str = "float"):
        return h_integral_term(self, u, mode)

    def describe(self) -> str:
        k = self.kernel
        extra = f", delta={k.delta}" if isinstance(k, PowerLawKernel) else ""
        return f"lambda={self.lambda1}, mu={self.mu}, kernel={k.name}{extra}"


def _compare_mode(spec: ModelSpec) -> str:
    exactish = is_exact(spec.lambda1) and is_exact(spec.mu) and spec.kernel.exact_capable
    return "exact" if exactish else "float"


def validate(spec: ModelSpec) -> ValidatedModel:
    """Check the standing assumptions and attach the derived jump constants."""
    for name in ("lambda1", "mu"):
        value = getattr(spec, name)
        try:
            ok = math.isfinite(float(value))
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise ConfigError(f"{name} must be a finite real, got {value!r}")
    spec.kernel.check()
    mode = _compare_mode(spec)
    lam = num(spec.lambda1, mode)
    mu = num(spec.mu, mode)
    hbar = spec.kernel.hbar(mode)

    if spec.kernel.is_zero:
        if not mu > 0:
            raise AssumptionViolation(f"need mu > 0 (mu={spec.mu})")
        if not lam > mu:
            raise AssumptionViolation(f"need lambda > mu for h = 0 (lambda={spec.lambda1}, mu={spec.mu})")
        small = mu < 1
    else:
        if not mu > hbar:
            raise AssumptionViolation(f"need mu > hbar (mu={spec.mu}, hbar={float(hbar):.17g})")
        small = mu < 1 + hbar
        floor = mu + (1 if small else 0)
        label = "1 + mu" if small else "mu"
        if not lam > floor:
            raise AssumptionViolation(
                f"need lambda > {label} (lambda={spec.lambda1}, mu={spec.mu}, hbar={float(hbar):.17g})"
            )
    return ValidatedModel(spec=spec, hbar=float(hbar), pi_total_mass=spec.kernel.pi_total_mass(), small_mu=bool(small))


def pi_tail(model: ValidatedModel, y):
    """Tail of the jump measure in log scale, ``e^y h(e^y)``, for y > 0."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0) or np.any(~np.isfinite(y_arr)):
        raise DomainError("pi_tail needs finite y > 0")
    out = model.kernel.pi_tail(y_arr)
    return float(out) if np.ndim(y) == 0 else out


def h_integral_term(model: ValidatedModel, u, mode: str = "float"):
    """int_1^inf (1 - r^-u) h(r) dr for u >= 0."""
    if np.any(np.asarray(u, dtype=float) < 0):
        raise DomainError("h_integral_term needs u >= 0")
    return model.kernel.h_integral(u, mode)


def power_model(delta, lambda1, mu=None) -> ValidatedModel:
    """Power-law model; ``mu`` defaults to ``delta + 1`` (the closed-form family)."""
    if mu is None:
        mu = delta + 1
    return validate(ModelSpec(lambda1, mu, PowerLawKernel(delta)))


def zero_model(lambda1, mu) -> ValidatedModel:
    return validate(ModelSpec(lambda1, mu, ZeroKernel()))


def is_delta_family(model: ValidatedModel) -> bool:
    k = model.kernel
    if not isinstance(k, PowerLawKernel):
        return False
    if is_exact(k.delta) and is_exact(model.mu):
        return exact(model.mu) == exact(k.delta) + 1
    return math.isclose(float(model.mu), float(k.delta) + 1.0, rel_tol=0, abs_tol=1e-14)
