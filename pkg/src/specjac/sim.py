"""Monte Carlo simulation of the jump-diffusion on [0, 1].

Each step first runs the jump clock over dt: jumps arrive at rate
total/x, so several may land in one step, and a cascade that drives x below
``x_floor`` is taken to reach 0 (the waiting times form a convergent series).
The diffusion part then takes an Euler-Maruyama step, reflected at both ends.

Normals come from numpy's counter-based Philox generator keyed by
(seed, block index).  Jump times and sizes use a splitmix64 stream per path,
seeded from the same generator.  Blocks have a fixed number of paths, so
results do not depend on how many threads run the kernel.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .basis import PolyVec
from .errors import DomainError
from .model import ValidatedModel

# the TBB layer shipped here is too old and only produces a warning
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

BLOCK_PATHS = 4096
BLOCK_STEPS = 256
MAX_MOMENT = 4


def configure_threads() -> None:
    """Honour SPECJAC_THREADS as a cap on numba worker threads."""
    value = os.environ.get("SPECJAC_THREADS")
    if value:
        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    T: float = 20.0
    n_paths: int = 100_000
    seed: int = 0
    x0: float = 0.5
    x_floor: float = 1e-4
    burn_in: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.T >= 0:
            raise DomainError("T must be non-negative")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if not 0 <= self.x0 <= 1:
            raise DomainError("x0 must lie in [0, 1]")
        if not self.x_floor > 0:
            raise DomainError("x_floor must be positive")
        if not 0 <= self.burn_in < 1:
            raise DomainError("burn_in is a fraction of T in [0, 1)")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class PathStats:
    """Moment estimates for k = 1..k_max with standard errors across paths."""

    terminal: np.ndarray
    terminal_se: np.ndarray
    time_avg: np.ndarray
    time_avg_se: np.ndarray
    terminal_values: np.ndarray
    n_paths: int


# --------------------------------------------------------------- kernels


@njit(cache=True, inline="always")
def _reflect(x):
    # fold overshoots back into [0, 1]; a second fold covers huge steps
    for _ in range(2):
        if x < 0.0:
            x = -x
        elif x > 1.0:
            x = 2.0 - x
    return min(max(x, 0.0), 1.0)


@njit(cache=True, inline="always")
def _jump_size(v, starts, levels, rates):
    """Inverse of the normalised tail: y with tail(y) = v tail(0)."""
    target = v * levels[0]
    n = starts.shape[0]
    for i in range(n):
        nxt = levels[i + 1] if i + 1 < n else 0.0
        if target > nxt or i == n - 1:
            if rates[i] == 0.0 or levels[i] <= 0.0:
                return starts[i]
            return starts[i] + math.log(target / levels[i]) / rates[i]
    return starts[n - 1]


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _uniform(state, i):
    # splitmix64, mapped to (0, 1]
    s = state[i] + _GOLDEN
    state[i] = s
    z = (s ^ (s >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (float(z >> np.uint64(11)) + 1.0) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _jumps(x, dt, total, x_floor, state, i, starts, levels, rates):
    left = dt
    while x > 0.0:
        if x < x_floor:
            return 0.0
        wait = -math.log(_uniform(state, i)) * x / total
        if wait >= left:
            break
        left -= wait
        x *= math.exp(-_jump_size(_uniform(state, i), starts, levels, rates))
    return x


@njit(cache=True, parallel=True)
def _advance(x, acc, normals, state, lam, mu, dt, total, x_floor, starts, levels, rates,
             first_step, accumulate_from):
    n_paths, n_steps = normals.shape
    sqrt_dt = math.sqrt(dt)
    for i in prange(n_paths):
        xi = x[i]
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        s4 = 0.0
        for s in range(n_steps):
            if total > 0.0:
                xi = _jumps(xi, dt, total, x_floor, state, i, starts, levels, rates)
            var = max(2.0 * xi * (1.0 - xi), 0.0)
            xi = _reflect(xi + (mu - lam * xi) * dt + math.sqrt(var) * sqrt_dt * normals[i, s])
            if first_step + s >= accumulate_from:
                x2 = xi * xi
                s1 += xi
                s2 += x2
                s3 += x2 * xi
                s4 += x2 * x2
        x[i] = xi
        acc[i, 0] += s1
        acc[i, 1] += s2
        acc[i, 2] += s3
        acc[i, 3] += s4


def _jump_state(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.integers(0, 2**64, size=size, dtype=np.uint64, endpoint=False)


def step(x, dt: float, rng: np.random.Generator, model: ValidatedModel, x_floor: float = 1e-4) -> np.ndarray:
    """One step for an array of states, drawing from ``rng``."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    law = model.kernel.jump_law()
    total = law.total_mass if law.total_mass > 0 else 0.0
    acc = np.zeros((x.size, MAX_MOMENT))
    z = rng.standard_normal((x.size, 1))
    _advance(x, acc, z, _jump_state(rng, x.size), float(model.lambda1), float(model.mu), dt, total,
             x_floor, *_law_arrays(law), 0, 1)
    return x


def _law_arrays(law):
    if len(law.starts) == 0:
        return np.zeros(1), np.zeros(1), np.zeros(1)
    return (np.ascontiguousarray(law.starts, dtype=float), np.ascontiguousarray(law.levels, dtype=float),
            np.ascontiguousarray(law.rates, dtype=float))


def _generator(seed: int, block: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate(config: SimConfig, model: ValidatedModel, k_max: int = 4, horizon: float | None = None):
    """Run all paths to ``horizon`` (default T); return terminal states and time averages of x^k."""
    if not 1 <= k_max <= MAX_MOMENT:
        raise DomainError(f"moments are tracked up to order {MAX_MOMENT}")
    configure_threads()
    T = config.T if horizon is None else horizon
    n_steps = int(round(T / config.dt))
    accumulate_from = int(math.floor(config.burn_in * n_steps))
    law = model.kernel.jump_law()
    total = law.total_mass if law.total_mass > 0 else 0.0
    starts, levels, rates = _law_arrays(law)
    lam, mu = float(model.lambda1), float(model.mu)
    terminal = np.empty(config.n_paths)
    sums = np.empty((config.n_paths, MAX_MOMENT))
    for block, start in enumerate(range(0, config.n_paths, BLOCK_PATHS)):
        size = min(BLOCK_PATHS, config.n_paths - start)
        rng = _generator(config.seed, block)
        state = _jump_state(rng, BLOCK_PATHS)[:size].copy()
        x = np.full(size, float(config.x0))
        acc = np.zeros((size, MAX_MOMENT))
        for s0 in range(0, n_steps, BLOCK_STEPS):
            width = min(BLOCK_STEPS, n_steps - s0)
            z = np.ascontiguousarray(rng.standard_normal((BLOCK_PATHS, width))[:size])
            _advance(x, acc, z, state, lam, mu, config.dt, total, config.x_floor, starts, levels, rates,
                     s0, accumulate_from)
        terminal[start:start + size] = x
        sums[start:start + size] = acc
    counted = max(n_steps - accumulate_from, 1)
    return terminal, sums[:, :k_max] / counted


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def ergodic_moments(config: SimConfig, model: ValidatedModel, k_max: int = 4) -> PathStats:
    """Terminal and time-averaged estimates of E[X^k] under the invariant law."""
    terminal, time_avg = simulate(config, model, k_max)
    powers = terminal[:, None] ** np.arange(1, k_max + 1)
    t_mean, t_se = _mean_se(powers)
    a_mean, a_se = _mean_se(time_avg)
    return PathStats(t_mean, t_se, a_mean, a_se, terminal, config.n_paths)


def transient_expectation(config: SimConfig, model: ValidatedModel, f: PolyVec, t: float) -> tuple[float, float]:
    """Monte Carlo E_{x0}[f(X_t)] with its standard error."""
    if t < 0:
        raise DomainError("t must be non-negative")
    terminal, _ = simulate(config, model, 1, horizon=t)
    values = np.asarray(f.astype("float")(terminal), dtype=float)
    mean, se = _mean_se(values[:, None])
    return float(mean[0]), float(se[0])
