"""Sample paths of a fractional signal observed under additive noise.

The observation model is ``Y_t = x0 + a*t + X_t + rho_t * Z_t`` where ``X`` is
either a stationary-increment fractional Brownian motion scaled by a constant
volatility, or a Riemann-Liouville process driven by a piecewise-constant
volatility schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma as gamma_fn

from .errors import ConfigurationError, NumericalError

NOISE_DISTRIBUTIONS = ("gaussian", "rademacher", "uniform_centered")
KERNELS = ("stationary_fbm", "riemann_liouville")

# role tags for independent RNG substreams
SIGNAL_STREAM = 0
NOISE_STREAM = 1

Schedule = Union[float, Sequence[tuple[float, float]]]


class Hurst(float):
    """A float restricted to the open interval (0, 1)."""

    def __new__(cls, value):
        v = float(value)
        if not (0.0 < v < 1.0):
            raise ConfigurationError(f"Hurst parameter must lie in (0, 1), got {v!r}")
        return super().__new__(cls, v)


def n_steps(n: int, t_end: float) -> int:
    """``floor(n * t_end)`` with a guard against floating-point undershoot."""
    return int(math.floor(n * t_end + 1e-9))


@dataclass(frozen=True)
class SampledPath:
    """Equally spaced observations at times ``0, dt, 2*dt, ...``."""

    dt: float
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ConfigurationError("a sampled path needs at least 2 values")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        """Observations per unit time."""
        return int(round(1.0 / self.dt))

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class SimConfig:
    h: float
    n: int
    t_end: float = 1.0
    sigma: Schedule = 1.0
    rho: Schedule = 0.0
    noise_dist: str = "gaussian"
    x0: float = 0.0
    drift: float = 0.0
    kernel: str = "stationary_fbm"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "h", Hurst(self.h))
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"n must be an integer >= 2, got {self.n!r}")
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end!r}")
        if self.noise_dist not in NOISE_DISTRIBUTIONS:
            raise ConfigurationError(f"unknown noise distribution {self.noise_dist!r}")
        if self.kernel not in KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        for name in ("sigma", "rho"):
            _check_schedule(getattr(self, name), name)

    @property
    def steps(self) -> int:
        return n_steps(self.n, self.t_end)


def _check_schedule(sched: Schedule, name: str) -> None:
    if np.isscalar(sched):
        if sched < 0:
            raise ConfigurationError(f"{name} must be >= 0")
        return
    pairs = list(sched)
    if not pairs:
        raise ConfigurationError(f"{name} schedule is empty")
    times = [float(t) for t, _ in pairs]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigurationError(f"{name} schedule times must be strictly increasing")
    if times[0] > 0:
        raise ConfigurationError(f"{name} schedule does not cover t=0")
    if any(v < 0 for _, v in pairs):
        raise ConfigurationError(f"{name} schedule values must be >= 0")


def is_constant(sched: Schedule) -> bool:
    if np.isscalar(sched):
        return True
    return len({float(v) for _, v in sched}) == 1


def evaluate_schedule(sched: Schedule, t: np.ndarray) -> np.ndarray:
    """Evaluate a constant or piecewise-constant (right-continuous) schedule."""
    t = np.asarray(t, dtype=float)
    if np.isscalar(sched):
        return np.full(t.shape, float(sched))
    times = np.array([p[0] for p in sched], dtype=float)
    vals = np.array([p[1] for p in sched], dtype=float)
    idx = np.searchsorted(times, t, side="right") - 1
    if np.any(idx < 0):
        raise ConfigurationError("schedule does not cover the requested times")
    return vals[idx]


def substream_seed(seed: int, role: int) -> int:
    """Derive an independent 64-bit seed for a named role from a master seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(role),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def fgn_autocovariance(h: float, lags) -> np.ndarray:
    """Autocovariance of unit fractional Gaussian noise at integer lags."""
    r = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * h
    return 0.5 * ((r + 1.0) ** two_h - 2.0 * r**two_h + np.abs(r - 1.0) ** two_h)


def rl_normalizer(h: float) -> float:
    """The constant ``K_H`` of the Riemann-Liouville representation."""
    return gamma_fn(h + 0.5) / math.sqrt(gamma_fn(2.0 * h + 1.0) * math.sin(math.pi * h))


def gen_fgn(h: float, count: int, seed: int) -> np.ndarray:
    """Exact fractional Gaussian noise by circulant embedding (Davies-Harte).

    Returns ``count`` variates with covariance ``fgn_autocovariance(h, i - j)``.
    Negative embedding eigenvalues within ``1e-10`` of the largest one are
    clamped to zero; anything more negative raises :class:`NumericalError`.
    """
    h = Hurst(h)
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    rng = np.random.default_rng(int(seed))
    size = 2 * count
    gam = fgn_autocovariance(h, np.arange(count + 1))
    row = np.concatenate([gam, gam[-2:0:-1]])
    eig = np.fft.fft(row).real
    lo = eig.min()
    if lo < 0:
        if lo < -1e-10 * eig.max():
            raise NumericalError(
                f"circulant embedding not nonnegative: most negative eigenvalue {lo:.3e}"
            )
        eig = np.clip(eig, 0.0, None)
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    w = np.fft.fft(np.sqrt(eig / size) * z)
    return w.real[:count].copy()


def gen_fbm_path(h: float, n: int, t_end: float, seed: int) -> SampledPath:
    """Standard fBm on the grid ``i/n``, ``i = 0..floor(n*t_end)``."""
    h = Hurst(h)
    steps = n_steps(n, t_end)
    if steps < 1:
        raise ConfigurationError("n * t_end must be >= 1")
    incr = gen_fgn(h, steps, seed) * float(n) ** (-h)
    values = np.concatenate([[0.0], np.cumsum(incr)])
    return SampledPath(1.0 / n, values, label=f"fbm(H={float(h):g})")


def rl_weights(h: float, count: int, dt: float) -> np.ndarray:
    """Per-cell kernel weights with the exact L2 mass of ``(t-s)^(H-1/2)``.

    ``w[m]**2 * dt`` equals the integral of ``s^(2H-1)`` over ``[m*dt, (m+1)*dt]``.
    """
    m = np.arange(count, dtype=float)
    two_h = 2.0 * h
    mass = ((m + 1.0) ** two_h - m**two_h) / two_h
    return dt ** (h - 0.5) * np.sqrt(mass)


def gen_rl_path(config: SimConfig) -> SampledPath:
    """Riemann-Liouville signal ``K_H^-1 int_0^t (t-s)^(H-1/2) sigma_s dB_s``.

    Uses left-point volatility per cell and the FFT for the discrete
    convolution. The drift, level and noise of ``config`` are ignored here.
    """
    h = float(config.h)
    steps = config.steps
    if steps < 1:
        raise ConfigurationError("n * t_end must be >= 1")
    dt = 1.0 / config.n
    rng = np.random.default_rng(substream_seed(config.seed, SIGNAL_STREAM))
    db = rng.standard_normal(steps) * math.sqrt(dt)
    left = np.arange(steps) * dt
    sig = evaluate_schedule(config.sigma, left)
    driven = sig * db
    w = rl_weights(h, steps, dt)
    conv = fftconvolve(driven, w)[:steps] if steps > 1 else driven * w[0]
    values = np.concatenate([[0.0], conv / rl_normalizer(h)])
    return SampledPath(dt, values, label=f"rl(H={h:g})")


def gen_noise(dist: str, count: int, seed: int) -> np.ndarray:
    """Unit-variance centered white noise."""
    rng = np.random.default_rng(int(seed))
    if dist == "gaussian":
        return rng.standard_normal(count)
    if dist == "rademacher":
        return rng.integers(0, 2, size=count) * 2.0 - 1.0
    if dist == "uniform_centered":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=count)
    raise ConfigurationError(f"unknown noise distribution {dist!r}")


def synthesize_observations(config: SimConfig) -> SampledPath:
    """Noisy observations ``Y_{i/n}`` for ``i = 0..floor(n*t_end)``."""
    steps = config.steps
    if steps < 1:
        raise ConfigurationError("n * t_end must be >= 1")
    t = np.arange(steps + 1) / config.n
    if config.kernel == "stationary_fbm":
        if not is_constant(config.sigma):
            raise ConfigurationError("kernel=stationary_fbm requires a constant sigma")
        sigma = float(evaluate_schedule(config.sigma, [0.0])[0])
        signal = sigma * gen_fbm_path(
            config.h, config.n, config.t_end, substream_seed(config.seed, SIGNAL_STREAM)
        ).values
    else:
        signal = gen_rl_path(config).values
    rho = evaluate_schedule(config.rho, t)
    noise = gen_noise(config.noise_dist, steps + 1, substream_seed(config.seed, NOISE_STREAM))
    values = config.x0 + config.drift * t + signal + rho * noise
    return SampledPath(1.0 / config.n, values, label=f"{config.kernel}(H={float(config.h):g})")
