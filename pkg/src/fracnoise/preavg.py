"""Pre-averaging weights, windowed statistics and the variation functional."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, WindowTooLargeError
from .simulate import SampledPath, n_steps


def _tri(x):
    return 2.0 * np.minimum(x, 1.0 - x)


def _tri_deriv(x):
    return np.where(np.asarray(x) < 0.5, 2.0, -2.0)


def _tri_second(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """A weight function ``g`` on [0, 1] vanishing at both endpoints.

    ``breakpoints`` lists interior points where ``deriv`` is discontinuous or
    non-smooth; quadrature routines split there. ``piecewise_linear`` marks
    weights whose derivative is constant between breakpoints, which admits an
    exact evaluation of the limit constant. Instances hash by identity, so
    keep one instance per weight function to benefit from caching.
    """

    kind: str
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    second_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: tuple[float, ...] = field(default=())
    piecewise_linear: bool = False

    def __post_init__(self):
        if self.kind not in ("triangular", "custom"):
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")
        ends = np.asarray(self.eval(np.array([0.0, 1.0])), dtype=float)
        if np.any(np.abs(ends) > 1e-12):
            raise ConfigurationError(f"weight function must vanish at 0 and 1, got {ends.tolist()}")

    def __call__(self, x):
        return self.eval(x)


TRIANGULAR = WeightSpec("triangular", _tri, _tri_deriv, _tri_second, breakpoints=(0.5,), piecewise_linear=True)


def triangular() -> WeightSpec:
    """``g(x) = 2 min(x, 1 - x)``."""
    return TRIANGULAR


@dataclass(frozen=True)
class DiscretizedWeights:
    k: int
    g_vals: np.ndarray  # g(j/k), j = 1..k-1
    dg_vals: np.ndarray  # g(j/k) - g((j-1)/k), j = 1..k


@functools.lru_cache(maxsize=256)
def discretize_weights(g: WeightSpec, k: int) -> DiscretizedWeights:
    if k < 2:
        raise ConfigurationError(f"window size must be >= 2, got {k}")
    grid = np.arange(k + 1) / k
    full = np.asarray(g.eval(grid), dtype=float).copy()
    if abs(full[0]) > 1e-12 or abs(full[-1]) > 1e-12:
        raise ConfigurationError("weight function must vanish at 0 and 1")
    full[0] = full[-1] = 0.0
    g_vals = full[1:k]
    dg_vals = np.diff(full)
    g_vals.setflags(write=False)
    dg_vals.setflags(write=False)
    return DiscretizedWeights(int(k), g_vals, dg_vals)


@dataclass(frozen=True)
class PreAvgConfig:
    """Window tuning: ``k = round(n**kappa / theta)`` unless overridden."""

    kappa: float = 2.0 / 3.0
    theta: float = 1.0
    k_override: Optional[int] = None
    boundary_policy: str = "truncate_tail"

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise ConfigurationError(f"kappa must lie in [0, 1), got {self.kappa!r}")
        if not self.theta > 0:
            raise ConfigurationError(f"theta must be positive, got {self.theta!r}")
        if self.k_override is not None and self.k_override < 2:
            raise ConfigurationError("k_override must be >= 2")
        if self.boundary_policy != "truncate_tail":
            raise ConfigurationError("only the truncate_tail boundary policy is supported")


def window_size(n: int, cfg: PreAvgConfig) -> int:
    if cfg.k_override is not None:
        return int(cfg.k_override)
    # round() ties to even
    return max(2, int(round(n**cfg.kappa / cfg.theta)))


def preavg_stats(increments, i: int, w: DiscretizedWeights) -> tuple[float, float]:
    """Pre-averaged increment and its quadratic correction at 1-based start ``i``."""
    incr = np.asarray(increments, dtype=float)
    k = w.k
    if i < 1 or i + k - 1 > incr.size:
        raise IndexError(f"window [{i}, {i + k - 1}] exceeds {incr.size} increments")
    seg = incr[i - 1 : i - 1 + k]
    bar = float(np.dot(w.g_vals, seg[: k - 1]))
    hat = float(np.dot(w.dg_vals**2, seg**2))
    return bar, hat


def window_count(n_increments: int, k: int) -> int:
    """Number of full windows of ``k`` increments (truncate_tail policy)."""
    return n_increments - k + 1


def preavg_series(increments, w: DiscretizedWeights, count: Optional[int] = None):
    """All windowed statistics ``(bar_i, hat_i)`` for ``i = 1..count`` as arrays.

    ``count`` defaults to the number of full windows.
    """
    incr = np.asarray(increments, dtype=float)
    full = window_count(incr.size, w.k)
    if full < 1:
        raise WindowTooLargeError(f"window size {w.k} needs at least {w.k} increments, got {incr.size}")
    count = full if count is None else min(count, full)
    bar = np.correlate(incr[: count + w.k - 2], w.g_vals, mode="valid")
    hat = np.correlate(incr[: count + w.k - 1] ** 2, w.dg_vals**2, mode="valid")
    return bar, hat


def variation_functional(
    path: SampledPath,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    h: float,
    cfg: PreAvgConfig,
    t_end: float,
    g: WeightSpec = TRIANGULAR,
) -> float:
    """Normalized sum of ``f`` over scaled pre-averaged statistics.

    Windows start at ``i = 1..floor(n*t_end)`` but only full windows are kept;
    the ``1/n`` normalization is not adjusted for the truncated tail.
    """
    n = path.n
    incr = path.increments()
    k = window_size(n, cfg)
    if k >= incr.size:
        raise WindowTooLargeError(f"window size {k} too large for {incr.size} increments")
    w = discretize_weights(g, k)
    i_max = min(n_steps(n, t_end), window_count(incr.size, k))
    bar, hat = preavg_series(incr, w, i_max)
    scale = (k / n) ** h
    return float(np.sum(f(bar / scale, hat / scale**2)) / n)


def sq_preavg_sum(
    path: SampledPath,
    step_multiplier: int,
    k: int,
    g: WeightSpec = TRIANGULAR,
    max_terms: Optional[int] = None,
) -> float:
    """Sum of squared pre-averaged increments of the path subsampled every
    ``step_multiplier`` points (phase 0), over full windows of size ``k``."""
    if step_multiplier < 1:
        raise ConfigurationError("step_multiplier must be >= 1")
    values = path.values[::step_multiplier]
    incr = np.diff(values)
    if window_count(incr.size, k) < 1:
        raise WindowTooLargeError(
            f"window size {k} too large for {incr.size} increments at step {step_multiplier}"
        )
    bar, _ = preavg_series(incr, discretize_weights(g, k), max_terms)
    return float(np.dot(bar, bar))
