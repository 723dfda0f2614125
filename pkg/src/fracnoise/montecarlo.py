"""Replicated simulate-then-estimate experiments with bias/SE/RMSE summaries.

Replication ``i`` of a scenario is seeded with ``derive_seed(base_seed, i)``,
the ``i``-th output (0-based) of a SplitMix64 generator started at
``base_seed``. Results are aggregated in replication order, so a table is a
pure function of its scenarios regardless of the number of worker processes.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import AllFailedError, ConfigurationError, FracNoiseError
from .estimate import EstimationOptions, estimate
from .simulate import SimConfig, evaluate_schedule, synthesize_observations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

REFERENCE_GRID = (0.1, 0.2, 0.3, 1.0 / 3.0, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

CSV_COLUMNS = (
    "H",
    "H_bias", "H_se", "H_rmse",
    "C_bias_pct", "C_se_pct", "C_rmse_pct",
    "Pi_bias_pct", "Pi_se_pct", "Pi_rmse_pct",
)


def splitmix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    return splitmix64((int(base_seed) + (int(index) + 1) * GOLDEN_GAMMA) & MASK64)


def integrated_square(sched, t_end: float) -> float:
    """``int_0^t_end s(t)**2 dt`` for a constant or piecewise-constant schedule."""
    if np.isscalar(sched):
        return float(sched) ** 2 * t_end
    times = [float(t) for t, _ in sched if t < t_end] + [t_end]
    starts = [max(t, 0.0) for t in times[:-1]]
    vals = evaluate_schedule(sched, starts)
    return float(sum(v * v * (b - a) for v, a, b in zip(vals, starts, times[1:])))


@dataclass(frozen=True)
class MCTruth:
    h: float
    c_t: float
    pi_t: float


@dataclass(frozen=True)
class MCScenario:
    sim: SimConfig  # its seed is ignored
    opts: EstimationOptions = field(default_factory=EstimationOptions)
    replications: int = 100
    base_seed: int = 0
    truth: Optional[MCTruth] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.truth is None:
            object.__setattr__(
                self,
                "truth",
                MCTruth(
                    float(self.sim.h),
                    integrated_square(self.sim.sigma, self.sim.t_end),
                    integrated_square(self.sim.rho, self.sim.t_end),
                ),
            )


@dataclass(frozen=True)
class ReplicationResult:
    index: int
    h_hat: float = math.nan
    c_hat: float = math.nan
    pi_hat: float = math.nan
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_replication(scenario: MCScenario, index: int) -> ReplicationResult:
    if not 0 <= index < scenario.replications:
        raise ConfigurationError(f"replication index {index} outside [0, {scenario.replications})")
    cfg = replace(scenario.sim, seed=derive_seed(scenario.base_seed, index))
    try:
        path = synthesize_observations(cfg)
        res = estimate(path, scenario.opts, cfg.t_end)
    except FracNoiseError as exc:
        return ReplicationResult(index, error=f"{type(exc).__name__}: {exc}")
    return ReplicationResult(index, res.h_hat, res.c_hat, res.pi_hat)


@dataclass(frozen=True)
class MCRow:
    h_true: float
    h_bias: float
    h_se: float
    h_rmse: float
    c_bias: float  # percent of truth
    c_se: float
    c_rmse: float
    pi_bias: float
    pi_se: float
    pi_rmse: float
    n_failed: int
    replications: int

    @property
    def flagged(self) -> bool:
        """More than 1% of replications failed."""
        return self.n_failed > 0.01 * self.replications

    def values(self) -> tuple[float, ...]:
        return (
            self.h_true,
            self.h_bias, self.h_se, self.h_rmse,
            self.c_bias, self.c_se, self.c_rmse,
            self.pi_bias, self.pi_se, self.pi_rmse,
        )


def summarize(estimates: np.ndarray, truth: float, scale: float = 1.0) -> tuple[float, float, float]:
    """Bias, population standard deviation and RMSE, each multiplied by ``scale``."""
    bias = float(np.mean(estimates)) - truth
    se = float(np.std(estimates))
    return bias * scale, se * scale, math.hypot(bias, se) * scale


def _pct(truth: float) -> float:
    return 100.0 / truth if truth != 0 else math.nan


def _run_one(args):
    return run_replication(*args)


def replicate(scenario: MCScenario, threads: int = 1) -> list[ReplicationResult]:
    jobs = [(scenario, i) for i in range(scenario.replications)]
    if threads <= 1 or scenario.replications == 1:
        return [_run_one(j) for j in jobs]
    chunk = max(1, scenario.replications // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_one, jobs, chunksize=chunk))


def aggregate(scenario: MCScenario, results: Sequence[ReplicationResult]) -> MCRow:
    good = [r for r in results if r.ok]
    if not good:
        raise AllFailedError(f"all {len(results)} replications failed; first error: {results[0].error}")
    truth = scenario.truth
    h = np.array([r.h_hat for r in good])
    c = np.array([r.c_hat for r in good])
    pi = np.array([r.pi_hat for r in good])
    return MCRow(
        truth.h,
        *summarize(h, truth.h),
        *summarize(c, truth.c_t, _pct(truth.c_t)),
        *summarize(pi, truth.pi_t, _pct(truth.pi_t)),
        n_failed=len(results) - len(good),
        replications=len(results),
    )


def run_mc(scenario: MCScenario, threads: int = 1) -> MCRow:
    return aggregate(scenario, replicate(scenario, threads))


@dataclass(frozen=True)
class MCTable:
    rows: tuple[MCRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([f"{v:.10g}" for v in row.values()])
        return buf.getvalue()

    def to_text(self) -> str:
        head1 = f"{'H':>7} | {'H_hat':^26} | {'C_hat (% of truth)':^29} | {'Pi_hat (% of truth)':^29}"
        head2 = f"{'':>7} | {'bias':>8} {'SE':>8} {'RMSE':>8} | " + " | ".join(
            [f"{'bias':>9} {'SE':>9} {'RMSE':>9}"] * 2
        )
        lines = [head1, head2, "-" * len(head2)]
        for r in self.rows:
            pct = lambda a, b, c: f"{a:>8.2f}% {b:>8.2f}% {c:>8.2f}%"
            line = (
                f"{r.h_true:>7.4f} | {r.h_bias:>8.3f} {r.h_se:>8.3f} {r.h_rmse:>8.3f} | "
                f"{pct(r.c_bias, r.c_se, r.c_rmse)} | {pct(r.pi_bias, r.pi_se, r.pi_rmse)}"
            )
            if r.n_failed:
                line += f"  ({r.n_failed}/{r.replications} failed{', FLAGGED' if r.flagged else ''})"
            lines.append(line)
        return "\n".join(lines) + "\n"


def table_sweep(scenarios: Sequence[MCScenario], threads: int = 1) -> MCTable:
    if not scenarios:
        raise ConfigurationError("table_sweep needs at least one scenario")
    return MCTable(tuple(run_mc(s, threads) for s in scenarios))


def grid_scenarios(
    replications: int,
    base_seed: int = 0,
    n: int = 10_000,
    sigma: float = 1.0,
    rho: float = 0.1,
    grid: Sequence[float] = REFERENCE_GRID,
    opts: Optional[EstimationOptions] = None,
) -> list[MCScenario]:
    """One scenario per Hurst value of the reference grid (fBm plus Gaussian noise on [0, 1])."""
    opts = opts or EstimationOptions()
    return [
        MCScenario(
            SimConfig(h=h, n=n, t_end=1.0, sigma=sigma, rho=rho, noise_dist="gaussian"),
            opts,
            replications,
            base_seed,
        )
        for h in grid
    ]
