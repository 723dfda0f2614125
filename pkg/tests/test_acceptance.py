"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N [PASS|FAIL]`` line (collected again in the
terminal summary) and then asserts the same condition.
"""
import math
import os

import numpy as np

from fracnoise.cli import run_cli
from fracnoise.estimate import (
    EstimationOptions,
    bias_corrected_square,
    estimate_h_adaptive,
    eta_g,
    eta_g_discrete,
    gamma_h,
    h_from_ratio,
    mu_f,
    ratio_statistic,
    square,
)
from fracnoise.montecarlo import MCScenario, run_mc
from fracnoise.pipeline import RawSeries, SweepConfig, frequency_sweep
from fracnoise.preavg import TRIANGULAR, PreAvgConfig, discretize_weights
from fracnoise.simulate import SampledPath, SimConfig, fgn_autocovariance, gen_fgn, synthesize_observations

THREADS = max(1, os.cpu_count() or 1)
REPS = 500


def _table_row(h):
    scenario = MCScenario(SimConfig(h=h, n=10_000, sigma=1.0, rho=0.1, noise_dist="gaussian"), EstimationOptions(), REPS, 2024)
    return run_mc(scenario, THREADS)


def _within(x, lo, hi):
    return lo <= x <= hi


def test_criterion_1_row_one_third(verdict):
    row = _table_row(1 / 3)
    checks = {
        "H bias": (row.h_bias, -0.01, 0.01),
        "H RMSE": (row.h_rmse, 0.012, 0.030),
        "C bias %": (row.c_bias, 0.0, 5.0),
        "Pi bias %": (row.pi_bias, -2.0, 2.0),
    }
    ok = all(_within(v, lo, hi) for v, lo, hi in checks.values())
    detail = "; ".join(
        f"{name} {v:+.4f} in [{lo:g}, {hi:g}] {'ok' if _within(v, lo, hi) else 'NO'}" for name, (v, lo, hi) in checks.items()
    )
    assert verdict(1, f"H=1/3 row, {REPS} reps, n=1e4", ok, detail + f"; failed reps {row.n_failed}")


def test_criterion_2_row_half(verdict):
    row = _table_row(0.5)
    ok = _within(row.h_bias, -0.012, 0.012) and _within(row.h_rmse, 0.02, 0.05)
    detail = f"H bias {row.h_bias:+.4f} in [-0.012, 0.012]; H RMSE {row.h_rmse:.4f} in [0.02, 0.05]; SE {row.h_se:.4f}"
    assert verdict(2, f"H=0.5 row, {REPS} reps, n=1e4", ok, detail)


def test_criterion_3_row_failure_regime(verdict):
    row = _table_row(0.1)
    ok = row.h_bias > 0.10
    assert verdict(3, f"H=0.1 breakdown, {REPS} reps", ok, f"H bias {row.h_bias:+.4f} > 0.10; SE {row.h_se:.4f}")


def test_criterion_4_consistency_limit(verdict):
    n = 2**14
    parts, ok = [], True
    for h in (0.3, 0.5, 0.7):
        kappa = 2 * h / (2 * h + 1)
        rs = [
            ratio_statistic(synthesize_observations(SimConfig(h=h, n=n, rho=0.0, seed=s)), PreAvgConfig(kappa=kappa), 1.0)
            for s in range(200)
        ]
        target = 2.0 ** (2 * h - 1 - 2 * h * kappa)
        rel = np.median(rs) / target - 1.0
        ok &= abs(rel) <= 0.05
        parts.append(f"H={h}: median R {np.median(rs):.4f} vs {target:.4f} ({rel:+.2%})")
    assert verdict(4, "ratio limit, 200 seeds, n=2^14", ok, "; ".join(parts))


def test_criterion_5_eta_oracle(verdict):
    diffs = [abs(eta_g(TRIANGULAR, h) - eta_g_discrete(TRIANGULAR, h, 4096)) for h in np.arange(1, 10) / 10]
    half = eta_g(TRIANGULAR, 0.5)
    ok = max(diffs) <= 2e-3 and abs(half - 1 / 3) <= 1e-6
    detail = f"max |eta - discrete(4096)| {max(diffs):.2e} <= 2e-3; eta(0.5) - 1/3 = {half - 1 / 3:.1e}"
    assert verdict(5, "eta oracle", ok, detail)


def test_criterion_6_exact_invariants(verdict):
    path = synthesize_observations(SimConfig(h=1 / 3, n=10_000, rho=0.1, seed=1))
    base = estimate_h_adaptive(path).h_hat
    moved = [
        estimate_h_adaptive(SampledPath(path.dt, c * path.values + s)).h_hat for c, s in ((3.7, 0.0), (1.0, -250.0), (-0.02, 9.0))
    ]
    inv_err = max(
        abs(h_from_ratio(2.0 ** (2 * h - 1 - 2 * h * k), k) - h) for h in np.linspace(0.05, 0.95, 19) for k in np.linspace(0, 0.9, 10)
    )
    mu_err = 0.0
    for v1, v2 in ((0.7, 0.2), (1.0, 0.0), (2.5, 1.3)):
        mu_err = max(
            mu_err,
            abs(mu_f(square, v1, v2, closed_form=False) - (v1 + v2)),
            abs(mu_f(bias_corrected_square, v1, v2, closed_form=False) - v1),
            abs(mu_f(lambda x, y: x**4, v1, v2) - 3 * (v1 + v2) ** 2),
        )
    gamma_half = np.max(np.abs(gamma_h(0.5, np.arange(1, 100))))
    tele = max(abs(np.sum(discretize_weights(TRIANGULAR, k).dg_vals)) for k in range(2, 300))
    shift_err = max(abs(m - base) for m in moved)
    checks = [
        ("scale/shift", shift_err, 1e-12),
        ("inversion", inv_err, 1e-12),
        ("mu", mu_err, 1e-12),
        ("gamma(1/2)", gamma_half, 0.0),
        ("telescoping", tele, 1e-12),
    ]
    ok = all(v <= tol for _, v, tol in checks)
    detail = "; ".join(f"{name} err {v:.1e} <= {tol:g}" for name, v, tol in checks)
    assert verdict(6, "exact invariants", ok, detail)


def _autocov_se(h, count, r):
    j = np.arange(-count + 1, count)
    wt = 1.0 - np.abs(j) / count
    var = np.sum(wt * (fgn_autocovariance(h, j) ** 2 + fgn_autocovariance(h, j + r) * fgn_autocovariance(h, j - r)))
    return math.sqrt(var / count)


def test_criterion_7_fgn_fidelity(verdict):
    count = 10**6
    worst, ok = 0.0, True
    for h in (0.25, 0.5, 0.75):
        x = gen_fgn(h, count, 77)
        for r in range(6):
            emp = np.dot(x[: count - r], x[r:]) / (count - r)
            z = abs(emp - fgn_autocovariance(h, r)) / _autocov_se(h, count, r)
            worst = max(worst, z)
            ok &= z <= 4.0
    assert verdict(7, "fGn autocovariance, 1e6 points", ok, f"worst |z| over lags 0..5 and H in (0.25, 0.5, 0.75) = {worst:.2f} <= 4")


def test_criterion_8_pipeline_day(verdict):
    day = synthesize_observations(SimConfig(h=1 / 3, n=36_000, t_end=24.0, sigma=1.0, rho=0.1, seed=7))
    series = RawSeries(0.1, day.values)
    report = frequency_sweep(series, SweepConfig(deltas=(1.0, 2.0, 5.0, 10.0), kappa_zero_baseline=True), THREADS)
    mean_h = report.main.mean_h_across_deltas
    base_median = float(np.median([b.h for d in report.baseline.per_delta for b in d.blocks if b.status == "ok"]))
    main_ok = abs(mean_h - 1 / 3) <= 0.05
    base_ok = abs(base_median) <= 0.05
    per_delta = ", ".join(f"{d.delta_s:g}s {d.day_h:.3f}" for d in report.main.per_delta)
    detail = (
        f"pre-averaged mean H {mean_h:.4f} within 0.05 of 1/3 {'ok' if main_ok else 'NO'} ({per_delta}); "
        f"kappa=0 median H {base_median:.4f} within 0.05 of 0 {'ok' if base_ok else 'NO'}"
    )
    assert verdict(8, "synthetic 10 Hz day, deltas 1,2,5,10 s", main_ok and base_ok, detail)


def test_criterion_9_mc_determinism(verdict, tmp_path):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"mc_{threads}.csv"
        code = run_cli(["mc", "--grid", "paper", "--reps", "4", "--n", "2000", "--seed", "42", "--threads", threads, "--output", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0].splitlines()) == 11
    assert verdict(9, "mc CSV, 1 vs 3 workers", ok, f"byte-identical {outs[0] == outs[1]}, {len(outs[0].splitlines()) - 1} rows")
