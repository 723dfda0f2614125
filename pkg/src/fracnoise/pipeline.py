"""Frequency-sweep analysis of real sampled data.

For every target spacing ``delta`` the series is split into ``delta /
sample_dt`` phase-shifted sub-series. Each block (one hour by default) is
rescaled to the unit interval, every phase is estimated separately, and the
block value is the phase average. Day-level values average the block ``H``
estimates and sum the block ``C`` and ``Pi`` estimates.

Rescaled-time convention: a block of physical length ``L`` seconds becomes
``[0, 1]``. ``C`` and ``Pi`` are reported in those units; ``time_unit_s`` in
the report records ``L``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Optional, Sequence, Union

import numpy as np

from .errors import AllFailedError, ConfigurationError, DataFormatError, FracNoiseError
from .estimate import EstimationOptions, estimate_h_adaptive, estimate_h_fixed, estimate_integrated_vol, estimate_noise_var
from .simulate import SampledPath

SPACING_RTOL = 1e-6
MIN_POINTS_PER_PHASE = 16


@dataclass(frozen=True)
class RawSeries:
    """Observed values on a regular grid; ``gaps`` lists ``(index, length)``
    where ``length`` grid points are missing just before ``values[index]``."""

    sample_dt: float
    values: np.ndarray
    start_time: Optional[str] = None
    gaps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size == 0:
            raise DataFormatError("series is empty")
        if not self.sample_dt > 0:
            raise ConfigurationError("sample_dt must be positive")
        idx = [i for i, _ in self.gaps]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigurationError("gap indices must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gaps", tuple((int(i), int(n)) for i, n in self.gaps))

    def on_grid(self) -> np.ndarray:
        """Values placed on the full time grid with NaN at missing points."""
        if not self.gaps:
            return self.values
        out = np.full(self.values.size + sum(n for _, n in self.gaps), np.nan)
        pos = np.arange(self.values.size)
        for i, n in self.gaps:
            pos[i:] += n
        out[pos] = self.values
        return out


# --------------------------------------------------------------------------
# ingestion


def _parse_float(cell: str, row: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataFormatError(f"row {row}: cannot parse {cell!r} as a number") from None


def _parse_time(cell: str, row: int) -> tuple[float, Optional[datetime]]:
    try:
        return float(cell), None
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(cell.strip())
    except ValueError:
        raise DataFormatError(f"row {row}: cannot parse timestamp {cell!r}") from None
    return math.nan, stamp


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_series(
    source: Union[str, os.PathLike, IO],
    dt: Optional[float] = None,
    value_col: Optional[str] = None,
    timestamp_col: Optional[str] = None,
) -> RawSeries:
    """Read a CSV with a single value column (``dt`` required) or
    ``timestamp,value`` columns with uniform spacing.

    Timestamps may be seconds or ISO-8601 strings. A timestamp jump of ``m``
    grid steps (``m > 1``) is recorded as a gap of ``m - 1`` points.
    """
    if isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text()
    else:
        raw = source.read()
        text = raw.decode() if isinstance(raw, bytes) else raw
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError("input is empty")

    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataFormatError("input has a header but no data")
    first_line = 2 if header else 1

    def column(name, fallbacks):
        if header is None:
            if name is not None:
                raise DataFormatError(f"column {name!r} requested but the file has no header")
            return None
        if name is not None:
            if name not in header:
                raise DataFormatError(f"column {name!r} not found in header {header}")
            return header.index(name)
        for cand in fallbacks:
            if cand in header:
                return header.index(cand)
        return None

    ncols = len(rows[0])
    v_idx = column(value_col, ("value",))
    t_idx = column(timestamp_col, ("timestamp", "time", "t"))
    if header is None:
        if ncols == 1:
            v_idx, t_idx = 0, None
        elif ncols == 2:
            t_idx, v_idx = 0, 1
        else:
            raise DataFormatError(f"expected 1 or 2 columns without a header, got {ncols}")
    elif v_idx is None:
        if ncols == 1:
            v_idx = 0
        elif ncols == 2 and t_idx is not None:
            v_idx = 1 - t_idx
        else:
            raise DataFormatError("cannot identify the value column; use value_col")

    values = []
    for r, row in enumerate(rows, start=first_line):
        if len(row) <= v_idx:
            raise DataFormatError(f"row {r}: missing value column")
        values.append(_parse_float(row[v_idx], r))

    if t_idx is None:
        if dt is None:
            raise ConfigurationError("a value-only file needs the sample spacing dt")
        return RawSeries(float(dt), np.array(values))

    stamps = [_parse_time(row[t_idx], r) for r, row in enumerate(rows, start=first_line)]
    start_time = None
    if stamps[0][1] is not None:
        t0 = stamps[0][1]
        start_time = t0.isoformat()
        try:
            times = np.array([(s - t0).total_seconds() for _, s in stamps])
        except TypeError:
            raise DataFormatError("timestamps mix numeric and ISO-8601 forms") from None
    else:
        if any(s is not None for _, s in stamps):
            raise DataFormatError("timestamps mix numeric and ISO-8601 forms")
        times = np.array([t for t, _ in stamps])

    diffs = np.diff(times)
    if diffs.size == 0 and dt is None:
        raise DataFormatError("cannot infer the sample spacing from a single row")
    if np.any(diffs <= 0):
        bad = int(np.argmax(diffs <= 0))
        raise DataFormatError(f"row {bad + 1 + first_line}: timestamps not strictly increasing")
    step = float(dt) if dt is not None else float(diffs.min())
    gaps = []
    for i, d in enumerate(diffs):
        m = d / step
        mi = round(m)
        if mi < 1 or abs(m - mi) > SPACING_RTOL * m:
            raise DataFormatError(
                f"row {i + 1 + first_line}: spacing {d!r} is not a multiple of {step!r}"
            )
        if mi > 1:
            gaps.append((i + 1, mi - 1))
    return RawSeries(step, np.array(values), start_time, tuple(gaps))


# --------------------------------------------------------------------------
# splitting and block analysis


def step_multiple(delta: float, sample_dt: float) -> int:
    m = delta / sample_dt
    mi = round(m)
    if mi < 1 or abs(m - mi) > 1e-9 * m:
        raise ConfigurationError(f"delta {delta!r} is not an integer multiple of {sample_dt!r}")
    return int(mi)


def subsample_split(series: RawSeries, delta: float) -> list[SampledPath]:
    """Phase-shifted sub-series at spacing ``delta``; phase ``p`` takes grid
    indices ``p, p + m, p + 2m, ...`` with ``m = delta / sample_dt``."""
    m = step_multiple(delta, series.sample_dt)
    grid = series.on_grid()
    return [SampledPath(delta, grid[p::m], label=f"phase {p}") for p in range(m)]


@dataclass(frozen=True)
class BlockEstimate:
    h: float
    c: float
    pi: float
    phases_failed: int
    phases: int


def analyze_block(
    block: Sequence[SampledPath],
    opts: EstimationOptions = EstimationOptions(),
    t_end: float = 1.0,
    kappa: Optional[float] = None,
) -> BlockEstimate:
    """Estimate every phase and average the successes.

    With ``kappa`` set the window exponent is fixed (no adaptation).
    """
    hs, cs, pis = [], [], []
    errors = []
    for path in block:
        try:
            if kappa is None:
                h = estimate_h_adaptive(path, opts, t_end).h_hat
            else:
                h = estimate_h_fixed(path, kappa, opts, t_end).h_hat
            c = estimate_integrated_vol(path, h, opts, t_end)
            pi = estimate_noise_var(path, t_end)
        except FracNoiseError as exc:
            errors.append(exc)
            continue
        hs.append(h)
        cs.append(c)
        pis.append(pi)
    if not hs:
        raise AllFailedError(f"all {len(block)} phases failed: {errors[0] if errors else 'no phases'}")
    return BlockEstimate(float(np.mean(hs)), float(np.mean(cs)), float(np.mean(pis)), len(errors), len(block))


# --------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepConfig:
    deltas: tuple[float, ...] = tuple(float(d) for d in range(1, 31))
    block_length: float = 3600.0
    opts: EstimationOptions = field(default_factory=EstimationOptions)
    with_preavg: bool = True
    kappa_zero_baseline: bool = False

    def __post_init__(self):
        if not self.deltas:
            raise ConfigurationError("at least one delta is required")
        if any(not d > 0 for d in self.deltas):
            raise ConfigurationError("deltas must be positive")
        if not self.block_length > 0:
            raise ConfigurationError("block_length must be positive")
        if self.block_length / max(self.deltas) < MIN_POINTS_PER_PHASE:
            raise ConfigurationError(
                f"block_length must hold at least {MIN_POINTS_PER_PHASE} points at the largest delta"
            )

    def to_dict(self) -> dict:
        return {
            "deltas_s": list(self.deltas),
            "block_length_s": self.block_length,
            "with_preavg": self.with_preavg,
            "kappa_zero_baseline": self.kappa_zero_baseline,
            "theta": self.opts.theta,
            "kappa_init": self.opts.kappa_init,
            "conv_threshold": self.opts.conv_threshold,
            "max_iters": self.opts.max_iters,
            "weight": self.opts.g.kind,
        }


@dataclass(frozen=True)
class BlockResult:
    index: int
    start: Union[str, float]
    h: Optional[float]
    c: Optional[float]
    pi: Optional[float]
    phases_failed: int
    status: str  # ok | gap | failed

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "h": self.h,
            "c": self.c,
            "pi": self.pi,
            "phases_failed": self.phases_failed,
            "status": self.status,
        }


@dataclass(frozen=True)
class DeltaResult:
    delta_s: float
    blocks: tuple[BlockResult, ...]

    def _ok(self):
        return [b for b in self.blocks if b.status == "ok"]

    @property
    def day_h(self) -> Optional[float]:
        ok = self._ok()
        return float(np.mean([b.h for b in ok])) if ok else None

    @property
    def day_c(self) -> Optional[float]:
        ok = self._ok()
        return float(np.sum([b.c for b in ok])) if ok else None

    @property
    def day_pi(self) -> Optional[float]:
        ok = self._ok()
        return float(np.sum([b.pi for b in ok])) if ok else None

    def to_dict(self) -> dict:
        return {
            "delta_s": self.delta_s,
            "blocks": [b.to_dict() for b in self.blocks],
            "day_h": self.day_h,
            "day_c": self.day_c,
            "day_pi": self.day_pi,
        }


@dataclass(frozen=True)
class SweepRun:
    per_delta: tuple[DeltaResult, ...]

    @property
    def mean_h_across_deltas(self) -> Optional[float]:
        hs = [d.day_h for d in self.per_delta if d.day_h is not None]
        return float(np.mean(hs)) if hs else None

    def to_dict(self) -> dict:
        return {
            "per_delta": [d.to_dict() for d in self.per_delta],
            "mean_h_across_deltas": self.mean_h_across_deltas,
        }


@dataclass(frozen=True)
class SweepReport:
    config: dict
    main: SweepRun
    baseline: Optional[SweepRun] = None

    def to_dict(self) -> dict:
        out = {"config": self.config, **self.main.to_dict()}
        if self.baseline is not None:
            out["baseline"] = self.baseline.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["run", "delta_s", "block", "start", "h", "c", "pi", "phases_failed", "status"])
        runs = [("main", self.main)] + ([("baseline", self.baseline)] if self.baseline else [])
        fmt = lambda v: "" if v is None else f"{v:.10g}"
        for name, run in runs:
            for d in run.per_delta:
                for b in d.blocks:
                    writer.writerow(
                        [name, f"{d.delta_s:g}", b.index, b.start, fmt(b.h), fmt(b.c), fmt(b.pi), b.phases_failed, b.status]
                    )
        return buf.getvalue()


def _block_task(args) -> tuple[Optional[BlockEstimate], int, bool]:
    phases, opts, kappa = args
    if any(np.isnan(v).any() for _, v in phases):
        return None, 0, True
    paths = [SampledPath(dt, v) for dt, v in phases]
    try:
        return analyze_block(paths, opts, 1.0, kappa), 0, False
    except AllFailedError:
        return None, len(paths), False


def _block_start(series: RawSeries, offset_s: float) -> Union[str, float]:
    if series.start_time is None:
        return offset_s
    return (datetime.fromisoformat(series.start_time) + timedelta(seconds=offset_s)).isoformat()


def _run_sweep(series: RawSeries, cfg: SweepConfig, kappa: Optional[float], threads: int) -> SweepRun:
    grid = series.on_grid()
    block_pts = step_multiple(cfg.block_length, series.sample_dt)
    n_blocks = grid.size // block_pts
    if n_blocks < 1:
        raise ConfigurationError("series spans less than one block")
    tasks, keys = [], []
    for delta in cfg.deltas:
        m = step_multiple(delta, series.sample_dt)
        dt_unit = delta / cfg.block_length
        for b in range(n_blocks):
            chunk = grid[b * block_pts : (b + 1) * block_pts]
            tasks.append(([(dt_unit, chunk[p::m]) for p in range(m)], cfg.opts, kappa))
            keys.append((delta, b))
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_block_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = [_block_task(t) for t in tasks]

    per_delta = []
    for delta in cfg.deltas:
        blocks = []
        for (d, b), (est, failed, gap) in zip(keys, results):
            if d != delta:
                continue
            start = _block_start(series, b * cfg.block_length)
            if gap:
                blocks.append(BlockResult(b, start, None, None, None, 0, "gap"))
            elif est is None:
                blocks.append(BlockResult(b, start, None, None, None, failed, "failed"))
            else:
                blocks.append(BlockResult(b, start, est.h, est.c, est.pi, est.phases_failed, "ok"))
        per_delta.append(DeltaResult(float(delta), tuple(blocks)))
    return SweepRun(tuple(per_delta))


def frequency_sweep(series: RawSeries, cfg: SweepConfig, threads: int = 1) -> SweepReport:
    """Run the block-wise estimation for every spacing in ``cfg.deltas``."""
    for d in cfg.deltas:
        step_multiple(d, series.sample_dt)
    main = _run_sweep(series, cfg, None if cfg.with_preavg else 0.0, threads)
    baseline = _run_sweep(series, cfg, 0.0, threads) if cfg.kappa_zero_baseline else None
    config = {**cfg.to_dict(), "sample_dt_s": series.sample_dt, "time_unit_s": cfg.block_length}
    return SweepReport(config, main, baseline)
