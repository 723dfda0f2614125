"""Command-line front end.

Every configurable option can also be given in a JSON config file::

    {
      "schema_version": 1,
      "mc": {"grid": "paper", "reps": 500, "seed": 42},
      "estimate": {"theta": 1.0}
    }

Sections are named after subcommands and keys after the long flag with
dashes replaced by underscores. Command-line flags override file values and
unknown sections or keys are rejected. Exit status is 0 on success, 1 when
the computation itself fails and 2 for usage errors (bad flags, missing
files, invalid parameter values).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataFormatError, FracNoiseError
from .estimate import (
    EstimationOptions,
    bias_corrected_square,
    estimate,
    estimate_h_fixed,
    estimate_integrated_vol,
    estimate_noise_var,
    eta_g,
    eta_g_discrete,
    gamma_h,
    mu_f,
    square,
)
from .montecarlo import REFERENCE_GRID, MCTable, grid_scenarios, table_sweep
from .pipeline import RawSeries, SweepConfig, frequency_sweep, load_series
from .preavg import triangular
from .simulate import NOISE_DISTRIBUTIONS, KERNELS, SampledPath, SimConfig, synthesize_observations

SCHEMA_VERSION = 1
THREADS_ENV = "FRACNOISE_THREADS"

log = logging.getLogger("fracnoise")

WEIGHTS = {"triangular": triangular}
TEST_FUNCTIONS = {"square": square, "bias_corrected_square": bias_corrected_square}


class UsageError(Exception):
    """Problem with the invocation rather than with the computation."""


@dataclass(frozen=True)
class Opt:
    """A configurable option: shared by the parser and the config file."""

    flag: str
    default: Any
    help: str
    type: Optional[Callable] = None
    nargs: Optional[str] = None
    choices: Optional[Sequence] = None
    switch: bool = False

    @property
    def key(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")

    def convert(self, value):
        if self.switch:
            if not isinstance(value, bool):
                raise UsageError(f"config key {self.key!r} must be true or false")
            return value
        try:
            if self.nargs:
                if not isinstance(value, list):
                    value = [value]
                out = [self.type(v) for v in value]
            else:
                out = self.type(value) if self.type else value
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config key {self.key!r}: {exc}") from None
        if self.choices is not None and out not in self.choices:
            raise UsageError(f"config key {self.key!r} must be one of {list(self.choices)}")
        return out


ESTIMATOR_OPTS = [
    Opt("--weight", "triangular", "weight function", str, choices=sorted(WEIGHTS)),
    Opt("--theta", 1.0, "window scale: k = round(n**kappa / theta)", float),
    Opt("--kappa-init", 2.0 / 3.0, "initial window exponent of the adaptive loop", float),
    Opt("--conv-threshold", 0.025, "stop when the H estimate moves by at most this", float),
    Opt("--max-iters", 100, "maximum number of ratio evaluations", int),
]

SIM_OPTS = [
    Opt("--h", None, "Hurst parameter in (0, 1)", float),
    Opt("--n", 10_000, "observations per unit time", int),
    Opt("--t-end", 1.0, "time horizon", float),
    Opt("--sigma", 1.0, "signal volatility", float),
    Opt("--rho", 0.1, "noise standard deviation", float),
    Opt("--noise-dist", "gaussian", "noise distribution", str, choices=NOISE_DISTRIBUTIONS),
    Opt("--x0", 0.0, "initial level", float),
    Opt("--drift", 0.0, "linear drift per unit time", float),
    Opt("--kernel", "stationary_fbm", "signal model", str, choices=KERNELS),
    Opt("--seed", 0, "master random seed", int),
]

INPUT_OPTS = [
    Opt("--dt", None, "sample spacing in seconds (single-column input)", float),
    Opt("--value-col", None, "name of the value column", str),
    Opt("--timestamp-col", None, "name of the timestamp column", str),
]

COMMAND_OPTS: dict[str, list[Opt]] = {
    "simulate": SIM_OPTS + [Opt("--output", None, "output CSV (default: standard output)", str)],
    "estimate": INPUT_OPTS
    + ESTIMATOR_OPTS
    + [
        Opt("--kappa", None, "fixed window exponent (disables adaptation)", float),
        Opt("--format", "text", "what to print", str, choices=("text", "json")),
        Opt("--output", None, "also write the JSON result to this file", str),
    ],
    "mc": [
        Opt("--grid", None, "named Hurst grid", str, choices=("paper",)),
        Opt("--hs", None, "explicit Hurst values (instead of --grid)", float, nargs="+"),
        Opt("--reps", 100, "replications per Hurst value", int),
        Opt("--seed", 0, "base seed of the replication streams", int),
        Opt("--n", 10_000, "observations per unit time", int),
        Opt("--sigma", 1.0, "signal volatility", float),
        Opt("--rho", 0.1, "noise standard deviation", float),
    ]
    + ESTIMATOR_OPTS
    + [
        Opt("--threads", None, f"worker processes (default: ${THREADS_ENV} or the CPU count)", int),
        Opt("--output", None, "output CSV (default: standard output)", str),
        Opt("--table", False, "print a formatted table to standard error", switch=True),
    ],
    "analyze": INPUT_OPTS
    + [
        Opt("--deltas", [float(d) for d in range(1, 31)], "sampling spacings in seconds", float, nargs="+"),
        Opt("--block-length", 3600.0, "block length in seconds", float),
        Opt("--no-preavg", False, "fix kappa = 0 in the main run", switch=True),
        Opt("--baseline", False, "add a kappa = 0 run without adaptation", switch=True),
    ]
    + ESTIMATOR_OPTS
    + [
        Opt("--threads", None, f"worker processes (default: ${THREADS_ENV} or the CPU count)", int),
        Opt("--output", None, "JSON report (default: standard output)", str),
        Opt("--csv", None, "also write one CSV row per (delta, block)", str),
    ],
    "constants": [
        Opt("--h", None, "Hurst parameter", float),
        Opt("--gamma", None, "print the fGn autocovariance at these lags", int, nargs="+"),
        Opt("--eta", False, "print the limit constant of the weight function", switch=True),
        Opt("--k", None, "also print the discrete version at window size k", int),
        Opt("--g", "triangular", "weight function", str, choices=sorted(WEIGHTS)),
        Opt("--mu", None, "print the Gaussian expectation of this test function", str, choices=sorted(TEST_FUNCTIONS)),
        Opt("--v1", 1.0, "signal variance for --mu", float),
        Opt("--v2", 0.0, "noise variance for --mu", float),
        Opt("--digits", 6, "decimal places", int),
    ],
}

COMMAND_HELP = {
    "simulate": "write a simulated noisy path as timestamp,value CSV",
    "estimate": "estimate H, integrated volatility and noise variance of a path CSV",
    "mc": "Monte-Carlo bias/SE/RMSE table over a Hurst grid",
    "analyze": "block-wise frequency sweep of a recorded series",
    "constants": "print estimator constants (debugging aid)",
}


def _add_opt(parser: argparse.ArgumentParser, opt: Opt) -> None:
    default = "" if opt.default is None or opt.switch else f" (default: {opt.default})"
    kwargs: dict[str, Any] = {"dest": opt.key, "default": argparse.SUPPRESS, "help": opt.help + default}
    if opt.switch:
        kwargs["action"] = "store_true"
    else:
        kwargs["type"] = opt.type
        if opt.nargs:
            kwargs["nargs"] = opt.nargs
        if opt.choices is not None:
            kwargs["choices"] = opt.choices
    parser.add_argument(opt.flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracnoise", description="Roughness estimation under measurement noise.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMAND_OPTS.items():
        p = sub.add_parser(name, help=COMMAND_HELP[name], description=COMMAND_HELP[name])
        if name in ("estimate", "analyze"):
            p.add_argument("input", help="input CSV file")
        p.add_argument("--config", help="JSON config file; flags override its values")
        for opt in opts:
            _add_opt(p, opt)
    return parser


def load_config(path: str, command: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UsageError(f"config file {path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    unknown = set(raw) - {"schema_version"} - set(COMMAND_OPTS)
    if unknown:
        raise UsageError(f"config file {path}: unknown sections {sorted(unknown)}")
    section = raw.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"config file {path}: section {command!r} must be an object")
    opts = {o.key: o for o in COMMAND_OPTS[command]}
    unknown = set(section) - set(opts)
    if unknown:
        raise UsageError(f"config file {path}: unknown keys in {command!r}: {sorted(unknown)}")
    try:
        return {k: opts[k].convert(v) for k, v in section.items()}
    except UsageError as exc:
        raise UsageError(f"config file {path}: {exc}") from None


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    values = {o.key: o.default for o in COMMAND_OPTS[args.command]}
    if getattr(args, "config", None):
        values.update(load_config(args.config, args.command))
    values.update({k: v for k, v in vars(args).items() if k in values})
    return values


def resolve_threads(value: Optional[int]) -> int:
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise UsageError("--threads must be >= 1")
    return value


def _estimation_options(v: dict) -> EstimationOptions:
    return EstimationOptions(
        g=WEIGHTS[v["weight"]](),
        theta=v["theta"],
        kappa_init=v["kappa_init"],
        conv_threshold=v["conv_threshold"],
        max_iters=v["max_iters"],
    )


def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        log.info("wrote %s", path)


def _read_series(path: str, v: dict) -> RawSeries:
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    return load_series(path, dt=v["dt"], value_col=v["value_col"], timestamp_col=v["timestamp_col"])


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, v: dict) -> None:
    if v["h"] is None:
        raise UsageError("simulate needs --h")
    cfg = SimConfig(
        h=v["h"], n=v["n"], t_end=v["t_end"], sigma=v["sigma"], rho=v["rho"], noise_dist=v["noise_dist"],
        x0=v["x0"], drift=v["drift"], kernel=v["kernel"], seed=v["seed"],
    )
    path = synthesize_observations(cfg)
    times = np.arange(len(path)) / cfg.n
    lines = ["timestamp,value"] + [f"{t:.12g},{y:.17g}" for t, y in zip(times, path.values)]
    _write("\n".join(lines) + "\n", v["output"])


def cmd_estimate(args, v: dict) -> None:
    series = _read_series(args.input, v)
    if series.gaps:
        raise DataFormatError(f"{args.input} has {len(series.gaps)} gaps; estimate needs an unbroken grid")
    path = SampledPath(series.sample_dt, series.values)
    t_end = (len(path) - 1) * series.sample_dt
    opts = _estimation_options(v)
    if v["kappa"] is None:
        res = estimate(path, opts, t_end)
    else:
        res = estimate_h_fixed(path, v["kappa"], opts, t_end)
        res.c_hat = estimate_integrated_vol(path, res.h_hat, opts, t_end)
        res.pi_hat = estimate_noise_var(path, t_end)
    doc = json.dumps(res.to_dict(), indent=2, allow_nan=False) + "\n"
    if v["output"] is not None:
        _write(doc, v["output"])
    if v["format"] == "json":
        sys.stdout.write(doc)
    else:
        status = "converged" if res.converged else "not converged"
        sys.stdout.write(
            f"H_hat  = {res.h_hat:.6f}  ({len(res.iterations)} iterations, {status})\n"
            f"C_hat  = {res.c_hat:.6g}\n"
            f"Pi_hat = {res.pi_hat:.6g}\n"
        )


def cmd_mc(args, v: dict) -> None:
    if (v["grid"] is None) == (v["hs"] is None):
        raise UsageError("mc needs exactly one of --grid or --hs")
    grid = REFERENCE_GRID if v["grid"] == "paper" else tuple(v["hs"])
    scenarios = grid_scenarios(
        v["reps"], v["seed"], n=v["n"], sigma=v["sigma"], rho=v["rho"], grid=grid, opts=_estimation_options(v)
    )
    table: MCTable = table_sweep(scenarios, resolve_threads(v["threads"]))
    for row in table.rows:
        if row.flagged:
            log.warning("H=%.4g: %d of %d replications failed", row.h_true, row.n_failed, row.replications)
    if v["table"]:
        sys.stderr.write(table.to_text())
    _write(table.to_csv(), v["output"])


def cmd_analyze(args, v: dict) -> None:
    series = _read_series(args.input, v)
    cfg = SweepConfig(
        deltas=tuple(v["deltas"]),
        block_length=v["block_length"],
        opts=_estimation_options(v),
        with_preavg=not v["no_preavg"],
        kappa_zero_baseline=v["baseline"],
    )
    report = frequency_sweep(series, cfg, resolve_threads(v["threads"]))
    _write(report.to_json(), v["output"])
    if v["csv"] is not None:
        _write(report.to_csv(), v["csv"])


def cmd_constants(args, v: dict) -> None:
    d = v["digits"]
    out = []
    wants_h = v["gamma"] is not None or v["eta"]
    if wants_h and v["h"] is None:
        raise UsageError("--gamma and --eta need --h")
    if v["gamma"] is not None:
        vals = gamma_h(v["h"], np.array(v["gamma"]))
        out += [f"gamma[{r}]\t{g:.{d}f}" for r, g in zip(v["gamma"], np.atleast_1d(vals))]
    if v["eta"]:
        g = WEIGHTS[v["g"]]()
        out.append(f"eta\t{eta_g(g, v['h']):.{d}f}")
        if v["k"] is not None:
            out.append(f"eta_discrete[k={v['k']}]\t{eta_g_discrete(g, v['h'], v['k']):.{d}f}")
    if v["mu"] is not None:
        out.append(f"mu[{v['mu']}]\t{mu_f(TEST_FUNCTIONS[v['mu']], v['v1'], v['v2']):.{d}f}")
    if not out:
        raise UsageError("nothing to print: give --gamma, --eta or --mu")
    sys.stdout.write("\n".join(out) + "\n")


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "mc": cmd_mc,
    "analyze": cmd_analyze,
    "constants": cmd_constants,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s", stream=sys.stderr
    )
    prog = f"fracnoise {args.command}"
    try:
        values = resolve(args)
        COMMANDS[args.command](args, values)
    except UsageError as exc:
        print(f"{prog}: error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"{prog}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except FracNoiseError as exc:
        print(f"{prog}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{prog}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
