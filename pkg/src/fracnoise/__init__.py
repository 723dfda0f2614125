"""Roughness (Hurst) estimation for fractional processes observed under noise."""
from .errors import (
    AllFailedError,
    ConfigurationError,
    DataFormatError,
    DegenerateInputError,
    FracNoiseError,
    NumericalError,
    WindowTooLargeError,
)
from .estimate import (
    EstimationOptions,
    EstimationResult,
    bias_corrected_square,
    estimate,
    estimate_h_adaptive,
    estimate_h_fixed,
    estimate_integrated_vol,
    estimate_noise_var,
    eta_g,
    eta_g_discrete,
    gamma_h,
    h_from_ratio,
    mu_f,
    ratio_statistic,
    square,
)
from .montecarlo import MCScenario, MCTable, grid_scenarios, run_mc, table_sweep
from .pipeline import RawSeries, SweepConfig, analyze_block, frequency_sweep, load_series, subsample_split
from .preavg import PreAvgConfig, WeightSpec, triangular, variation_functional, window_size
from .simulate import SampledPath, SimConfig, gen_fgn, synthesize_observations

__version__ = "0.1.0"
