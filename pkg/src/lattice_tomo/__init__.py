"""Tomographic least-squares MIMO detection with classical baselines and an SER simulator."""

__version__ = "0.1.0"

from .baseline import (
    DetectorOutput,
    ml_detect,
    mmse_detect,
    mmse_sic_detect,
    residual2,
    zf_detect,
)
from .core import (
    Constellation,
    Problem,
    SymbolVector,
    complex_to_real,
    make_constellation,
    sample_channel,
    sigma2_from_snr,
)
from .errors import CapabilityError, ConfigError, DecodeFailure, InvalidArgumentError, LatticeTomoError
from .projections import all_pair_projections, compute_pair_projection, compute_single_projection
from .sim import SerRecord, SimConfig, run_point, run_sweep
from .tlsd import (
    BeliefState,
    MetricTable,
    TlsdConfig,
    TlsdResult,
    Winner,
    bit_llrs_from_beliefs,
    init_beliefs,
    metric_tables,
    pair_update,
    pseudo_log_likelihood,
    tlsd_detect,
)
