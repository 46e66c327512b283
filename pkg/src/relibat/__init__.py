"""Time-dependent two-terminal reliability: BAT-MCS estimation and LSTM forecasting."""

__version__ = "0.1.0"

from .network import Network, parse_network, supervector_probability, vector_probability
from .bat import BatCursor, bat_next, bat_start
from .plsa import LayerTrace, plsa_is_connected, plsa_trace
from .montecarlo import McsConfig, McsResult, mcs_estimate, required_simulations, sample_state
from .batmcs import (
    BatMcsConfig,
    StratumReport,
    allocate_simulations,
    bat_mcs_estimate,
    exact_reliability,
    lower_extension,
    multi_run_average,
    upper_extension,
)

__all__ = [
    "Network", "parse_network", "vector_probability", "supervector_probability",
    "BatCursor", "bat_start", "bat_next",
    "LayerTrace", "plsa_is_connected", "plsa_trace",
    "McsConfig", "McsResult", "mcs_estimate", "required_simulations", "sample_state",
    "BatMcsConfig", "StratumReport", "allocate_simulations", "bat_mcs_estimate",
    "exact_reliability", "lower_extension", "upper_extension", "multi_run_average",
]
