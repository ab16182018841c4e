"""Intrinsic-time market dissection and information-theoretic liquidity.

Price series are dissected into directional-change and overshoot events
over a ladder of thresholds, replayed as single-bit transitions on a
2^n-state network, and scored by the unlikeliness of the observed
transition path; a rolling normal quantile of that surprise is the
liquidity measure.
"""

from ._kernels import BACKEND, HAVE_NUMBA
from .dc import (EventStream, IntrinsicEvent, RunnerState, StreamingDissector,
                 ThresholdLadder, dissect, events_from_csv, events_to_csv,
                 runner_step)
from .info import (InfoSummary, LiquidityFrame, LiquiditySample,
                   calibrate_stream_info, entropy_rate, info_summary,
                   liquidity_stream, path_surprise, stationary_distribution,
                   surprise_variance_rate, transition_surprises, variance_rate)
from .markov import (Island, TransitionMatrix, analytic_matrix, contract,
                     drifted_escape_probability, island_members, islands,
                     two_threshold_matrix)
from .mc import (EmpiricalMatrix, FitReport, SimConfig, empirical_matrix,
                 first_passage_probability, seed_sweep, simulate_path,
                 verify_fit)
from .network import (MarketState, ReplayError, TransitionLog, TransitionRecord,
                      decode_state, encode_bits, far_bit, replay,
                      successor_codes, successors)
from .scales import (LadderSearchConfig, equal_probability_ladder,
                     golden_section_max, optimize_ladder, spacing_constant)
from .ticks import (PriceSeries, Tick, TickDataError, load_ticks, midprice,
                    parse_ticks, serialize_ticks)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "HAVE_NUMBA", "__version__",
    "ThresholdLadder", "RunnerState", "IntrinsicEvent", "EventStream",
    "StreamingDissector", "dissect", "runner_step", "events_to_csv",
    "events_from_csv",
    "MarketState", "TransitionRecord", "TransitionLog", "ReplayError",
    "encode_bits", "decode_state", "far_bit", "successor_codes", "successors",
    "replay",
    "TransitionMatrix", "Island", "islands", "island_members",
    "analytic_matrix", "two_threshold_matrix", "contract",
    "drifted_escape_probability",
    "InfoSummary", "LiquiditySample", "LiquidityFrame",
    "stationary_distribution", "entropy_rate", "surprise_variance_rate",
    "variance_rate", "info_summary", "calibrate_stream_info",
    "transition_surprises", "path_surprise", "liquidity_stream",
    "LadderSearchConfig", "equal_probability_ladder", "spacing_constant",
    "golden_section_max", "optimize_ladder",
    "SimConfig", "FitReport", "EmpiricalMatrix", "simulate_path", "verify_fit",
    "empirical_matrix", "first_passage_probability", "seed_sweep",
    "Tick", "PriceSeries", "TickDataError", "parse_ticks", "load_ticks",
    "serialize_ticks", "midprice",
]
