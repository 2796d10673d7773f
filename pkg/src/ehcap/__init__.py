"""Finite-battery energy-harvesting AWGN link toolkit.

Simulates online energy-allocation policies over a stochastic battery and
computes closed-form capacity bounds with constant-gap guarantees.
"""

from .analytics import (
    BERNOULLI_GAP_BITS,
    POLICY_GAP_BITS,
    UNIFORM_ARRIVAL_GAP_BITS,
    UNIFORM_INPUT_GAP_BITS,
    BoundsReport,
    UniformProfileReport,
    UniformRegime,
    awgn_rate,
    bernoulli_report,
    binary_entropy,
    capacity_lower_bound,
    gap_bound_ratio,
    general_bounds,
    ozarow_wyner_lb,
    policy_rate_series,
    uniform_profile_report,
    upper_bound,
)
from .battery_sim import (
    BatteryState,
    FeasibilityError,
    McEstimate,
    TraceConfig,
    TraceStats,
    monte_carlo,
    run_trace,
    step,
    trial_rng,
)
from .energy_profiles import (
    Bernoulli,
    BernoulliReduction,
    Harmonic,
    KLevel,
    UniformInterval,
    profile_from_json,
)
from .policies import (
    ConstantFractionAdaptive,
    ConstantFractionEpoch,
    Uniform,
    policy_from_json,
)

__version__ = "0.1.0"
