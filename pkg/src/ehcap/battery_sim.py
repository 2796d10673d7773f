"""Battery recursion simulator and Monte Carlo rate estimation.

The dynamics per channel use t: spend g(t) from the battery, then credit the
next arrival, truncating at capacity,

    B[t+1] = min(B[t] - g(t) + E[t+1], B_max),

with the very first arrival credited before any spending. The accumulated
reward is the AWGN rate 0.5 * log2(1 + g(t)) in bits per channel use.

Two execution paths produce the same distribution of traces:

* a per-step reference loop that works for every profile/policy pair, and
* an epoch fast path for Bernoulli arrivals that draws geometric
  inter-arrival times and advances a whole epoch at once.

Randomness comes from counter-based Philox4x64 streams; trial i of seed s
uses key (s, i), so trials are independent and every estimate is
bit-identical no matter how trials are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .energy_profiles import Bernoulli, EnergyProfile
from .policies import ConstantFractionAdaptive, ConstantFractionEpoch, Policy, Uniform

__all__ = [
    "BatteryState",
    "TraceConfig",
    "TraceStats",
    "TraceRecord",
    "McEstimate",
    "FeasibilityError",
    "trial_rng",
    "step",
    "run_trace",
    "monte_carlo",
]

_HALF_INV_LN2 = 0.5 / math.log(2.0)
_FEAS_SLACK = 1e-9


class FeasibilityError(RuntimeError):
    """A policy tried to spend more energy than the battery holds."""


def _rate(g: float) -> float:
    return _HALF_INV_LN2 * math.log1p(g)


@dataclass(frozen=True)
class BatteryState:
    """Stored energy and the battery size."""

    level: float
    capacity: float

    def __post_init__(self):
        if not (math.isfinite(self.capacity) and self.capacity >= 0.0):
            raise ValueError("capacity must be finite and non-negative")
        if not 0.0 <= self.level <= self.capacity:
            raise ValueError("level must lie in [0, capacity]")


@dataclass(frozen=True)
class TraceConfig:
    horizon: int
    seed: int
    trials: int = 1
    initial_level: float = 0.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not (math.isfinite(self.initial_level) and self.initial_level >= 0.0):
            raise ValueError("initial_level must be finite and non-negative")


@dataclass(frozen=True)
class TraceStats:
    """Aggregates of one simulated trace. Rates are bits per channel use;
    sum_rate / steps = avg_rate. Energy balances exactly:
    allocated + final_level - initial + wasted = harvested."""

    steps: int
    sum_rate: float
    avg_rate: float
    harvested: float
    allocated: float
    wasted: float
    final_level: float


@dataclass(frozen=True)
class TraceRecord:
    """Per-step arrays from a recorded run (reference path only)."""

    arrivals: np.ndarray     # length horizon + 1, slot 0 credited first
    allocations: np.ndarray  # length horizon
    levels: np.ndarray       # battery after each step completes


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Philox4x64 stream for one trial: key word 0 is the seed, key word 1
    the trial index. Counter-based, so distinct keys give independent,
    platform-stable streams."""
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(trial)], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def step(state: BatteryState, arrival: float, allocation: float
         ) -> Tuple[BatteryState, float]:
    """One battery update: spend, then credit, truncating at capacity.

    Returns (new state, wasted energy). Raises FeasibilityError when the
    allocation exceeds the stored level; that is a policy bug, not a
    recoverable condition.
    """
    if arrival < 0.0:
        raise ValueError("arrival must be non-negative")
    if allocation < 0.0 or allocation > state.level + _FEAS_SLACK * (1.0 + state.level):
        raise FeasibilityError(
            f"allocation {allocation!r} outside [0, level={state.level!r}]"
        )
    level = state.level - min(allocation, state.level) + arrival
    wasted = level - state.capacity
    if wasted > 0.0:
        level = state.capacity
    else:
        wasted = 0.0
    return BatteryState(level, state.capacity), wasted


def run_trace(profile: EnergyProfile, policy: Policy, capacity: float,
              config: TraceConfig, *, trial: int = 0, method: str = "auto",
              record: bool = False):
    """Simulate one trace of config.horizon steps and return TraceStats.

    method "auto" picks the epoch fast path for Bernoulli profiles, the
    per-step reference loop otherwise; "per_step" and "epoch" force a path.
    With record=True (reference path only) returns (stats, TraceRecord).
    """
    if not (math.isfinite(capacity) and capacity >= 0.0):
        raise ValueError("capacity must be finite and non-negative")
    if config.initial_level > capacity:
        raise ValueError("initial_level exceeds capacity")
    rng = trial_rng(config.seed, trial)
    if method == "auto":
        method = "epoch" if isinstance(profile, Bernoulli) and not record else "per_step"
    if method == "epoch":
        if record:
            raise ValueError("record=True needs method='per_step'")
        if not isinstance(profile, Bernoulli):
            raise ValueError("epoch method requires a Bernoulli profile")
        return _run_epochs(profile, policy, capacity, config.horizon,
                           config.initial_level, rng)
    if method != "per_step":
        raise ValueError(f"unknown method {method!r}")
    return _run_per_step(profile, policy, capacity, config.horizon,
                         config.initial_level, rng, record)


def _run_per_step(profile, policy, capacity, n_steps, initial, rng, record):
    arrivals = profile.sample_array(rng, n_steps + 1)
    level = min(float(initial), capacity)
    harvested = 0.0
    allocated = 0.0
    wasted = 0.0
    log_sum = 0.0
    last_arrival = -1

    e0 = float(arrivals[0])
    harvested += e0
    if e0 > 0.0:
        last_arrival = 0
    level += e0
    if level > capacity:
        wasted += level - capacity
        level = capacity

    if record:
        alloc_rec = np.empty(n_steps)
        level_rec = np.empty(n_steps)

    allocate = policy.allocate
    log1p = math.log1p
    for t in range(n_steps):
        if last_arrival >= 0:
            g = allocate(level, t - last_arrival)
            if g < 0.0 or g > level + _FEAS_SLACK * (1.0 + level):
                raise FeasibilityError(
                    f"allocation {g!r} outside [0, level={level!r}] at step {t}"
                )
            if g > level:
                g = level
        else:
            g = 0.0
        log_sum += log1p(g)
        allocated += g
        level -= g
        e = float(arrivals[t + 1])
        harvested += e
        if e > 0.0:
            last_arrival = t + 1
        level += e
        if level > capacity:
            wasted += level - capacity
            level = capacity
        assert 0.0 <= level <= capacity
        if record:
            alloc_rec[t] = g
            level_rec[t] = level

    sum_rate = _HALF_INV_LN2 * log_sum
    stats = TraceStats(n_steps, sum_rate, sum_rate / n_steps, harvested,
                       allocated, wasted, level)
    if record:
        return stats, TraceRecord(arrivals, alloc_rec, level_rec)
    return stats


def _arrival_slots(rng, p: float, n_steps: int) -> np.ndarray:
    """Slots 0..n_steps that carry an arrival, from geometric gap draws."""
    expect = p * (n_steps + 1)
    chunk = max(16, int(expect + 10.0 * math.sqrt(expect + 1.0) + 16.0))
    gaps = []
    total = 0
    while total <= n_steps + 1:
        g = rng.geometric(p, size=chunk)
        gaps.append(g)
        total += int(g.sum())
        chunk *= 2
    times = np.cumsum(np.concatenate(gaps)) - 1
    return times[times <= n_steps]


def _epoch_lengths(times: np.ndarray, n_steps: int) -> np.ndarray:
    m = np.empty(len(times), dtype=np.int64)
    if len(times) > 1:
        m[:-1] = np.diff(times)
    m[-1] = n_steps - times[-1]
    return m


def _idle_stats(n_steps, initial, capacity) -> TraceStats:
    return TraceStats(n_steps, 0.0, 0.0, 0.0, 0.0, 0.0, min(initial, capacity))


def _run_epochs(profile, policy, capacity, n_steps, initial, rng):
    times = _arrival_slots(rng, profile.p, n_steps)
    if len(times) == 0:
        return _idle_stats(n_steps, initial, capacity)
    if isinstance(policy, ConstantFractionEpoch):
        return _epochs_constant_fraction(policy, profile.E, capacity, n_steps,
                                         initial, times)
    if isinstance(policy, ConstantFractionAdaptive):
        return _epochs_adaptive(policy, profile.E, capacity, n_steps, initial, times)
    if isinstance(policy, Uniform):
        return _epochs_uniform(policy, profile.E, capacity, n_steps, initial, times)
    raise ValueError(f"epoch method does not support policy {policy!r}")


def _epochs_constant_fraction(policy, E, capacity, n_steps, initial, times):
    q, budget = policy.p, policy.budget
    m = _epoch_lengths(times, n_steps)
    mmax = int(m.max())
    decay = (1.0 - q) ** np.arange(mmax, dtype=np.float64) if mmax else np.empty(0)
    gtil = q * budget * decay
    G = np.concatenate(([0.0], np.cumsum(gtil)))
    R = np.concatenate(([0.0], np.cumsum(_HALF_INV_LN2 * np.log1p(gtil))))
    init = min(initial, capacity)
    k = len(times)
    harvested = k * E

    if E >= capacity and budget <= min(capacity, E):
        # every arrival refills the battery, so each epoch starts at
        # capacity >= budget and the clamp never binds
        sum_rate = float(R[m].sum())
        allocated = float(G[m].sum())
        wasted = (init + E - capacity) + float((E - G[m[:-1]]).sum())
        final = capacity - float(G[m[-1]])
        return TraceStats(n_steps, sum_rate, sum_rate / n_steps, harvested,
                          allocated, wasted, final)

    level = init
    sum_rate = 0.0
    allocated = 0.0
    wasted = 0.0
    for i in range(k):
        level += E
        if level > capacity:
            wasted += level - capacity
            level = capacity
        mi = int(m[i])
        need = G[mi]
        if need <= level:
            sum_rate += R[mi]
            allocated += need
            level -= need
        else:
            # battery runs dry inside the epoch: full allocations up to
            # j* - 1, the remainder at j*, nothing afterwards
            jstar = int(np.searchsorted(G, level, side="right")) - 1
            residual = level - G[jstar]
            sum_rate += R[jstar] + _rate(residual)
            allocated += level
            level = 0.0
    return TraceStats(n_steps, sum_rate, sum_rate / n_steps, harvested,
                      allocated, wasted, level)


def _epochs_adaptive(policy, E, capacity, n_steps, initial, times):
    q = policy.p
    m = _epoch_lengths(times, n_steps)
    mmax = int(m.max())
    pow_tbl = (1.0 - q) ** np.arange(mmax + 1, dtype=np.float64)
    k = len(times)
    start_levels = np.empty(k)
    level = min(initial, capacity)
    wasted = 0.0
    allocated = 0.0
    for i in range(k):
        level += E
        if level > capacity:
            wasted += level - capacity
            level = capacity
        start_levels[i] = level
        epoch_end = level * pow_tbl[m[i]]  # level decays by (1-q) per use
        allocated += level - epoch_end
        level = epoch_end
    total = int(m.sum())
    if total:
        reps = np.repeat(start_levels, m)
        offsets = np.repeat(np.cumsum(m) - m, m)
        jj = np.arange(total, dtype=np.int64) - offsets
        sum_rate = float(np.sum(_HALF_INV_LN2 * np.log1p(q * pow_tbl[jj] * reps)))
    else:
        sum_rate = 0.0
    return TraceStats(n_steps, sum_rate, sum_rate / n_steps, k * E,
                      allocated, wasted, level)


def _epochs_uniform(policy, E, capacity, n_steps, initial, times):
    target = policy.target
    m = _epoch_lengths(times, n_steps)
    k = len(times)
    level = min(initial, capacity)
    wasted = 0.0
    allocated = 0.0
    steps_on = 0
    for i in range(k):
        level += E
        if level > capacity:
            wasted += level - capacity
            level = capacity
        if target > 0.0:
            full = int(level / target + 1e-12)
            on = min(int(m[i]), full)
            steps_on += on
            spend = on * target
            allocated += spend
            level = max(level - spend, 0.0)
    sum_rate = steps_on * _rate(target) if target > 0.0 else 0.0
    return TraceStats(n_steps, sum_rate, sum_rate / n_steps, k * E,
                      allocated, wasted, level)


def monte_carlo(profile: EnergyProfile, policy: Policy, capacity: float,
                config: TraceConfig, *, method: str = "auto",
                workers: int = 1) -> McEstimate:
    """Mean and standard error of the per-trace average rate over
    config.trials independent trials.

    Trial i draws from the (seed, i) stream and the reduction is an exact
    fixed-order sum, so the estimate does not depend on worker count or
    scheduling. stderr is the sample standard deviation over trial means
    divided by sqrt(trials) (0.0 when trials == 1).
    """

    def one(i: int) -> float:
        return run_trace(profile, policy, capacity, config,
                         trial=i, method=method).avg_rate

    if workers <= 1:
        means = [one(i) for i in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(one, range(config.trials)))
    mean = math.fsum(means) / config.trials
    if config.trials >= 2:
        var = math.fsum((x - mean) ** 2 for x in means) / (config.trials - 1)
        stderr = math.sqrt(var / config.trials)
    else:
        stderr = 0.0
    return McEstimate(mean, stderr, config.trials)
