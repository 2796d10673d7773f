"""Command-line driver: bound tables, Monte Carlo sweeps, self-checks.

Subcommands:
  bounds    capacity upper/lower bounds per battery size (JSON records)
  simulate  Monte Carlo policy rates vs analytic bounds over an SNR or
            battery grid (CSV, fixed column order)
  verify    run the invariant grid and write a machine-readable JSON report

SNR convention throughout: snr_db = 10 * log10(p * min(B_max, E)).
Exit codes: 0 pass, 1 check failure, 2 usage error, 3 numeric domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analytics
from .battery_sim import TraceConfig, monte_carlo, run_trace, trial_rng
from .energy_profiles import Bernoulli, Harmonic, KLevel, UniformInterval
from .policies import ConstantFractionAdaptive, ConstantFractionEpoch, Uniform

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3

CSV_HEADER = ("snr_db,p,E,bmax,policy,mc_rate_bits,mc_stderr_bits,"
              "series_bits,upper_bits,gap_bits")

_POLICY_NAMES = ("constant_fraction_epoch", "constant_fraction_adaptive", "uniform")

# verify grid: arrival probabilities x budgets (budget = min(B_max, E))
_GRID_P = (0.01, 0.05, 0.1, 0.2, 1.0 / 3.0, 0.5, 0.75, 0.95, 0.99)
_GRID_BUDGET = (1e-1, 1.0, 10.0, 1e2, 1e3, 1e4, 1e6)

# profiles for the random general-profile checks are drawn from a fixed
# internal stream so analytic report fields never depend on --seed
_PROFILE_STREAM_KEY = 20260809


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _parse_float_list(text: str, what: str) -> list:
    items = [t.strip() for t in text.split(",") if t.strip() != ""]
    if not items:
        raise UsageError(f"empty {what} grid")
    return [float(t) for t in items]


def _parse_span(text: str) -> list:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("span must be start:stop:step")
    start, stop, step_sz = (float(t) for t in parts)
    if step_sz <= 0.0 or stop < start:
        raise UsageError("empty span grid")
    vals = []
    k = 0
    x = start
    while x <= stop + 1e-9:
        vals.append(x)
        k += 1
        x = start + k * step_sz
    return vals


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _apply_config(args: argparse.Namespace, defaults: dict) -> None:
    """Fill unset flags from --config JSON, then from built-in defaults.
    CLI flags always win over the config file."""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in data.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and getattr(args, attr) is None:
                setattr(args, attr, value)
    for attr, value in defaults.items():
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _build_profile(args: argparse.Namespace):
    kind = args.profile
    if kind is None:
        raise UsageError("--profile is required")
    if kind == "bernoulli":
        if args.p is None or args.E is None:
            raise UsageError("bernoulli profile needs --p and --E")
        return Bernoulli(p=float(args.p), E=float(args.E))
    if kind == "uniform":
        if args.a1 is None or args.a2 is None:
            raise UsageError("uniform profile needs --a1 and --a2")
        return UniformInterval(A1=float(args.a1), A2=float(args.a2))
    if kind == "klevel":
        if args.levels is None or args.probs is None:
            raise UsageError("klevel profile needs --levels and --probs")
        levels = args.levels if isinstance(args.levels, (list, tuple)) \
            else _parse_float_list(args.levels, "levels")
        probs = args.probs if isinstance(args.probs, (list, tuple)) \
            else _parse_float_list(args.probs, "probs")
        return KLevel(levels=tuple(levels), probs=tuple(probs))
    if kind == "harmonic":
        if args.n is None:
            raise UsageError("harmonic profile needs --n")
        return Harmonic(n=int(args.n))
    raise UsageError(f"unknown profile {kind!r}")


def cmd_bounds(args: argparse.Namespace) -> int:
    _apply_config(args, {})
    profile = _build_profile(args)
    if args.bmax is None:
        raise UsageError("--bmax is required")
    grid = args.bmax if isinstance(args.bmax, (list, tuple)) \
        else _parse_float_list(str(args.bmax), "bmax")
    rows = []
    for b in grid:
        if isinstance(profile, Bernoulli):
            report = analytics.bernoulli_report(profile.p, b, profile.E)
            gap_bound = analytics.BERNOULLI_GAP_BITS
        else:
            report = analytics.general_bounds(profile, b)
            gap_bound = analytics.gap_bound_ratio(profile, b)
        row = {"profile": profile.to_json(), "bmax": b}
        row.update(report.to_json())
        row["gap_bound_bits"] = gap_bound
        rows.append(row)
    _write_text(args.out, json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


_SIMULATE_DEFAULTS = {
    "bmax_over_e": 1.0,
    "horizon": 100_000,
    "trials": 20,
    "seed": 1,
    "workers": 1,
}


def _simulate_grid(args) -> list:
    """(snr_db, p, E, bmax) points. With --snr-db the grid is laid out in
    dB of p*min(B_max, E); --bmax-over-e sets the B_max/E ratio."""
    p = float(args.p)
    ratio = float(args.bmax_over_e)
    if ratio <= 0.0:
        raise UsageError("--bmax-over-e must be positive")
    points = []
    if args.snr_db is not None:
        snrs = args.snr_db if isinstance(args.snr_db, (list, tuple)) \
            else _parse_span(str(args.snr_db))
        for snr in snrs:
            dominant = 10.0 ** (snr / 10.0) / p  # min(B_max, E)
            if ratio <= 1.0:
                bmax, e = dominant, dominant / ratio
            else:
                bmax, e = ratio * dominant, dominant
            points.append((snr, p, e, bmax))
    elif args.bmax_grid is not None:
        grid = args.bmax_grid if isinstance(args.bmax_grid, (list, tuple)) \
            else _parse_float_list(str(args.bmax_grid), "bmax")
        for bmax in grid:
            e = float(args.E) if args.E is not None else bmax / ratio
            dominant = min(bmax, e)
            if not dominant > 0.0:
                raise ValueError("p * min(B_max, E) must be positive")
            points.append((10.0 * math.log10(p * dominant), p, e, bmax))
    else:
        raise UsageError("one of --snr-db or --bmax-grid is required")
    if not points:
        raise UsageError("empty simulation grid")
    return points


def _make_policy(name: str, p: float, dominant: float):
    if name == "constant_fraction_epoch":
        return ConstantFractionEpoch(p=p, budget=dominant)
    if name == "constant_fraction_adaptive":
        return ConstantFractionAdaptive(p=p)
    if name == "uniform":
        return Uniform(target=p * dominant)
    raise UsageError(f"unknown policy {name!r}")


def cmd_simulate(args: argparse.Namespace) -> int:
    _apply_config(args, _SIMULATE_DEFAULTS)
    if args.p is None:
        raise UsageError("--p is required")
    points = _simulate_grid(args)
    policies = args.policy or list(_POLICY_NAMES)
    lines = [CSV_HEADER]
    for snr_db, p, e, bmax in points:
        dominant = min(bmax, e)
        series = analytics.policy_rate_series(p, dominant)
        upper = analytics.upper_bound(p, bmax, e)
        config = TraceConfig(horizon=int(args.horizon), seed=int(args.seed),
                             trials=int(args.trials))
        for name in policies:
            policy = _make_policy(name, p, dominant)
            est = monte_carlo(Bernoulli(p=p, E=e), policy, bmax, config,
                              workers=int(args.workers))
            lines.append(",".join([
                _fmt(snr_db), _fmt(p), _fmt(e), _fmt(bmax), name,
                _fmt(est.mean), _fmt(est.stderr), _fmt(series), _fmt(upper),
                _fmt(upper - est.mean),
            ]))
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _check_policy_gap() -> dict:
    worst = -math.inf
    for p in _GRID_P:
        for budget in _GRID_BUDGET:
            gap = (analytics.upper_bound(p, budget, budget)
                   - analytics.policy_rate_series(p, budget))
            worst = max(worst, gap)
    limit = analytics.POLICY_GAP_BITS
    return {
        "name": "policy_constant_gap",
        "passed": worst <= limit + 1e-9,
        "analytic": {"max_policy_gap_bits": worst, "limit_bits": limit},
        "mc": {},
    }


def _check_capacity_sandwich() -> dict:
    worst = -math.inf
    best = math.inf
    for p in _GRID_P:
        for budget in _GRID_BUDGET:
            for bmax, e in ((budget, 4.0 * budget), (2.0 * budget, budget),
                            (8.0 * budget, budget)):
                upper = analytics.upper_bound(p, bmax, e)
                lower = analytics.capacity_lower_bound(p, bmax, e)
                gap = upper - lower
                worst = max(worst, gap)
                best = min(best, gap)
    limit = analytics.BERNOULLI_GAP_BITS
    return {
        "name": "capacity_sandwich",
        "passed": best >= -1e-12 and worst <= limit + 1e-9,
        "analytic": {"max_gap_bits": worst, "min_gap_bits": best,
                     "limit_bits": limit},
        "mc": {},
    }


def _check_gap_constants() -> dict:
    pieces = analytics.gap_constant_breakdown()
    ok = (0.9725 <= pieces.small_budget_rate <= 0.9735
          and abs(pieces.tail_penalty_limit - 1.0 / (2.0 * math.log(2.0))) <= 1e-3
          and abs(pieces.penalty_entropy_max - 1.52) <= 0.01
          and abs(pieces.penalty_entropy_argmax - 0.413) <= 0.005)
    return {
        "name": "gap_constant_pieces",
        "passed": ok,
        "analytic": {
            "small_budget_rate_bits": pieces.small_budget_rate,
            "tail_penalty_limit_bits": pieces.tail_penalty_limit,
            "penalty_entropy_max_bits": pieces.penalty_entropy_max,
            "penalty_entropy_argmax": pieces.penalty_entropy_argmax,
        },
        "mc": {},
    }


def _check_general_profiles() -> dict:
    rng = np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(_PROFILE_STREAM_KEY), np.uint64(0)], dtype=np.uint64)))
    margins = []
    ok = True
    for _ in range(20):
        a1 = float(rng.uniform(0.0, 10.0))
        a2 = a1 + float(rng.uniform(0.5, 20.0))
        mid = 0.5 * (a1 + a2)
        for bmax in (mid + float(rng.uniform(0.0, 30.0)),
                     float(rng.uniform(a1, mid)) if mid > a1 else None,
                     float(rng.uniform(0.1 * a1, a1)) if a1 > 0 else None):
            if bmax is None or not bmax > 0.0:
                continue
            bound = analytics.uniform_profile_report(a1, a2, bmax).gap_bound
            gap = analytics.general_bounds(UniformInterval(a1, a2), bmax).gap
            margins.append(bound - gap)
            ok = ok and gap <= bound + 1e-9
    for _ in range(20):
        k = int(rng.integers(1, 9))
        levels = np.cumsum(rng.uniform(0.2, 5.0, size=k))
        probs = rng.uniform(0.01, 1.0, size=k)
        probs = probs / probs.sum() * float(rng.uniform(0.3, 1.0))
        profile = KLevel(tuple(levels), tuple(probs))
        bmax = float(levels[-1] * rng.uniform(1.0, 3.0))
        bound = 0.5 * math.log2(k) + analytics.BERNOULLI_GAP_BITS
        gap = analytics.general_bounds(profile, bmax).gap
        margins.append(bound - gap)
        ok = ok and gap <= bound + 1e-9
    harmonic_dev = 0.0
    for n in (2, 10, 100, 10_000):
        ratio = analytics.gap_bound_ratio(Harmonic(n), float(n))
        formula = 0.5 * math.log2(1.0 + math.log(n) / 2.0) + analytics.BERNOULLI_GAP_BITS
        harmonic_dev = max(harmonic_dev, abs(ratio - formula))
    ok = ok and harmonic_dev <= 1e-9
    return {
        "name": "general_profile_gaps",
        "passed": ok,
        "analytic": {"min_margin_bits": min(margins),
                     "harmonic_formula_dev_bits": harmonic_dev},
        "mc": {},
    }


def _check_renewal_reward(seed: int, horizon: int, trials: int, tol: float) -> dict:
    p, budget = 0.2, 10.0
    series = analytics.policy_rate_series(p, budget)
    config = TraceConfig(horizon=horizon, seed=seed, trials=trials)
    est = monte_carlo(Bernoulli(p=p, E=budget),
                      ConstantFractionEpoch(p=p, budget=budget), budget, config)
    err = abs(est.mean - series)
    return {
        "name": "renewal_reward_mc",
        "passed": err <= max(3.0 * est.stderr, tol),
        "analytic": {"series_bits": series, "tolerance_bits": tol},
        "mc": {"mc_rate_bits": est.mean, "mc_stderr_bits": est.stderr,
               "abs_error_bits": err},
    }


def _check_sim_invariants(seed: int) -> dict:
    rng = trial_rng(seed, 999_999)
    profiles = (Bernoulli(0.3, 5.0), UniformInterval(0.0, 4.0),
                KLevel((1.0, 3.0), (0.2, 0.5)), Harmonic(10))
    worst_resid = 0.0
    ok = True
    for i in range(24):
        profile = profiles[i % len(profiles)]
        cap = float(rng.uniform(0.5, 12.0))
        which = i % 3
        if which == 0:
            policy = ConstantFractionEpoch(0.3, min(cap, 5.0))
        elif which == 1:
            policy = ConstantFractionAdaptive(0.25)
        else:
            policy = Uniform(target=float(rng.uniform(0.0, cap)))
        config = TraceConfig(horizon=2000, seed=int(rng.integers(0, 2**32)))
        stats = run_trace(profile, policy, cap, config, method="per_step")
        balance = stats.allocated + stats.final_level + stats.wasted
        resid = abs(balance - stats.harvested) / max(1.0, stats.harvested)
        worst_resid = max(worst_resid, resid)
        ok = ok and resid <= 1e-9
    return {
        "name": "simulation_invariants",
        "passed": ok,
        "analytic": {},
        "mc": {"max_conservation_residual": worst_resid},
    }


_VERIFY_DEFAULTS = {"seed": 1, "horizon": 200_000, "trials": 10, "tol": 0.01}


def cmd_verify(args: argparse.Namespace) -> int:
    _apply_config(args, _VERIFY_DEFAULTS)
    seed = int(args.seed)
    horizon = int(args.horizon)
    trials = int(args.trials)
    tol = float(args.tol)
    checks = []
    for fn in (_check_policy_gap,
               _check_capacity_sandwich,
               _check_gap_constants,
               _check_general_profiles,
               lambda: _check_renewal_reward(seed, horizon, trials, tol),
               lambda: _check_sim_invariants(seed)):
        try:
            checks.append(fn())
        except Exception as exc:  # a failed theorem assert is a failed check
            checks.append({"name": getattr(fn, "__name__", "check"),
                           "passed": False, "analytic": {}, "mc": {},
                           "error": f"{type(exc).__name__}: {exc}"})
    passed = all(c["passed"] for c in checks)
    report = {"passed": passed, "seed": seed, "horizon": horizon,
              "trials": trials, "checks": checks}
    _write_text(args.out, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehcap",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pb = sub.add_parser("bounds", help="capacity bound table (JSON)")
    pb.add_argument("--profile", choices=("bernoulli", "uniform", "klevel", "harmonic"))
    pb.add_argument("--p", type=float)
    pb.add_argument("--E", type=float)
    pb.add_argument("--a1", type=float)
    pb.add_argument("--a2", type=float)
    pb.add_argument("--levels")
    pb.add_argument("--probs")
    pb.add_argument("--n", type=int)
    pb.add_argument("--bmax", help="comma-separated battery sizes")
    pb.add_argument("--out")
    pb.add_argument("--config")
    pb.set_defaults(func=cmd_bounds)

    ps = sub.add_parser("simulate", help="Monte Carlo policy sweep (CSV)")
    ps.add_argument("--p", type=float, help="arrival probability")
    ps.add_argument("--snr-db", dest="snr_db",
                    help="start:stop:step grid in dB of p*min(B_max, E)")
    ps.add_argument("--bmax-grid", dest="bmax_grid",
                    help="comma-separated battery sizes (alternative to --snr-db)")
    ps.add_argument("--bmax-over-e", dest="bmax_over_e", type=float,
                    help="B_max / E ratio (default 1)")
    ps.add_argument("--E", type=float, help="packet size (with --bmax-grid)")
    ps.add_argument("--policy", action="append", choices=_POLICY_NAMES,
                    help="repeatable; default: all policies")
    ps.add_argument("--horizon", type=int)
    ps.add_argument("--trials", type=int)
    ps.add_argument("--seed", type=int)
    ps.add_argument("--workers", type=int)
    ps.add_argument("--out")
    ps.add_argument("--config")
    ps.set_defaults(func=cmd_simulate)

    pv = sub.add_parser("verify", help="run the invariant grid, JSON report")
    pv.add_argument("--seed", type=int)
    pv.add_argument("--horizon", type=int)
    pv.add_argument("--trials", type=int)
    pv.add_argument("--tol", type=float, help="MC-vs-series tolerance in bits")
    pv.add_argument("--out")
    pv.add_argument("--config")
    pv.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
