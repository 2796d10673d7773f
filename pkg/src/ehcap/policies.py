"""Online energy-allocation policies.

A policy maps the current battery level and the number of channel uses since
the last energy arrival (the epoch index, 0 when a packet arrived this step)
to a spend 0 <= g <= battery. Policies are causal by construction: they see
nothing but quantities determined by past arrivals. Before the first arrival
the epoch index is None and every policy spends 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

__all__ = [
    "ConstantFractionEpoch",
    "ConstantFractionAdaptive",
    "Uniform",
    "Policy",
    "policy_from_json",
]


def _check_fraction(p: float) -> None:
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")


@dataclass(frozen=True)
class ConstantFractionEpoch:
    """Spend p(1-p)^j * budget at the j-th channel use of an epoch.

    The allocations over an infinite epoch sum to exactly `budget`, so the
    policy is feasible whenever the battery holds `budget` at every epoch
    start; the min() clamp only matters in partial-battery corner cases.
    With budget = min(B_max, E) and arrivals that refill the battery, the
    remaining charge after j uses is (1-p)^j * budget >= g(j).
    """

    p: float
    budget: float

    kind = "constant_fraction_epoch"

    def __post_init__(self):
        _check_fraction(self.p)
        if not (math.isfinite(self.budget) and self.budget >= 0.0):
            raise ValueError("budget must be finite and non-negative")

    def allocate(self, battery: float, epoch_index: Optional[int]) -> float:
        if epoch_index is None:
            return 0.0
        g = self.p * (1.0 - self.p) ** epoch_index * self.budget
        return g if g <= battery else battery

    def to_json(self) -> dict:
        return {"kind": self.kind, "p": self.p, "budget": self.budget}


@dataclass(frozen=True)
class ConstantFractionAdaptive:
    """Spend a fraction p of whatever the battery currently holds."""

    p: float

    kind = "constant_fraction_adaptive"

    def __post_init__(self):
        _check_fraction(self.p)

    def allocate(self, battery: float, epoch_index: Optional[int]) -> float:
        if epoch_index is None:
            return 0.0
        return self.p * battery

    def to_json(self) -> dict:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class Uniform:
    """Constant water level: spend `target` whenever the battery holds at
    least that much, and nothing otherwise (energy accumulates)."""

    target: float

    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.target) and self.target >= 0.0):
            raise ValueError("target must be finite and non-negative")

    def allocate(self, battery: float, epoch_index: Optional[int]) -> float:
        if epoch_index is None:
            return 0.0
        return self.target if battery >= self.target else 0.0

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": self.target}


Policy = Union[ConstantFractionEpoch, ConstantFractionAdaptive, Uniform]


def policy_from_json(obj: dict) -> Policy:
    """Rebuild a policy from its JSON form."""
    kind = obj.get("kind")
    if kind == "constant_fraction_epoch":
        return ConstantFractionEpoch(p=obj["p"], budget=obj["budget"])
    if kind == "constant_fraction_adaptive":
        return ConstantFractionAdaptive(p=obj["p"])
    if kind == "uniform":
        return Uniform(target=obj["target"])
    raise ValueError(f"unknown policy kind: {kind!r}")
