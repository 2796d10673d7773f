"""i.i.d. energy-arrival profiles and their single-level reductions.

Each profile describes the common distribution of the energy harvested per
channel use. Energies are dimensionless (unit noise variance), so energy and
SNR coincide. Besides the usual cdf/mean functionals, profiles expose the
battery-truncated mean int_0^b (1 - F(y)) dy and the best single-level
reduction: the packet size x maximizing x * P(E_t >= x), which turns an
arbitrary arrival process into a (weaker) two-point one by discarding
everything except packets of at least x.

Survival probabilities use the left limit of the cdf, P(E_t >= x), so the
reduction supremum is attained at the atoms of discrete profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .optimize import golden_section_max

__all__ = [
    "EnergyProfile",
    "Bernoulli",
    "UniformInterval",
    "KLevel",
    "Harmonic",
    "BernoulliReduction",
    "profile_from_json",
]

# Reduction search on continuous profiles: fixed 1024-point grid (log-spaced
# when the support spans more than two decades) refined by golden section.
# Not configurable, so results are reproducible.
_GRID_POINTS = 1024
_LOG_GRID_SPAN = 100.0


@dataclass(frozen=True)
class BernoulliReduction:
    """Single-level view of an arrival process: packets of size ``x`` count
    as arrivals with probability ``p_red`` = P(E_t >= x); smaller packets are
    discarded, larger ones clipped. ``value`` = x * p_red."""

    x: float
    p_red: float
    value: float

    def __post_init__(self):
        if not self.x > 0.0:
            raise ValueError("reduction level must be positive")
        if not 0.0 <= self.p_red <= 1.0:
            raise ValueError("reduction probability must be in [0, 1]")
        if self.value != self.x * self.p_red:
            raise ValueError("value must equal x * p_red")


class EnergyProfile:
    """Base of the arrival-distribution union; see the concrete subclasses."""

    kind: str = ""

    def cdf(self, x: float) -> float:
        """F(x) = P(E_t <= x); right-continuous, 0 for x < 0."""
        raise NotImplementedError

    def survival_left(self, x: float) -> float:
        """P(E_t >= x) = 1 - F(x-), the left limit of the cdf at x."""
        raise NotImplementedError

    def mean(self) -> float:
        """E[E_t] = int_0^inf (1 - F(y)) dy, in closed form."""
        raise NotImplementedError

    def truncated_mean(self, b_max: float) -> float:
        """int_0^b_max (1 - F(y)) dy: effective mean arrival rate once every
        packet is clipped at a battery of size b_max."""
        raise NotImplementedError

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """`size` i.i.d. draws as a float array."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        """One i.i.d. draw."""
        return float(self.sample_array(rng, 1)[0])

    def best_reduction(self, b_max: float) -> BernoulliReduction:
        """Maximize h(x) = x * P(E_t >= x) over 0 < x <= b_max.

        Discrete profiles enumerate {min(A_i, b_max)}; ties go to the
        smallest x. Raises ValueError for profiles with no positive mass.
        """
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _check_bmax(b_max: float) -> None:
    if not b_max > 0.0:
        raise ValueError("b_max must be positive")


@dataclass(frozen=True)
class Bernoulli(EnergyProfile):
    """Packet of size E with probability p, nothing otherwise."""

    p: float
    E: float

    kind = "bernoulli"

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        if not (math.isfinite(self.E) and self.E >= 0.0):
            raise ValueError("E must be finite and non-negative")

    def cdf(self, x: float) -> float:
        if x < 0.0:
            return 0.0
        if x < self.E:
            return 1.0 - self.p
        return 1.0

    def survival_left(self, x: float) -> float:
        if x <= 0.0:
            return 1.0
        return self.p if x <= self.E else 0.0

    def mean(self) -> float:
        return self.p * self.E

    def truncated_mean(self, b_max: float) -> float:
        if b_max < 0.0:
            raise ValueError("b_max must be non-negative")
        return self.p * min(self.E, b_max)

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.where(rng.random(size) < self.p, self.E, 0.0)

    def best_reduction(self, b_max: float) -> BernoulliReduction:
        _check_bmax(b_max)
        if self.E <= 0.0:
            raise ValueError("no positive arrivals")
        x = min(self.E, b_max)
        pr = self.survival_left(x)
        return BernoulliReduction(x, pr, x * pr)

    def to_json(self) -> dict:
        return {"kind": self.kind, "p": self.p, "E": self.E}


@dataclass(frozen=True)
class UniformInterval(EnergyProfile):
    """Arrivals uniform on [A1, A2]."""

    A1: float
    A2: float

    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.A1) and math.isfinite(self.A2)):
            raise ValueError("endpoints must be finite")
        if not 0.0 <= self.A1 < self.A2:
            raise ValueError("need 0 <= A1 < A2")

    def cdf(self, x: float) -> float:
        if x < self.A1:
            return 0.0
        if x >= self.A2:
            return 1.0
        return (x - self.A1) / (self.A2 - self.A1)

    def survival_left(self, x: float) -> float:
        # continuous cdf: the left limit equals the cdf itself
        return 1.0 - self.cdf(x)

    def mean(self) -> float:
        return 0.5 * (self.A1 + self.A2)

    def truncated_mean(self, b_max: float) -> float:
        if b_max < 0.0:
            raise ValueError("b_max must be non-negative")
        if b_max <= self.A1:
            return b_max
        if b_max >= self.A2:
            return self.mean()
        w = self.A2 - self.A1
        return self.A1 + ((w * w) - (self.A2 - b_max) ** 2) / (2.0 * w)

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.A1 + (self.A2 - self.A1) * rng.random(size)

    def best_reduction(self, b_max: float) -> BernoulliReduction:
        _check_bmax(b_max)
        hi = min(b_max, self.A2)
        if self.A1 > 0.0 and hi / self.A1 > _LOG_GRID_SPAN:
            xs = np.geomspace(self.A1, hi, _GRID_POINTS)
        else:
            xs = np.linspace(hi / _GRID_POINTS, hi, _GRID_POINTS)
        surv = 1.0 - np.clip((xs - self.A1) / (self.A2 - self.A1), 0.0, 1.0)
        hs = xs * surv
        i = int(np.argmax(hs))  # first max: smallest x on ties
        x_best, h_best = float(xs[i]), float(hs[i])
        lo = float(xs[i - 1]) if i > 0 else 0.0
        up = float(xs[i + 1]) if i + 1 < len(xs) else hi

        def h(x: float) -> float:
            return x * self.survival_left(x)

        xg, hg = golden_section_max(h, lo, up, tol=max(hi * 1e-12, 1e-300))
        if hg > h_best:
            x_best, h_best = xg, hg
        pr = self.survival_left(x_best)
        return BernoulliReduction(x_best, pr, x_best * pr)

    def to_json(self) -> dict:
        return {"kind": self.kind, "A1": self.A1, "A2": self.A2}


@dataclass(frozen=True)
class KLevel(EnergyProfile):
    """Discrete arrivals: level A_i with probability p_i, strictly increasing
    positive levels. The residual mass 1 - sum(p_i) sits at zero and is never
    stored explicitly."""

    levels: Tuple[float, ...]
    probs: Tuple[float, ...]

    kind = "klevel"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(a) for a in self.levels))
        object.__setattr__(self, "probs", tuple(float(q) for q in self.probs))
        if len(self.levels) == 0 or len(self.levels) != len(self.probs):
            raise ValueError("levels and probs must be non-empty and same length")
        if not all(math.isfinite(a) and a > 0.0 for a in self.levels):
            raise ValueError("levels must be finite and positive")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if not all(0.0 < q <= 1.0 for q in self.probs):
            raise ValueError("probs must be in (0, 1]")
        if math.fsum(self.probs) > 1.0 + 1e-12:
            raise ValueError("probs must sum to at most 1")

    def cdf(self, x: float) -> float:
        if x < 0.0:
            return 0.0
        mass = 1.0 - math.fsum(self.probs)  # atom at zero
        for a, q in zip(self.levels, self.probs):
            if a <= x:
                mass += q
        return min(mass, 1.0)

    def survival_left(self, x: float) -> float:
        if x <= 0.0:
            return 1.0
        return math.fsum(q for a, q in zip(self.levels, self.probs) if a >= x)

    def mean(self) -> float:
        return math.fsum(a * q for a, q in zip(self.levels, self.probs))

    def truncated_mean(self, b_max: float) -> float:
        if b_max < 0.0:
            raise ValueError("b_max must be non-negative")
        return math.fsum(min(a, b_max) * q for a, q in zip(self.levels, self.probs))

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cuts = np.cumsum((1.0 - math.fsum(self.probs),) + self.probs)
        cuts[-1] = max(cuts[-1], 1.0)  # guard rounding of the last edge
        values = np.concatenate(([0.0], self.levels))
        idx = np.searchsorted(cuts, rng.random(size), side="right")
        return values[idx]

    def best_reduction(self, b_max: float) -> BernoulliReduction:
        _check_bmax(b_max)
        xs = np.unique(np.minimum(self.levels, b_max))
        hs = [x * self.survival_left(x) for x in xs]
        i = int(np.argmax(hs))
        x = float(xs[i])
        pr = self.survival_left(x)
        return BernoulliReduction(x, pr, x * pr)

    def to_json(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels), "probs": list(self.probs)}


@dataclass(frozen=True)
class Harmonic(EnergyProfile):
    """Heavy-tailed family with survival 1/x on [1, n) and an atom of mass
    1/n at n. The truncated mean grows like 1 + ln(n) while every rectangle
    x * P(E_t >= x) under the survival curve has area at most 1, so the
    single-level reduction loses an unbounded amount as n grows."""

    n: int

    kind = "harmonic"

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError("n must be an integer >= 1")

    def cdf(self, x: float) -> float:
        if x < 1.0:
            return 0.0
        if x < self.n:
            return 1.0 - 1.0 / x
        return 1.0

    def survival_left(self, x: float) -> float:
        if x <= 1.0:
            return 1.0
        if x <= self.n:
            return 1.0 / x
        return 0.0

    def mean(self) -> float:
        return 1.0 + math.log(self.n)

    def truncated_mean(self, b_max: float) -> float:
        if b_max < 0.0:
            raise ValueError("b_max must be non-negative")
        if b_max <= 1.0:
            return b_max
        return 1.0 + math.log(min(b_max, self.n))

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        # inverse transform: F(x) = 1 - 1/x on [1, n), atom at n
        return np.where(u < 1.0 - 1.0 / self.n, 1.0 / (1.0 - u), float(self.n))

    def best_reduction(self, b_max: float) -> BernoulliReduction:
        _check_bmax(b_max)
        # h(x) = min(x, 1) up to n: a plateau at 1, entered at x = 1
        x = min(1.0, b_max)
        pr = self.survival_left(x)
        return BernoulliReduction(x, pr, x * pr)

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n}


def profile_from_json(obj: dict) -> EnergyProfile:
    """Rebuild a profile from its JSON form, e.g. {"kind":"bernoulli","p":0.2,"E":10}."""
    kind = obj.get("kind")
    if kind == "bernoulli":
        return Bernoulli(p=obj["p"], E=obj["E"])
    if kind == "uniform":
        return UniformInterval(A1=obj["A1"], A2=obj["A2"])
    if kind == "klevel":
        return KLevel(levels=tuple(obj["levels"]), probs=tuple(obj["probs"]))
    if kind == "harmonic":
        return Harmonic(n=int(obj["n"]))
    raise ValueError(f"unknown profile kind: {kind!r}")
