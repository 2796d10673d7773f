"""Deterministic one-dimensional search helpers."""

from __future__ import annotations

import math
from typing import Callable, Tuple

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-10) -> Tuple[float, float]:
    """Golden-section search for a maximum of a unimodal f on [lo, hi].

    Returns (x, f(x)) at the midpoint of the final bracket. The number of
    iterations depends only on (hi - lo) / tol, so runs are reproducible.
    """
    if not hi > lo:
        raise ValueError("golden_section_max needs hi > lo")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)
