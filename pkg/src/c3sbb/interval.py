"""Closed-interval arithmetic on ``(lo, hi)`` pairs."""
from __future__ import annotations

from .errors import ZeroDenominatorRange

Interval = tuple[float, float]


def add(a: Interval, b: Interval) -> Interval:
    return a[0] + b[0], a[1] + b[1]


def scale(a: Interval, c: float) -> Interval:
    lo, hi = a[0] * c, a[1] * c
    return (lo, hi) if lo <= hi else (hi, lo)


def mul(a: Interval, b: Interval) -> Interval:
    corners = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(corners), max(corners)


def contains_zero(a: Interval) -> bool:
    return a[0] <= 0.0 <= a[1]


def div(a: Interval, b: Interval) -> Interval:
    if contains_zero(b):
        raise ZeroDenominatorRange(f"denominator interval {b} contains zero")
    corners = (a[0] / b[0], a[0] / b[1], a[1] / b[0], a[1] / b[1])
    return min(corners), max(corners)


def linear(terms, bounds_lo, bounds_hi, const: float = 0.0) -> Interval:
    """Range of ``const + sum(c * w[i])`` over the box."""
    lo = hi = const
    for i, c in terms:
        if c >= 0:
            lo += c * bounds_lo[i]
            hi += c * bounds_hi[i]
        else:
            lo += c * bounds_hi[i]
            hi += c * bounds_lo[i]
    return lo, hi
