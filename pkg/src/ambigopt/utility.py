"""Risk preferences: utility functions on positive wealth.

Three families are supported: logarithmic, power (crra exponent in (0,1) or
negative), and a tabulated family interpolated piecewise-linearly, which
preserves monotonicity and concavity of the data exactly. The tabulated
family exists for testing; it is not admitted in acceptance runs because it
is neither strictly concave between knots nor Inada beyond its grid.

Conventions: U(0) is the right limit (-inf for log and negative power, 0 for
power exponents in (0,1)). The convex conjugate is V(y) = sup_x (U(x) - xy).
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import GridOutOfRange, NegativeWealth, NonpositiveDual, NotApplicable
from .extreal import NEG_INF, POS_INF


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """A strictly increasing, strictly concave utility function.

    ``family`` is one of "log", "power", "table". Power requires ``exponent``
    in (0,1) or (-inf,0); table requires strictly increasing ``points`` with
    strictly decreasing chord slopes.
    """

    family: str
    exponent: float | None = None
    points: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.family == "log":
            return
        if self.family == "power":
            p = self.exponent
            if p is None or not (0.0 < p < 1.0 or p < 0.0):
                raise ValueError("power exponent must lie in (0,1) or be negative")
            return
        if self.family == "table":
            pts = self.points
            if pts is None or len(pts) < 3:
                raise ValueError("table needs at least three points")
            xs = np.array([q[0] for q in pts], dtype=float)
            us = np.array([q[1] for q in pts], dtype=float)
            if xs[0] < 0:
                raise ValueError("table abscissae must be non-negative")
            if not (np.diff(xs) > 0).all():
                raise ValueError("table abscissae must be strictly increasing")
            if not (np.diff(us) > 0).all():
                raise ValueError("table values must be strictly increasing")
            slopes = np.diff(us) / np.diff(xs)
            if not (np.diff(slopes) < 0).all():
                raise ValueError("table chord slopes must be strictly decreasing")
            object.__setattr__(self, "points", tuple((float(a), float(b)) for a, b in pts))
            return
        raise ValueError(f"unknown utility family {self.family!r}")

    def _table_arrays(self):
        xs = np.array([q[0] for q in self.points], dtype=float)
        us = np.array([q[1] for q in self.points], dtype=float)
        return xs, us


def log_utility() -> UtilitySpec:
    return UtilitySpec(family="log")


def power_utility(exponent: float) -> UtilitySpec:
    return UtilitySpec(family="power", exponent=exponent)


def table_utility(points) -> UtilitySpec:
    return UtilitySpec(family="table", points=tuple(tuple(q) for q in points))


def eval_utility(spec: UtilitySpec, x: float) -> float:
    """U(x) for x >= 0, with U(0) taken as the right limit."""
    if x < 0:
        raise NegativeWealth(f"wealth {x} is negative")
    if spec.family == "log":
        return math.log(x) if x > 0 else NEG_INF
    if spec.family == "power":
        p = spec.exponent
        if x == 0.0:
            return 0.0 if p > 0 else NEG_INF
        return x ** p / p
    xs, us = spec._table_arrays()
    if x < xs[0] or x > xs[-1]:
        raise GridOutOfRange(f"wealth {x} outside tabulated range [{xs[0]}, {xs[-1]}]")
    return float(np.interp(x, xs, us))


def marginal(spec: UtilitySpec, x: float) -> float:
    """U'(x). The tabulated family uses the left divided difference (the
    slope of the segment ending at x; the first segment below the grid start)."""
    if x < 0:
        raise NegativeWealth(f"wealth {x} is negative")
    if spec.family == "log":
        return POS_INF if x == 0.0 else 1.0 / x
    if spec.family == "power":
        if x == 0.0:
            return POS_INF
        return x ** (spec.exponent - 1.0)
    xs, us = spec._table_arrays()
    if x < xs[0] or x > xs[-1]:
        raise GridOutOfRange(f"wealth {x} outside tabulated range [{xs[0]}, {xs[-1]}]")
    slopes = np.diff(us) / np.diff(xs)
    k = bisect_left(list(xs), x)
    if k == 0:
        return float(slopes[0])
    return float(slopes[k - 1])


def inverse_marginal(spec: UtilitySpec, y: float) -> float:
    """I(y) with U'(I(y)) = y; bisection over the grid for the tabulated
    family (marginal there is a step function, so the breakpoint is returned)."""
    if y <= 0:
        raise NonpositiveDual(f"dual argument {y} must be positive")
    if spec.family == "log":
        return 1.0 / y
    if spec.family == "power":
        return y ** (1.0 / (spec.exponent - 1.0))
    xs, _ = spec._table_arrays()
    lo, hi = float(xs[0]), float(xs[-1])
    if marginal(spec, lo) <= y:
        return lo
    if marginal(spec, hi) >= y:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if marginal(spec, mid) > y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def conjugate(spec: UtilitySpec, y: float) -> float:
    """Convex conjugate V(y) = sup_{x>=0} (U(x) - xy).

    Closed form for log and power; for the tabulated family the supremum over
    the (piecewise-linear, domain-restricted) table is attained at a knot.
    """
    if y <= 0:
        raise NonpositiveDual(f"dual argument {y} must be positive")
    if spec.family == "log":
        return -math.log(y) - 1.0
    if spec.family == "power":
        p = spec.exponent
        return (1.0 - p) / p * y ** (p / (p - 1.0))
    xs, us = spec._table_arrays()
    return float(np.max(us - xs * y))


def asymptotic_elasticity(spec: UtilitySpec) -> float:
    """limsup of x U'(x) / U(x) as wealth grows.

    Exactly 0 for log and the exponent for power utilities in (0,1). For the
    tabulated family the limsup is estimated over the top decade of the grid.
    Raises NotApplicable when U is eventually non-positive (negative power).
    """
    if spec.family == "log":
        return 0.0
    if spec.family == "power":
        p = spec.exponent
        if p < 0:
            raise NotApplicable("utility is eventually non-positive")
        return p
    xs, us = spec._table_arrays()
    if us[-1] <= 0:
        raise NotApplicable("tabulated utility is non-positive at the grid top")
    cutoff = xs[-1] / 10.0
    ratios = []
    for k in range(1, len(xs)):
        if xs[k] >= cutoff and us[k] > 0:
            slope = (us[k] - us[k - 1]) / (xs[k] - xs[k - 1])
            ratios.append(xs[k] * slope / us[k])
    if not ratios:
        raise NotApplicable("no positive tail values on the grid")
    return float(max(ratios))
