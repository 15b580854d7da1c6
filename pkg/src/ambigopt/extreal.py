"""Extended-real conventions used throughout the package.

All extended-real arithmetic is funnelled through the helpers here so the
conventions live in one place: expectations ignore zero-probability states
(so 0 * (+-inf) contributes nothing), and an expectation whose positive and
negative parts are both infinite is defined as +inf.
"""

from __future__ import annotations

import numpy as np

POS_INF = float("inf")
NEG_INF = float("-inf")


def q_expectation(q, values) -> float:
    """Expectation of extended-real ``values`` under the weight vector ``q``.

    States with zero weight are ignored entirely. If any surviving value is
    +inf the result is +inf (this covers the doubly-infinite case, which is
    defined as +inf); otherwise a surviving -inf gives -inf; otherwise the
    plain dot product is returned.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(values, dtype=float)
    if q.shape != v.shape:
        raise ValueError("weights and values must have matching shapes")
    live = q > 0.0
    vl = v[live]
    if np.isposinf(vl).any():
        return POS_INF
    if np.isneginf(vl).any():
        return NEG_INF
    if live.all():
        return float(np.dot(q, v))
    return float(np.dot(q[live], vl))


def safe_sub(a: float, b: float) -> float:
    """a - b with equal infinities treated as zero (used for violation sizes)."""
    if a == b:
        return 0.0
    return a - b


def is_finite(x: float) -> bool:
    return bool(np.isfinite(x))
