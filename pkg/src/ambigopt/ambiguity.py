"""Ambiguity attitudes: index functions behind robust utility functionals.

A quasiconcave utility functional admits the robust representation
``phi(X) = inf_Q G(Q, E_Q[X])`` over probability measures absolutely
continuous with respect to the reference. The index G is non-decreasing and
right-continuous in its scalar argument, jointly quasiconvex, and has an
asymptotic maximum common to all measures; it is extended by the conventions
``G(Q, -inf) = -inf`` and ``G(Q, +inf) = AM(G)``.

Four families are implemented: multiple priors (worst case over a measure
set), variational (additive penalty, entropic or tabulated), smooth
certainty equivalents (handled directly, not through an index), and a
tabulated index on a generator-by-level grid for testing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import nnls
from scipy.special import rel_entr

from . import optim
from .errors import (
    DimensionMismatch,
    DomainError,
    GridOutOfRange,
    MeasureInvariantViolated,
    UnsupportedVariant,
)
from .extreal import NEG_INF, POS_INF, q_expectation

_SUM_TOL = 1e-12


# --- measures and measure families ------------------------------------------


def _as_prob_vector(values, *, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=float).copy()
    if v.ndim != 1:
        raise MeasureInvariantViolated(f"{what} must be one-dimensional")
    if (v < -1e-15).any():
        raise MeasureInvariantViolated(f"{what} has a negative component")
    v[v < 0] = 0.0
    if abs(v.sum() - 1.0) > _SUM_TOL:
        raise MeasureInvariantViolated(
            f"{what} sums to {v.sum():.17g}, expected 1 within {_SUM_TOL}")
    v.flags.writeable = False
    return v


@dataclass(frozen=True, eq=False)
class Measure:
    """A probability vector over states, carried with the reference vector it
    is absolutely continuous with respect to (the reference is strictly
    positive, so every probability vector qualifies)."""

    probabilities: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        q = _as_prob_vector(self.probabilities, what="probabilities")
        p = np.asarray(self.reference, dtype=float).copy()
        if p.shape != q.shape:
            raise DimensionMismatch("measure and reference lengths differ")
        if (p <= 0).any():
            raise MeasureInvariantViolated("reference must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise MeasureInvariantViolated("reference must sum to 1")
        p.flags.writeable = False
        object.__setattr__(self, "probabilities", q)
        object.__setattr__(self, "reference", p)

    @property
    def n_states(self) -> int:
        return self.probabilities.size

    @property
    def density(self) -> np.ndarray:
        """dQ/dP per state."""
        return self.probabilities / self.reference

    @property
    def support(self) -> np.ndarray:
        return self.probabilities > 0.0

    def key(self) -> bytes:
        return self.probabilities.tobytes()

    @classmethod
    def dirac(cls, state: int, reference) -> "Measure":
        p = np.asarray(reference, dtype=float)
        q = np.zeros_like(p)
        q[state] = 1.0
        return cls(q, p)


def _hull_weights(P: np.ndarray, q: np.ndarray, tol: float = 1e-8):
    """Non-negative weights representing q as a combination of the rows of P,
    or None when q is outside the hull. Deterministic (non-negative least
    squares on the stacked system)."""
    A = np.vstack([P.T, np.ones(P.shape[0])])
    b = np.concatenate([q, [1.0]])
    w, residual = nnls(A, b)
    if residual > tol:
        return None
    return w


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Either an explicit generator hull or the full simplex over the
    reference's states."""

    kind: str
    generators: tuple[Measure, ...] = ()
    reference: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "generators":
            if not self.generators:
                raise MeasureInvariantViolated("generator list is empty")
            n = self.generators[0].n_states
            for g in self.generators:
                if g.n_states != n:
                    raise DimensionMismatch("generators have mixed lengths")
            object.__setattr__(self, "reference", self.generators[0].reference)
        elif self.kind == "full_simplex":
            if self.reference is None:
                raise MeasureInvariantViolated("full simplex needs a reference")
            ref = np.asarray(self.reference, dtype=float).copy()
            ref.flags.writeable = False
            object.__setattr__(self, "reference", ref)
        else:
            raise ValueError(f"unknown family kind {self.kind!r}")

    @classmethod
    def full_simplex(cls, reference) -> "MeasureFamily":
        return cls(kind="full_simplex", reference=np.asarray(reference, dtype=float))

    @classmethod
    def from_generators(cls, measures) -> "MeasureFamily":
        return cls(kind="generators", generators=tuple(measures))

    @property
    def n_states(self) -> int:
        if self.kind == "generators":
            return self.generators[0].n_states
        return int(np.asarray(self.reference).size)

    def vertex_matrix(self) -> np.ndarray:
        """Rows are the extreme measures searched over: the generators, or the
        Dirac measures for the full simplex."""
        if self.kind == "generators":
            return np.array([g.probabilities for g in self.generators])
        return np.eye(self.n_states)

    def vertex_measures(self) -> list[Measure]:
        if self.kind == "generators":
            return list(self.generators)
        return [Measure.dirac(i, self.reference) for i in range(self.n_states)]

    def measure(self, weights) -> Measure:
        w = np.asarray(weights, dtype=float)
        q = w @ self.vertex_matrix()
        q = q / q.sum()
        return Measure(q, self.reference)

    def contains(self, q: Measure | np.ndarray, tol: float = 1e-9) -> bool:
        probs = q.probabilities if isinstance(q, Measure) else np.asarray(q, float)
        if probs.size != self.n_states:
            raise DimensionMismatch("measure length does not match family")
        if self.kind == "full_simplex":
            return True
        return _hull_weights(self.vertex_matrix(), probs, tol=tol) is not None

    def sample(self, rng: np.random.Generator) -> Measure:
        P = self.vertex_matrix()
        w = rng.dirichlet(np.ones(P.shape[0]))
        return self.measure(w)


# --- ambiguity index variants -------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiplePriors:
    """Indicator index: G(q, t) = t on the prior family, +inf off it."""

    family: MeasureFamily
    asymptotic_maximum: float = POS_INF


@dataclass(frozen=True, eq=False)
class EntropicPenalty:
    """gamma(q) = (1/theta) * KL(q | p); natural log, 0 ln 0 = 0."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")


@dataclass(frozen=True, eq=False)
class TabulatedPenalty:
    """Penalty values on a generator list, convexified over their hull."""

    measures: tuple[Measure, ...]
    gammas: tuple[float, ...]

    def __post_init__(self):
        if len(self.measures) != len(self.gammas) or not self.measures:
            raise ValueError("penalty table needs matching, non-empty lists")
        if min(self.gammas) < 0:
            raise ValueError("penalties must be non-negative")


@dataclass(frozen=True, eq=False)
class Variational:
    """Additive-penalty index: G(q, t) = t + gamma(q)."""

    penalty: Union[EntropicPenalty, TabulatedPenalty]
    asymptotic_maximum: float = POS_INF


@dataclass(frozen=True, eq=False)
class SmoothCriterion:
    """Certainty-equivalent criterion over a second-order mixture.

    phi is increasing concave: exponential(alpha) is u -> -exp(-alpha u)
    (alpha = 0 degenerates to the identity), power(beta) is u -> u**beta on
    non-negative arguments with beta in (0,1). Evaluated directly; this
    variant has no implemented index, so index operations refuse it.
    """

    phi_kind: str
    phi_param: float
    mixture: tuple[tuple[Measure, float], ...]
    asymptotic_maximum: float | None = None

    def __post_init__(self):
        if self.phi_kind == "exponential":
            if self.phi_param < 0:
                raise ValueError("alpha must be non-negative")
        elif self.phi_kind == "power":
            if not 0 < self.phi_param < 1:
                raise ValueError("beta must lie in (0,1)")
        else:
            raise ValueError(f"unknown phi kind {self.phi_kind!r}")
        total = sum(w for _, w in self.mixture)
        if not self.mixture or abs(total - 1.0) > _SUM_TOL:
            raise ValueError("mixture weights must sum to 1")
        if min(w for _, w in self.mixture) < 0:
            raise ValueError("mixture weights must be non-negative")


@dataclass(frozen=True, eq=False)
class CustomGrid:
    """Tabulated index on (generator, level) nodes.

    Evaluation is bilinear: piecewise-linear in the level argument along each
    generator row, linear in deterministic hull weights across generators.
    Rows are forced non-decreasing by a running maximum at construction (with
    a warning) because downstream solvers rely on monotonicity.
    """

    generators: tuple[Measure, ...]
    t_grid: np.ndarray
    values: np.ndarray
    asymptotic_maximum: float = POS_INF
    force_monotone: bool = True

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float).copy()
        v = np.asarray(self.values, dtype=float).copy()
        if t.ndim != 1 or not (np.diff(t) > 0).all():
            raise ValueError("t grid must be strictly increasing")
        if not np.isfinite(t).all():
            raise GridOutOfRange("t grid must be finite (infinities are handled "
                                 "by the index conventions, not the grid)")
        if v.shape != (len(self.generators), t.size):
            raise DimensionMismatch("values must be (generators, t-grid) shaped")
        if np.isneginf(v[:, 1:]).any():
            raise GridOutOfRange("-inf plateaus are only allowed at the lower "
                                 "grid boundary")
        forced = np.maximum.accumulate(v, axis=1)
        if not np.array_equal(forced, v, equal_nan=True):
            warnings.warn("custom index grid is not monotone in t; "
                          "forcing with a running maximum"
                          if self.force_monotone else
                          "custom index grid is not monotone in t",
                          stacklevel=2)
            if not self.force_monotone:
                forced = v
        if np.isfinite(forced).all() and forced.max() > self.asymptotic_maximum + 1e-9:
            raise ValueError("grid values exceed the declared asymptotic maximum")
        t.flags.writeable = False
        forced.flags.writeable = False
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", forced)
        object.__setattr__(self, "generators", tuple(self.generators))

    def raw_rows(self) -> np.ndarray:
        return self.values


AmbiguitySpec = Union[MultiplePriors, Variational, SmoothCriterion, CustomGrid]


def asymptotic_maximum(spec: AmbiguitySpec) -> float:
    am = spec.asymptotic_maximum
    if am is None:
        raise UnsupportedVariant("this variant has no index representation")
    return am


def default_family(spec: AmbiguitySpec, reference=None) -> MeasureFamily:
    """The natural search family of a spec: its prior set for multiple priors,
    the support of its penalty or grid otherwise, the full simplex for the
    entropic penalty (which is finite everywhere)."""
    if isinstance(spec, MultiplePriors):
        return spec.family
    if isinstance(spec, Variational):
        if isinstance(spec.penalty, EntropicPenalty):
            if reference is None:
                raise ValueError("entropic penalty needs a reference to build "
                                 "its full-simplex family")
            return MeasureFamily.full_simplex(reference)
        return MeasureFamily.from_generators(spec.penalty.measures)
    if isinstance(spec, CustomGrid):
        return MeasureFamily.from_generators(spec.generators)
    if isinstance(spec, SmoothCriterion):
        return MeasureFamily.from_generators([m for m, _ in spec.mixture])
    raise UnsupportedVariant(f"unknown spec {type(spec).__name__}")


# --- penalties and index evaluation ------------------------------------------


def penalty_value(spec: Variational, q: Measure) -> float:
    """gamma(q); +inf outside the hull for the tabulated penalty."""
    pen = spec.penalty
    if isinstance(pen, EntropicPenalty):
        return float(rel_entr(q.probabilities, q.reference).sum()) / pen.theta
    P = np.array([m.probabilities for m in pen.measures])
    gam = np.asarray(pen.gammas, dtype=float)
    w = _hull_weights(P, q.probabilities)
    if w is None:
        return POS_INF
    # convexification: cheapest representation of q by the table entries
    from scipy.optimize import linprog

    res = linprog(gam, A_eq=np.vstack([P.T, np.ones(len(gam))]),
                  b_eq=np.concatenate([q.probabilities, [1.0]]),
                  bounds=[(0, None)] * len(gam), method="highs")
    if not res.success:
        return float(w @ gam)
    return float(res.fun)


def _custom_rows_at(spec: CustomGrid, t: float) -> np.ndarray:
    tg = spec.t_grid
    if t < tg[0] or t > tg[-1]:
        raise GridOutOfRange(f"level {t} outside grid [{tg[0]}, {tg[-1]}]")
    return np.array([np.interp(t, tg, row) for row in spec.values])


def ambiguity_index(spec: AmbiguitySpec, q: Measure, t: float, *,
                    weights_hint: np.ndarray | None = None,
                    member_hint: bool | None = None) -> float:
    """G(q, t) with the extended conventions applied first:
    G(q, -inf) = -inf and G(q, +inf) = the asymptotic maximum.

    ``weights_hint``/``member_hint`` let trusted callers (axiom sampler,
    solvers walking a hull parametrization) skip membership solves.
    """
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth criteria are evaluated directly, "
                                 "not through an index")
    if t == NEG_INF:
        return NEG_INF
    if t == POS_INF:
        return asymptotic_maximum(spec)
    if isinstance(spec, MultiplePriors):
        member = member_hint if member_hint is not None else spec.family.contains(q)
        return float(t) if member else POS_INF
    if isinstance(spec, Variational):
        return float(t) + penalty_value(spec, q)
    if isinstance(spec, CustomGrid):
        if weights_hint is not None:
            w = np.asarray(weights_hint, dtype=float)
        else:
            P = np.array([g.probabilities for g in spec.generators])
            w = _hull_weights(P, q.probabilities)
            if w is None:
                return POS_INF
        rows = _custom_rows_at(spec, t)
        return float(w @ rows)
    raise UnsupportedVariant(f"unknown spec {type(spec).__name__}")


def index_left_inverse(spec: AmbiguitySpec, q: Measure, m: float, *,
                       weights_hint: np.ndarray | None = None) -> float:
    """inf{t : G(q, t) >= m}.

    Closed form for multiple priors (m on members, -inf off them, where the
    index is identically +inf) and variational (m - gamma(q)); bisection on
    the grid for the tabulated index, returning +inf when the level m is
    unattainable for this measure. Satisfies G(q,t) >= m iff
    t >= index_left_inverse(q,m) on the evaluable range.
    """
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth criteria have no index")
    if isinstance(spec, MultiplePriors):
        return float(m) if spec.family.contains(q) else NEG_INF
    if isinstance(spec, Variational):
        gam = penalty_value(spec, q)
        if gam == POS_INF:
            return NEG_INF
        return float(m) - gam
    if isinstance(spec, CustomGrid):
        if weights_hint is not None:
            w = np.asarray(weights_hint, dtype=float)
        else:
            P = np.array([g.probabilities for g in spec.generators])
            w = _hull_weights(P, q.probabilities)
            if w is None:
                return NEG_INF
        tg = spec.t_grid

        def g_of(t):
            return float(w @ _custom_rows_at(spec, t))

        lo, hi = float(tg[0]), float(tg[-1])
        if g_of(hi) < m:
            return POS_INF
        if g_of(lo) >= m:
            return lo
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g_of(mid) >= m:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-13 * max(1.0, abs(hi)):
                break
        return hi
    raise UnsupportedVariant(f"unknown spec {type(spec).__name__}")


def level_set_member(spec: AmbiguitySpec, q: Measure, t: float, c: float) -> bool:
    """Whether q lies in the sublevel set {G(., t) <= c}. Exists so tests can
    probe convexity of the level sets by sampling; compactness is automatic
    in finite dimension."""
    return ambiguity_index(spec, q, t) <= c


# --- robust functional ---------------------------------------------------------


def _index_inf(spec: AmbiguitySpec, family: MeasureFamily, utils: np.ndarray,
               *, seed: int = 0, starts: int = 4,
               warm: np.ndarray | None = None) -> tuple[Measure, float, np.ndarray]:
    """Minimize q -> G(q, E_q[utils]) over the family.

    Returns (argmin measure with maximal tie-break, value, hull weights).
    """
    utils = np.asarray(utils, dtype=float)
    if utils.size != family.n_states:
        raise DimensionMismatch("one utility entry per state is required")
    reference = family.reference
    P = family.vertex_matrix()

    if P.shape[0] == 1:
        q = family.vertex_measures()[0]
        e = q_expectation(P[0], utils)
        return q, ambiguity_index(spec, q, e), np.ones(1)

    # Dirac shortcut: indicator index over the whole simplex is min utils.
    if (isinstance(spec, MultiplePriors) and family.kind == "full_simplex"
            and spec.family.kind == "full_simplex"):
        k = int(np.argmin(utils))
        value = float(utils[k])
        ties = np.nonzero(utils <= value + 1e-12)[0]
        w = np.zeros(family.n_states)
        w[ties] = 1.0 / ties.size
        return family.measure(w), value, w

    same_hull = family is getattr(spec, "family", None)

    # Exact linear cases: the objective is linear in the hull weights, so a
    # vertex scan is the whole minimization (tied vertices are averaged,
    # realizing the maximal tie-break).
    linear_offset = None
    if isinstance(spec, MultiplePriors) and (
            same_hull or spec.family.kind == "full_simplex"):
        linear_offset = np.zeros(P.shape[0])
    elif (isinstance(spec, Variational)
          and isinstance(spec.penalty, TabulatedPenalty)
          and family.kind == "generators"
          and spec.penalty.measures == family.generators):
        linear_offset = np.asarray(spec.penalty.gammas, dtype=float)
    if linear_offset is not None:
        vertex_vals = np.array([q_expectation(P[k], utils)
                                for k in range(P.shape[0])]) + linear_offset
        value = float(vertex_vals.min())
        if value == NEG_INF:
            k = int(np.argmin(vertex_vals))
            w = np.zeros(P.shape[0])
            w[k] = 1.0
            return family.measure(w), NEG_INF, w
        ties = np.nonzero(vertex_vals <= value + 1e-12)[0]
        w = np.zeros(P.shape[0])
        w[ties] = 1.0 / ties.size
        return family.measure(w), value, w

    # A vertex reaching -inf cannot be beaten.
    for k in range(P.shape[0]):
        e = q_expectation(P[k], utils)
        if e == NEG_INF:
            w = np.zeros(P.shape[0])
            w[k] = 1.0
            return family.measure(w), NEG_INF, w

    theta = None
    penalty_gamma = None
    if isinstance(spec, Variational) and isinstance(spec.penalty, EntropicPenalty):
        theta = spec.penalty.theta

    def fq(qv):
        e = q_expectation(qv, utils)
        if isinstance(spec, MultiplePriors):
            if spec.family.kind == "full_simplex" or same_hull:
                member = True
            else:
                member = spec.family.contains(qv)
            val = e if member else POS_INF
            grad = utils if member and np.isfinite(e) else None
            return val, grad
        if theta is not None:
            if not np.isfinite(e):
                return e, None
            val = e + float(rel_entr(qv, reference).sum()) / theta
            grad = utils + (np.log(np.maximum(qv, 1e-300) / reference) + 1.0) / theta
            return val, grad
        if not np.isfinite(e):
            return (NEG_INF if e == NEG_INF else POS_INF), None
        q = Measure(qv, reference)
        return ambiguity_index(spec, q, e), None

    res = optim.minimize_over_hull(fq, P, starts=starts, seed=seed, warm=warm)
    return Measure(res.point, reference), float(res.value), res.weights


def robust_value(spec: AmbiguitySpec, family: MeasureFamily, utils, *,
                 seed: int = 0, starts: int = 4) -> float:
    """inf over the family of G(q, E_q[utils]); the robust functional applied
    to a per-state utility vector. Returns +inf if the index is infinite over
    the whole family."""
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth criteria need per-measure expectations; "
                                 "use smooth_value")
    utils = np.asarray(utils, dtype=float)
    if family.kind == "generators" and len(family.generators) == 1:
        q = family.generators[0]
        e = q_expectation(q.probabilities, utils)
        return ambiguity_index(spec, q, e)
    _, value, _ = _index_inf(spec, family, utils, seed=seed, starts=starts)
    return value


def smooth_value(spec: SmoothCriterion, expectations) -> float:
    """Certainty equivalent phi^{-1}(sum_k mu_k phi(e_k)) of per-measure
    expected utilities."""
    if not isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth_value needs a smooth criterion")
    e = np.asarray(expectations, dtype=float)
    if e.size != len(spec.mixture):
        raise DimensionMismatch("one expectation per mixture component required")
    mu = np.array([w for _, w in spec.mixture])
    if spec.phi_kind == "exponential":
        a = spec.phi_param
        if a == 0.0:
            return float(mu @ e)
        if np.isneginf(e).any():
            return NEG_INF if mu[np.isneginf(e)].sum() > 0 else float(mu @ e)
        inner = float(mu @ np.exp(-a * e))
        return -math.log(inner) / a
    if (e < 0).any():
        raise DomainError("power certainty equivalent needs non-negative "
                          "expected utilities")
    b = spec.phi_param
    return float(mu @ e ** b) ** (1.0 / b)


# --- axiom checking ------------------------------------------------------------


@dataclass
class AxiomReport:
    """Worst sampled violations of the index axioms; zero means clean."""

    monotonicity: float = 0.0
    quasiconvexity: float = 0.0
    asymptotic: float = 0.0
    monotonicity_witness: tuple | None = None
    quasiconvexity_witness: tuple | None = None
    asymptotic_witness: tuple | None = None
    samples: int = 0

    @property
    def max_violation(self) -> float:
        return max(self.monotonicity, self.quasiconvexity, self.asymptotic)

    def ok(self, tol: float = 1e-9) -> bool:
        return self.max_violation <= tol


def _violation(excess: float) -> float:
    return max(0.0, excess)


def check_index_axioms(spec: AmbiguitySpec, sample_budget: int = 10_000,
                       seed: int = 0, family: MeasureFamily | None = None) -> AxiomReport:
    """Sample (q, q', t, t', lambda) tuples and report the worst violations of
    monotonicity in the level, joint quasiconvexity, and the common asymptotic
    maximum. Deterministic given the seed; never raises on a violation."""
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth criteria have no index to check")
    if family is None:
        family = default_family(spec)
    rng = np.random.default_rng(seed)
    P = family.vertex_matrix()
    K = P.shape[0]
    reference = family.reference
    if isinstance(spec, CustomGrid):
        t_lo, t_hi = float(spec.t_grid[0]), float(spec.t_grid[-1])
    else:
        t_lo, t_hi = -10.0, 10.0
    report = AxiomReport()

    def g_at(w, t):
        q = Measure(w @ P, reference)
        hint = w if isinstance(spec, CustomGrid) and family.kind == "generators" \
            and family.generators == spec.generators else None
        member = True if isinstance(spec, MultiplePriors) and \
            family is spec.family else None
        return ambiguity_index(spec, q, t, weights_hint=hint, member_hint=member)

    n_pairs = max(1, sample_budget // 2)
    for _ in range(n_pairs):
        w1 = rng.dirichlet(np.ones(K))
        w2 = rng.dirichlet(np.ones(K))
        t1, t2 = np.sort(rng.uniform(t_lo, t_hi, size=2))
        lam = rng.uniform(0.0, 1.0)
        report.samples += 2

        g_lo, g_hi = g_at(w1, t1), g_at(w1, t2)
        if g_lo > g_hi:
            excess = _violation(g_lo - g_hi if np.isfinite(g_lo - g_hi) else POS_INF)
            if excess > report.monotonicity:
                report.monotonicity = excess
                report.monotonicity_witness = (w1.copy(), t1, t2, g_lo, g_hi)

        ga = g_at(w1, t1)
        gb = g_at(w2, t2)
        wm = lam * w1 + (1.0 - lam) * w2
        tm = lam * t1 + (1.0 - lam) * t2
        gm = g_at(wm, tm)
        cap = max(ga, gb)
        if gm > cap:
            excess = _violation(gm - cap if np.isfinite(gm - cap) else POS_INF)
            if excess > report.quasiconvexity:
                report.quasiconvexity = excess
                report.quasiconvexity_witness = (w1.copy(), w2.copy(), t1, t2,
                                                 lam, gm, cap)

    # asymptotic maximum at a large level (grid top for tabulated indices)
    t_large = t_hi if isinstance(spec, CustomGrid) else 1e6
    am = asymptotic_maximum(spec)
    tops = []
    for k in range(K):
        w = np.zeros(K)
        w[k] = 1.0
        tops.append(g_at(w, t_large))
    for _ in range(8):
        tops.append(g_at(rng.dirichlet(np.ones(K)), t_large))
    tops = np.array(tops)
    if np.isfinite(am):
        spread = float(tops.max() - tops.min())
        overshoot = _violation(float(tops.max()) - am)
        viol = max(spread if not np.isfinite(spread) else spread, overshoot)
        if viol > report.asymptotic:
            report.asymptotic = viol
            report.asymptotic_witness = (t_large, float(tops.min()), float(tops.max()), am)
    else:
        floor = 1e5
        worst = float(tops.min())
        viol = _violation(floor - worst)
        if viol > report.asymptotic:
            report.asymptotic = viol
            report.asymptotic_witness = (t_large, worst, floor, am)
    return report
