"""Robust solvers for the ambiguity-averse investment problem.

The primal value is sup over admissible strategies of the robust criterion
inf_Q G(Q, E_Q[U(wealth)]). The criterion is quasiconcave in the payoff, so
the outer maximization is derivative-free: golden-section line searches along
segments between the incumbent and sampled polytope points (vertices, the
cash point, random hull points, and the classical best response against the
incumbent worst-case measure, which is itself a polytope point).

The dual value function is v(y; x) = inf_Q G(Q, v_Q(y) + x y) with the inner
fixed-measure dual obtained by the conjugate transform; its minimization over
y uses a geometric scan plus local refinement, with no unimodality assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .ambiguity import (
    AmbiguitySpec,
    CustomGrid,
    EntropicPenalty,
    Measure,
    MeasureFamily,
    MultiplePriors,
    SmoothCriterion,
    Variational,
    _index_inf,
    ambiguity_index,
    asymptotic_maximum,
    smooth_value,
)
from .errors import (
    AllInfinite,
    AssumptionViolated,
    DomainError,
    GridOutOfRange,
    Infinite,
    MonotonicityViolated,
    PreconditionViolated,
    SaddleInequalityViolated,
    Unbounded,
    UnsupportedVariant,
)
from .extreal import NEG_INF, POS_INF, q_expectation
from .fixed_measure import (
    dual_value as fixed_dual_value,
    max_expected_utility,
    utility_values,
)
from .market import FiniteMarket, Payoff, admissible_strategy_polytope
from .utility import UtilitySpec, eval_utility, marginal

_WEAK_DUALITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Primal and dual outcome of a robust solve.

    ``duality_gap`` is dual minus primal; weak duality demands it stay above
    -1e-6, which is validated at construction. Fields not produced by a
    partial solve are None. ``minimax_lhs``/``minimax_rhs`` are the sup-inf
    and inf-sup values when the interchange preconditions held.
    """

    x: float
    primal_value: float | None = None
    primal_payoff: Payoff | None = None
    worst_case_measure: Measure | None = None
    y_star: float | None = None
    dual_value: float | None = None
    minimax_lhs: float | None = None
    minimax_rhs: float | None = None
    duality_gap: float | None = None
    saddle_residual: float | None = None
    iterations: dict = field(default_factory=dict)
    flags: tuple = ()

    def __post_init__(self):
        if self.duality_gap is not None and self.duality_gap < -_WEAK_DUALITY_TOL:
            raise AssertionError(
                f"weak duality violated: gap {self.duality_gap:.3e}")


# --- criterion evaluation ------------------------------------------------------


def worst_case_measure(market: FiniteMarket, spec: AmbiguitySpec,
                       family: MeasureFamily, payoff: Payoff, u: UtilitySpec,
                       *, seed: int = 0, starts: int = 16,
                       warm: np.ndarray | None = None):
    """The measure minimizing q -> G(q, E_q[U(payoff)]) over the family, and
    the attained value. Exhaustive vertex evaluation plus projected-gradient
    descents on the hull weights; numerically tied minimizers are broken
    toward maximal support, then maximal entropy."""
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth criteria have no worst-case measure")
    utils = utility_values(u, payoff.wealth)
    q, value, weights = _index_inf(spec, family, utils, seed=seed,
                                   starts=starts, warm=warm)
    if value == POS_INF:
        raise AllInfinite("the ambiguity index is +inf over the whole family; "
                          "the prior set is misconfigured")
    return q, value


def _criterion(spec, family, u, wealth, *, seed=0, starts=2, warm=None):
    """Robust criterion of a wealth vector: (value, measure or None, weights)."""
    utils = utility_values(u, wealth)
    if isinstance(spec, SmoothCriterion):
        exps = [q_expectation(m.probabilities, utils) for m, _ in spec.mixture]
        try:
            return smooth_value(spec, exps), None, None
        except DomainError:
            return NEG_INF, None, None
    q, value, weights = _index_inf(spec, family, utils, seed=seed,
                                   starts=starts, warm=warm)
    return value, q, weights


def _index_at(spec, q, t):
    """Index evaluation that treats out-of-grid levels as +inf (tabulated
    indices only know their grid)."""
    try:
        return ambiguity_index(spec, q, t)
    except GridOutOfRange:
        return POS_INF


# --- preconditions ---------------------------------------------------------------


def assumption_check(market: FiniteMarket, spec: AmbiguitySpec,
                     family: MeasureFamily, u: UtilitySpec, x: float) -> dict:
    """Constructive finiteness pre-check at the requested budget.

    Finds one candidate measure with finite fixed-measure value, and (for
    index-based specs) one with finite index of that value. Raises
    AssumptionViolated with diagnostics when either search fails.
    """
    candidates = list(family.vertex_measures())
    try:
        ref = Measure(family.reference, family.reference)
        candidates.append(ref)
    except Exception:
        pass
    finite_value = None
    finite_index = None
    tried = []
    for q in candidates:
        try:
            val = max_expected_utility(market, q, u, x, n_starts=2).value
        except Unbounded:
            tried.append("u_q = +inf")
            continue
        if not np.isfinite(val):
            tried.append(f"u_q = {val}")
            continue
        if finite_value is None:
            finite_value = (q, val)
        if isinstance(spec, SmoothCriterion):
            finite_index = (q, val)
            break
        g = _index_at(spec, q, val)
        tried.append(f"G(q, {val:.4g}) = {g:.4g}")
        if np.isfinite(g):
            finite_index = (q, g)
            break
    if finite_value is None:
        raise AssumptionViolated(
            "no candidate measure has a finite fixed-measure value; "
            f"tried {len(candidates)} candidates: {tried}")
    if finite_index is None:
        raise AssumptionViolated(
            "no candidate measure keeps the index finite at its value; "
            f"tried: {tried}")
    return {"finite_value": finite_value, "finite_index": finite_index}


def _utility_nonnegative(u: UtilitySpec) -> bool:
    if u.family == "power":
        return u.exponent > 0
    if u.family == "table":
        return u.points[0][1] >= 0.0
    return False


def _index_concave_in_t(spec: AmbiguitySpec) -> bool:
    if isinstance(spec, (MultiplePriors, Variational)):
        return True  # affine in the level on the effective domain
    if isinstance(spec, CustomGrid):
        t = spec.t_grid
        for row in spec.values:
            slopes = np.diff(row) / np.diff(t)
            if (np.diff(slopes) > 1e-9).any():
                return False
        return True
    return False


def _dichotomy_holds(spec: AmbiguitySpec, u: UtilitySpec) -> bool:
    return _utility_nonnegative(u) or _index_concave_in_t(spec)


def _strictly_increasing_in_t(spec: AmbiguitySpec) -> bool:
    if isinstance(spec, (MultiplePriors, Variational)):
        return True
    if isinstance(spec, CustomGrid):
        return bool((np.diff(spec.values, axis=1) > 1e-12).all())
    return False


# --- primal ----------------------------------------------------------------------


def robust_primal_solve(market: FiniteMarket, spec: AmbiguitySpec,
                        family: MeasureFamily, u: UtilitySpec, x: float, *,
                        seed: int = 0, line_searches: int = 64,
                        n_starts: int = 8, payoff_tol: float = 1e-8,
                        inner_starts: int = 2) -> SolveReport:
    """Maximize the robust criterion over the admissible polytope.

    Derivative-free quasiconcave ascent: per start, passes of golden-section
    line searches toward the cash point, the classical best response against
    the incumbent worst-case measure, the polytope vertices and random hull
    points, capped at ``line_searches`` searches per start. The ascent stops
    when a full pass moves the payoff less than ``payoff_tol``; exhausting
    the budget while still improving sets the non_convergence flag.
    """
    market.assert_no_arbitrage()
    if not x > 0:
        raise ValueError("budget must be positive")
    assumption_check(market, spec, family, u, x)
    rng = np.random.default_rng(seed)
    poly = admissible_strategy_polytope(market, x)
    state = {"warm": None, "measure": None, "evals": 0}

    def F(z):
        wealth = np.maximum(poly.wealth(x, z), 0.0)
        value, q, w = _criterion(spec, family, u, wealth, seed=seed,
                                 starts=inner_starts, warm=state["warm"])
        state["evals"] += 1
        return value, q, w

    if poly.dim == 0:
        wealth = np.full(market.n_states, float(x))
        value, q, _ = F(np.zeros(0))
        return SolveReport(x=float(x), primal_value=float(value),
                           primal_payoff=Payoff(wealth, float(x)),
                           worst_case_measure=q,
                           iterations={"criterion_evals": state["evals"]})

    memo: dict[bytes, float] = {}

    def F_val(z):
        key = z.tobytes()
        if key not in memo:
            value, q, w = F(z)
            if w is not None:
                state["warm"] = w
            memo[key] = value
        return memo[key]

    vertices = poly.vertices
    center = poly.center
    start_pool = [center] + [v.copy() for v in vertices]
    flags = []
    best_z = None
    best_val = NEG_INF
    total_ls = 0

    # Best response against the least favourable measure of the inf-sup
    # side: when the interchange holds this is the saddle payoff, which makes
    # it the sharpest line-search target (ridge maxima of min-type criteria
    # are invisible to vertex-directed segments).
    lf_target = None
    if not isinstance(spec, SmoothCriterion):
        try:
            _, q_lf, _ = _inf_sup(market, spec, family, u, x, seed=seed)
            lf_target = max_expected_utility(market, q_lf, u, x,
                                             n_starts=2).reduced_point
        except (Unbounded, AllInfinite):
            lf_target = None

    for si in range(min(n_starts, len(start_pool))):
        z = start_pool[si].copy()
        fz = F_val(z)
        pulls = 0
        while not np.isfinite(fz) and pulls < 60:
            z = 0.5 * (z + center)
            fz = F_val(z)
            pulls += 1
        if not np.isfinite(fz):
            continue
        used = 0
        converged = False
        while used < line_searches and not converged:
            moved = 0.0
            improved = 0.0
            targets = [np.zeros(poly.dim)]
            if lf_target is not None:
                targets.append(lf_target)
            _, q_inc, w_inc = F(z)
            if q_inc is not None:
                br = max_expected_utility(market, q_inc, u, x, n_starts=2,
                                          warm=z)
            elif isinstance(spec, SmoothCriterion):
                mixbar = sum(wt * m.probabilities for m, wt in spec.mixture)
                br = max_expected_utility(
                    market, Measure(mixbar, family.reference), u, x,
                    n_starts=2, warm=z)
            else:
                br = None
            if br is not None:
                targets.append(br.reduced_point)
            order = rng.permutation(len(vertices))
            targets.extend(vertices[i] for i in order)
            for _ in range(3):
                wmix = rng.dirichlet(np.ones(len(vertices)))
                targets.append(wmix @ vertices)
            for target in targets:
                if used >= line_searches:
                    break
                seg = target - z
                span = float(np.max(np.abs(poly.A @ seg))) if seg.size else 0.0
                if span <= payoff_tol:
                    continue
                rel = min(0.1, max(1e-12, payoff_tol * max(1.0, x) / span))
                t_best, f_best, _ = optim.golden_max(
                    lambda t: F_val(z + t * seg), 0.0, 1.0, rel_tol=rel)
                used += 1
                if f_best > fz + 1e-14 * (1.0 + abs(fz)):
                    improved += f_best - fz
                    moved = max(moved, abs(t_best) * span)
                    z = z + t_best * seg
                    fz = f_best
            if moved <= payoff_tol and improved <= 1e-12 * (1.0 + abs(fz)):
                converged = True
        total_ls += used
        if not converged:
            flags.append("non_convergence")
        if fz > best_val:
            best_val = fz
            best_z = z
    if best_z is None:
        raise AllInfinite("criterion is -inf at every reachable point")
    wealth = np.maximum(poly.wealth(x, best_z), 0.0)
    value, q_best, w_best = _criterion(spec, family, u, wealth, seed=seed,
                                       starts=16, warm=state["warm"])
    return SolveReport(
        x=float(x), primal_value=float(value),
        primal_payoff=Payoff(wealth, float(x)), worst_case_measure=q_best,
        iterations={"line_searches": total_ls,
                    "criterion_evals": state["evals"]},
        flags=tuple(sorted(set(flags))))


# --- dual ------------------------------------------------------------------------


def robust_dual_value(market: FiniteMarket, spec: AmbiguitySpec,
                      family: MeasureFamily, u: UtilitySpec, x: float,
                      y: float, *, seed: int = 0, starts: int = 4,
                      warm: np.ndarray | None = None,
                      inner_rel_tol: float = 1e-7,
                      descent_tol: float = 1e-8,
                      solution_cache: dict | None = None):
    """v(y; x) = inf over the family of G(q, v_q(y) + x y), and its argmin.

    The inner fixed-measure dual v_q is evaluated through the conjugate
    transform; measures with v_q = +inf contribute the asymptotic maximum.
    The gradient in q follows from the saddle form of the transform (the
    utility of the optimal wealth profile), keeping the hull descent cheap.
    ``inner_rel_tol`` relaxes the transform bracket during scans (values are
    quadratically insensitive to the bracket width near the maximum);
    ``solution_cache`` shares fixed-measure solves across calls.
    """
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("smooth criteria have no index dual")
    if not (x > 0 and y > 0):
        raise ValueError("budget and dual level must be positive")
    reference = family.reference
    theta = None
    if isinstance(spec, Variational) and isinstance(spec.penalty, EntropicPenalty):
        theta = spec.penalty.theta

    def fq(qv):
        q = Measure(qv, reference)
        try:
            val, _, sol = fixed_dual_value(market, q, u, y, detail=True,
                                           rel_tol=inner_rel_tol,
                                           solution_cache=solution_cache)
        except Infinite:
            return asymptotic_maximum(spec), None
        t = val + x * y
        base = np.clip(utility_values(u, sol.payoff.wealth), -1e12, 1e12)
        if isinstance(spec, MultiplePriors):
            member = spec.family.kind == "full_simplex" or \
                family is spec.family or spec.family.contains(qv)
            return (t, base) if member else (POS_INF, None)
        if theta is not None:
            from scipy.special import rel_entr

            kl = float(rel_entr(qv, reference).sum()) / theta
            grad = base + (np.log(np.maximum(qv, 1e-300) / reference) + 1.0) / theta
            return t + kl, grad
        return _index_at(spec, q, t), None

    P = family.vertex_matrix()
    res = optim.minimize_over_hull(fq, P, starts=starts, seed=seed, warm=warm,
                                   vertex_scan=warm is None, tol=descent_tol)
    if res.value == POS_INF:
        return POS_INF, None, res.weights
    return float(res.value), Measure(res.point, reference), res.weights


@dataclass(frozen=True)
class DualMinimum:
    y_star: float
    value: float
    measure: Measure | None
    flags: tuple
    evaluations: int


def robust_dual_minimize(market: FiniteMarket, spec: AmbiguitySpec,
                         family: MeasureFamily, u: UtilitySpec, x: float, *,
                         seed: int = 0, grid_points: int = 48,
                         refine_tol: float = 1e-8) -> DualMinimum:
    """min over y > 0 of v(y; x) by a geometric scan around the marginal
    utility of capital, followed by golden-section refinement of the best
    bracket. No unimodality in y is assumed; a minimum still sitting on the
    grid boundary after one widening is flagged ``boundary_minimum``."""
    y0 = marginal(u, x)
    ys = list(np.geomspace(1e-4 * y0, 1e4 * y0, grid_points))
    state = {"warm": None, "evals": 0, "best": None}
    shared_cache: dict = {}

    def eval_dual(y, fine=False):
        # The scan only locates the bracket; full accuracy is reserved for
        # the refinement phase (values near a smooth minimum are
        # quadratically insensitive to the remaining slack).
        n_starts = 4 if state["warm"] is None else (2 if fine else 1)
        val, q, w = robust_dual_value(
            market, spec, family, u, x, y, seed=seed, warm=state["warm"],
            starts=n_starts, inner_rel_tol=1e-7 if fine else 1e-5,
            descent_tol=1e-8 if fine else 1e-6, solution_cache=shared_cache)
        if w is not None:
            state["warm"] = w
        state["evals"] += 1
        if fine:
            best = state["best"]
            if best is None or val < best[1]:
                state["best"] = (y, val, q)
        return val

    vals = [eval_dual(y) for y in ys]
    flags = []
    for attempt in range(2):
        k = int(np.argmin(vals))
        if k == 0:
            if attempt == 1:
                flags.append("boundary_minimum")
                break
            ext = list(np.geomspace(ys[0] * 1e-2, ys[0], 7))[:-1]
            vals = [eval_dual(y) for y in ext] + vals
            ys = ext + ys
        elif k == len(ys) - 1:
            if attempt == 1:
                flags.append("boundary_minimum")
                break
            ext = list(np.geomspace(ys[-1], ys[-1] * 1e2, 7))[1:]
            vals = vals + [eval_dual(y) for y in ext]
            ys = ys + ext
        else:
            break
    if all(not np.isfinite(v) for v in vals):
        raise Infinite("v(y; x) = +inf on the whole scan; no dual claims "
                       "can be made for this instance")
    k = int(np.argmin(vals))
    lo = ys[max(0, k - 1)]
    hi = ys[min(len(ys) - 1, k + 1)]
    eval_dual(ys[k], fine=True)
    optim.golden_min(lambda t: eval_dual(math.exp(t), fine=True),
                     math.log(lo), math.log(hi), rel_tol=refine_tol)
    y_star, value, measure = state["best"]
    return DualMinimum(y_star=float(y_star), value=float(value),
                       measure=measure, flags=tuple(flags),
                       evaluations=state["evals"])


# --- minimax and saddle ------------------------------------------------------------


def _inf_sup(market, spec, family, u, x, *, seed=0, starts=4, warm=None):
    """inf over the family of G(q, u_q(x)) with classical inner solves."""
    reference = family.reference
    theta = None
    if isinstance(spec, Variational) and isinstance(spec.penalty, EntropicPenalty):
        theta = spec.penalty.theta

    def fq(qv):
        q = Measure(qv, reference)
        try:
            sol = max_expected_utility(market, q, u, x, n_starts=2)
        except Unbounded:
            return asymptotic_maximum(spec), None
        base = np.clip(utility_values(u, sol.payoff.wealth), -1e12, 1e12)
        if isinstance(spec, MultiplePriors):
            member = spec.family.kind == "full_simplex" or \
                family is spec.family or spec.family.contains(qv)
            return (sol.value, base) if member else (POS_INF, None)
        if theta is not None:
            from scipy.special import rel_entr

            kl = float(rel_entr(qv, reference).sum()) / theta
            grad = base + (np.log(np.maximum(qv, 1e-300) / reference) + 1.0) / theta
            return sol.value + kl, grad
        return _index_at(spec, q, sol.value), None

    res = optim.minimize_over_hull(fq, family.vertex_matrix(), starts=starts,
                                   seed=seed, warm=warm)
    return float(res.value), Measure(res.point, reference), res.weights


def minimax_check(market: FiniteMarket, spec: AmbiguitySpec,
                  family: MeasureFamily, u: UtilitySpec, x: float, *,
                  seed: int = 0):
    """Both sides of the minimax interchange and their gap (inf-sup minus
    sup-inf, non-negative up to solver noise).

    Refuses to run when neither branch of the interchange precondition holds
    (non-negative utility, or an index concave in its level)."""
    if not _dichotomy_holds(spec, u):
        raise PreconditionViolated(
            "minimax interchange needs non-negative utility or an index "
            "concave in its level; neither holds here")
    lhs = robust_primal_solve(market, spec, family, u, x, seed=seed).primal_value
    rhs, _, _ = _inf_sup(market, spec, family, u, x, seed=seed)
    return lhs, rhs, rhs - lhs


def extract_saddle(market: FiniteMarket, spec: AmbiguitySpec,
                   family: MeasureFamily, u: UtilitySpec, x: float, *,
                   seed: int = 0, deviations: int = 500,
                   margin_tol: float = 1e-6) -> SolveReport:
    """Solve primal and dual, assemble the saddle candidate, and stress it.

    The payoff is polished by the classical best response against the least
    favourable measure (accepted only if the robust value does not drop; a
    no-op at an exact saddle), the measure by a warm-started worst-case
    refinement. The report carries the first-order closure residual
    max |g - I(Y/Z)| on the support of the saddle measure, and both saddle
    inequalities are sampled; violations beyond ``margin_tol`` raise
    SaddleInequalityViolated with the witness.
    """
    if isinstance(spec, SmoothCriterion):
        raise UnsupportedVariant("saddle extraction needs an index variant")
    if not _strictly_increasing_in_t(spec):
        raise PreconditionViolated("saddle identification needs an index "
                                   "strictly increasing in its level")
    primal = robust_primal_solve(market, spec, family, u, x, seed=seed)
    dual = robust_dual_minimize(market, spec, family, u, x, seed=seed)
    rng = np.random.default_rng(seed + 104729)
    poly = admissible_strategy_polytope(market, x)

    def crit(wealth):
        value, q, w = _criterion(spec, family, u, wealth, seed=seed, starts=4)
        return value, q, w

    # The saddle measure is the dual argmin (the least favourable measure);
    # primal worst-case ties need not single it out. The payoff is the
    # classical best response against it whenever that does not lower the
    # robust value (it cannot, at an exact saddle).
    g_payoff = primal.primal_payoff
    best_value = primal.primal_value
    q_hat = dual.measure
    if q_hat is not None:
        br = max_expected_utility(market, q_hat, u, x, n_starts=4)
        cand_wealth = np.maximum(br.payoff.wealth, 0.0)
        cand_val, _, _ = crit(cand_wealth)
        if cand_val >= best_value - 1e-9 * (1.0 + abs(best_value)):
            g_payoff = Payoff(cand_wealth, float(x))
            best_value = max(best_value, cand_val)
    utils_g = utility_values(u, g_payoff.wealth)
    if q_hat is None:
        q_hat, _, _ = _index_inf(spec, family, utils_g, seed=seed, starts=16)

    dens = q_hat.density
    support = q_hat.probabilities > 0
    resid = 0.0
    for i in np.nonzero(support)[0]:
        g_i = g_payoff.wealth[i]
        y_i = dens[i] * marginal(u, g_i)
        resid = max(resid, abs(g_i - _inverse_marginal_safe(u, y_i / dens[i])))

    ref_level = q_expectation(q_hat.probabilities, utils_g)
    ref_val = ambiguity_index(spec, q_hat, ref_level)

    # payoff deviations must not beat the saddle payoff against q_hat
    margin_payoff = math.inf
    witness_payoff = None
    vertices = poly.vertices
    if poly.dim > 0:
        for _ in range(deviations):
            wmix = rng.dirichlet(np.ones(len(vertices)))
            z = wmix @ vertices
            wealth = np.maximum(poly.wealth(x, z), 0.0)
            dev_level = q_expectation(q_hat.probabilities,
                                      utility_values(u, wealth))
            dev_val = _index_at(spec, q_hat, dev_level)
            m = ref_val - dev_val
            if m < margin_payoff:
                margin_payoff = m
                witness_payoff = wealth
    else:
        margin_payoff = 0.0

    # measure deviations must not undercut the saddle measure against g
    margin_measure = math.inf
    witness_measure = None
    P = family.vertex_matrix()
    for k in range(P.shape[0] + deviations):
        if k < P.shape[0]:
            qv = P[k]
        else:
            qv = rng.dirichlet(np.ones(P.shape[0])) @ P
        level = q_expectation(qv, utils_g)
        val = _index_at(spec, Measure(qv, family.reference), level)
        m = val - ref_val
        if m < margin_measure:
            margin_measure = m
            witness_measure = qv
    if margin_payoff < -margin_tol:
        raise SaddleInequalityViolated(
            f"a sampled payoff beats the saddle payoff by {-margin_payoff:.3e} "
            "against the least favourable measure (inner solver failure; "
            "rerun with a larger budget)", witness=witness_payoff)
    if margin_measure < -margin_tol:
        raise SaddleInequalityViolated(
            f"a sampled measure undercuts the saddle measure by "
            f"{-margin_measure:.3e} (inner solver failure; rerun with a "
            "larger budget)", witness=witness_measure)

    minimax_lhs = minimax_rhs = None
    if _dichotomy_holds(spec, u):
        minimax_lhs = best_value
        minimax_rhs, _, _ = _inf_sup(market, spec, family, u, x, seed=seed)

    iterations = dict(primal.iterations)
    iterations["dual_evaluations"] = dual.evaluations
    return SolveReport(
        x=float(x), primal_value=float(best_value), primal_payoff=g_payoff,
        worst_case_measure=q_hat, y_star=dual.y_star,
        dual_value=dual.value, minimax_lhs=minimax_lhs,
        minimax_rhs=minimax_rhs,
        duality_gap=float(dual.value - best_value),
        saddle_residual=float(resid), iterations=iterations,
        flags=tuple(sorted(set(primal.flags) | set(dual.flags))))


def _inverse_marginal_safe(u: UtilitySpec, y: float) -> float:
    from .utility import inverse_marginal

    if not np.isfinite(y) or y <= 0:
        return math.inf
    return inverse_marginal(u, y)


# --- sweeps ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    x: float
    primal_value: float
    dual_value: float
    gap: float
    y_star: float
    worst_case: Measure
    tv_distance: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    concavity_violation: float


def value_sweep(market: FiniteMarket, spec: AmbiguitySpec,
                family: MeasureFamily, u: UtilitySpec, x_grid, *,
                seed: int = 0) -> SweepResult:
    """Primal and dual values along a budget grid.

    Monotonicity of the value in the budget is asserted (larger budgets
    dominate); concavity is only measured and reported, never asserted, since
    the robust value function need be neither concave nor continuous.
    """
    xs = [float(x) for x in x_grid]
    if any(b <= a for a, b in zip(xs, xs[1:])) or (xs and xs[0] <= 0):
        raise ValueError("budget grid must be positive and ascending")
    rows = []
    for x in xs:
        primal = robust_primal_solve(market, spec, family, u, x, seed=seed)
        dual = robust_dual_minimize(market, spec, family, u, x, seed=seed)
        q = primal.worst_case_measure
        tv = 0.5 * float(np.abs(q.probabilities - market.reference).sum()) \
            if q is not None else float("nan")
        rows.append(SweepRow(
            x=x, primal_value=primal.primal_value, dual_value=dual.value,
            gap=dual.value - primal.primal_value, y_star=dual.y_star,
            worst_case=q, tv_distance=tv))
    for a, b in zip(rows, rows[1:]):
        if a.primal_value > b.primal_value + 1e-8:
            raise MonotonicityViolated(
                f"u({a.x}) = {a.primal_value:.12g} exceeds "
                f"u({b.x}) = {b.primal_value:.12g}")
    worst = 0.0
    for a, b, c in zip(rows, rows[1:], rows[2:]):
        lam = (b.x - a.x) / (c.x - a.x)
        chord = (1 - lam) * a.primal_value + lam * c.primal_value
        worst = max(worst, chord - b.primal_value)
    return SweepResult(rows=tuple(rows), concavity_violation=worst)
