"""Classical utility maximization under a fixed measure, and its conjugate.

The primal problem maximizes E_q[U(terminal wealth)] over strategies that are
admissible under the *reference* measure, so states outside q's support are
still constrained to non-negative wealth but carry no objective weight
(0 times -inf contributes nothing). The dual value function is obtained by
the conjugate transform v_q(y) = sup_{x>0} (u_q(x) - x y); the deflator
domain is never represented explicitly, which keeps membership tests an
independent route for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import optim
from .ambiguity import Measure
from .errors import (
    Infinite,
    MembershipFailed,
    NonpositiveDual,
    Unbounded,
)
from .extreal import NEG_INF
from .market import (
    FiniteMarket,
    Payoff,
    Strategy,
    admissible_strategy_polytope,
    deflator_member,
)
from .utility import UtilitySpec, eval_utility, marginal

_OVERFLOW_GUARD = 1e12


def utility_values(spec: UtilitySpec, wealth: np.ndarray) -> np.ndarray:
    """Vectorized U over a wealth vector (with the U(0) right-limit rule)."""
    w = np.asarray(wealth, dtype=float)
    if spec.family == "log":
        out = np.full(w.shape, NEG_INF)
        pos = w > 0
        out[pos] = np.log(w[pos])
        return out
    if spec.family == "power":
        p = spec.exponent
        out = np.full(w.shape, NEG_INF if p < 0 else 0.0)
        pos = w > 0
        out[pos] = w[pos] ** p / p
        return out
    return np.array([eval_utility(spec, wi) for wi in w])


def marginal_values(spec: UtilitySpec, wealth: np.ndarray) -> np.ndarray:
    w = np.asarray(wealth, dtype=float)
    if spec.family == "log":
        return 1.0 / np.maximum(w, 1e-300)
    if spec.family == "power":
        return np.maximum(w, 1e-300) ** (spec.exponent - 1.0)
    return np.array([marginal(spec, wi) for wi in w])


@dataclass(frozen=True, eq=False)
class FixedMeasureSolution:
    """Outcome of a fixed-measure solve: the value, the optimal payoff and
    strategy, the marginal value of capital pairing primal and dual, and
    solver diagnostics."""

    value: float
    payoff: Payoff
    strategy: Strategy
    multiplier: float
    iterations: int
    kkt_residual: float
    reduced_point: np.ndarray


def max_expected_utility(market: FiniteMarket, q: Measure, u: UtilitySpec,
                         x: float, *, tol: float = 1e-10,
                         max_iter: int = 100_000, n_starts: int = 8,
                         warm: np.ndarray | None = None) -> FixedMeasureSolution:
    """Maximize E_q[U(x + gains)] over the admissible strategy polytope.

    Spectral projected gradient with backtracking, multistarted from the
    polytope center and its vertices (vertices on a -inf wall are pulled
    toward the center until the objective is finite). ``warm`` seeds an
    extra start in quotient coordinates.
    """
    market.assert_no_arbitrage()
    if not x > 0:
        raise ValueError("budget must be positive")
    qv = q.probabilities
    poly = admissible_strategy_polytope(market, x)
    if poly.dim == 0:
        value = float(eval_utility(u, x))
        return FixedMeasureSolution(
            value=value, payoff=Payoff(np.full(market.n_states, float(x)), x),
            strategy=Strategy(np.zeros(market.d_assets)),
            multiplier=float(marginal(u, x)), iterations=0, kkt_residual=0.0,
            reduced_point=np.zeros(0))

    live = qv > 0
    Al = poly.A[live]
    ql = qv[live]

    def fun(z):
        vals = utility_values(u, x + Al @ z)
        if np.isneginf(vals).any():
            return NEG_INF
        return float(ql @ vals)

    def grad(z):
        marg = np.minimum(marginal_values(u, x + Al @ z), _OVERFLOW_GUARD)
        return Al.T @ (ql * marg)

    def project(z):
        return optim.project_to_polytope(poly.A, -x * np.ones(market.n_states), z)

    center = poly.center
    starts = []
    if warm is not None and np.asarray(warm).size == poly.dim:
        starts.append(np.asarray(warm, dtype=float))
    starts.append(center)
    starts.extend(list(poly.vertices))
    # Gradient scale varies like 1/x across budgets; keep the stated unit-scale
    # tolerance meaningful by scaling it with the initial gradient magnitude.
    g0 = grad(center)
    tol_eff = tol * max(1.0, float(np.max(np.abs(g0))) if g0.size else 1.0)
    best = None
    total_iter = 0
    used = 0
    for z0 in starts:
        if used >= n_starts:
            break
        z0 = project(z0)
        pulled = z0
        for _ in range(60):
            if np.isfinite(fun(pulled)):
                break
            pulled = 0.5 * (pulled + center)
        else:
            continue
        used += 1
        res = optim.spg_max(fun, grad, project, pulled, tol=tol_eff,
                            max_iter=max_iter)
        total_iter += res.iterations
        if best is None or res.value > best.value:
            best = res
    if best is None:
        raise Unbounded("no finite-valued starting point found")
    if best.value > _OVERFLOW_GUARD:
        raise Unbounded("objective exceeded the overflow guard; the "
                        "finiteness assumption fails for this measure")
    wealth = np.maximum(poly.wealth(x, best.z), 0.0)
    mult = float(ql @ np.minimum(marginal_values(u, wealth[live]),
                                 _OVERFLOW_GUARD))
    # Envelope with budget-dependent constraints: active walls contribute
    # their KKT multipliers to the marginal value of capital.
    active = wealth <= 1e-9 * x
    if active.any():
        g_full = grad(best.z)
        lam, *_ = np.linalg.lstsq(poly.A[active].T, -g_full, rcond=None)
        mult += float(np.maximum(lam, 0.0).sum())
    return FixedMeasureSolution(
        value=float(best.value), payoff=Payoff(wealth, float(x)),
        strategy=Strategy(poly.lift(best.z)), multiplier=mult,
        iterations=total_iter, kkt_residual=float(best.residual),
        reduced_point=best.z)


def dual_value(market: FiniteMarket, q: Measure, u: UtilitySpec, y: float, *,
               detail: bool = False, rel_tol: float = 1e-10,
               solution_cache: dict | None = None):
    """v_q(y) by the conjugate transform sup_{x>0} (u_q(x) - x y).

    A geometric ladder on [1e-6, 1e6] locates the bracket (grown by factors
    of 10 while the maximum sits on an end), followed by golden section to
    relative width ``rel_tol``; each evaluation is a fixed-measure primal
    solve, warm-started along the scan. Divergence past the overflow guard
    raises Infinite, signalling v_q(y) = +inf.

    ``solution_cache`` may be shared across calls: primal solves depend only
    on (measure, budget), so scans over many y reuse the ladder solves.
    """
    if not y > 0:
        raise NonpositiveDual(f"dual argument {y} must be positive")
    market.assert_no_arbitrage()
    warm_holder: dict = {}
    cache: dict = solution_cache if solution_cache is not None else {}
    qkey = q.key()

    def phi(x: float) -> float:
        sol = cache.get((qkey, x))
        if sol is None:
            warm = None
            if "z" in warm_holder:
                # admissible sets scale linearly with the budget
                warm = warm_holder["z"] * (x / warm_holder["x"])
            sol = max_expected_utility(market, q, u, x, warm=warm, n_starts=2)
            cache[(qkey, x)] = sol
        warm_holder["z"] = sol.reduced_point
        warm_holder["x"] = x
        return sol.value - x * y

    lo, hi = 1e-6, 1e6
    xs = list(np.geomspace(lo, hi, 13))
    vals = [phi(x) for x in xs]
    for _ in range(40):
        k = int(np.argmax(vals))
        if k == 0:
            xs.insert(0, xs[0] / 10.0)
            vals.insert(0, phi(xs[0]))
        elif k == len(xs) - 1:
            if xs[-1] >= _OVERFLOW_GUARD:
                raise Infinite("conjugate transform diverges; v_q(y) = +inf")
            xs.append(xs[-1] * 10.0)
            vals.append(phi(xs[-1]))
        else:
            break
    k = int(np.argmax(vals))
    x_star, value, _ = optim.golden_max(phi, xs[k - 1], xs[k + 1],
                                        rel_tol=rel_tol)
    if not detail:
        return float(value)
    sol = cache.get((qkey, x_star))
    if sol is None:
        phi(x_star)
        sol = cache[(qkey, x_star)]
    return float(value), float(x_star), sol


@dataclass
class ConjugacyReport:
    """Measured biconjugacy gap and Fenchel margin on sampled grids."""

    max_gap: float
    fenchel_margin: float
    gaps: dict
    u_values: dict
    v_values: dict


def conjugacy_report(market: FiniteMarket, q: Measure, u: UtilitySpec,
                     x_grid, y_grid, *, refine_tol: float = 1e-6) -> ConjugacyReport:
    """Check u_q(x) = inf_y (v_q(y) + x y) on grids.

    Reports the worst absolute gap over the x grid (inner infimum refined
    locally by golden section around the best grid point) and the smallest
    Fenchel margin v_q(y) + x y - u_q(x) over all grid pairs (weak duality
    demands it stay above a small negative tolerance).
    """
    x_grid = [float(x) for x in x_grid]
    y_grid = sorted(float(y) for y in y_grid)
    u_vals = {x: max_expected_utility(market, q, u, x).value for x in x_grid}
    v_cache: dict[float, float] = {}

    def v_of(y: float) -> float:
        if y not in v_cache:
            v_cache[y] = dual_value(market, q, u, y)
        return v_cache[y]

    for y in y_grid:
        v_of(y)
    margin = math.inf
    for x in x_grid:
        for y in y_grid:
            margin = min(margin, v_of(y) + x * y - u_vals[x])
    gaps = {}
    for x in x_grid:
        h = lambda y: v_of(y) + x * y
        j = int(np.argmin([h(y) for y in y_grid]))
        lo = y_grid[max(0, j - 1)]
        hi = y_grid[min(len(y_grid) - 1, j + 1)]
        _, inner, _ = optim.golden_min(h, lo, hi, rel_tol=refine_tol)
        inner = min(inner, min(h(y) for y in y_grid))
        gaps[x] = abs(u_vals[x] - inner)
    return ConjugacyReport(max_gap=max(gaps.values()), fenchel_margin=margin,
                           gaps=gaps, u_values=u_vals, v_values=dict(v_cache))


def recover_deflator(market: FiniteMarket, q: Measure, u: UtilitySpec,
                     primal: FixedMeasureSolution, y: float,
                     tol: float = 1e-9) -> np.ndarray:
    """Dual optimizer from primal first-order conditions: h = Z U'(g) on the
    support of q, extended by zero off the support (the minimal non-negative
    completion; wealth is non-negative on admissible payoffs, so adding mass
    off-support can only inflate the budget pairing).

    The primal must have been solved at the budget conjugate-paired with y;
    membership of the result in the deflator domain at level y is verified
    and MembershipFailed raised otherwise.
    """
    z = q.density
    g = primal.payoff.wealth
    h = np.zeros(market.n_states)
    for i in np.nonzero(q.probabilities > 0)[0]:
        h[i] = z[i] * marginal(u, g[i])
    if not np.isfinite(h).all():
        raise MembershipFailed("marginal utility diverges on the support; "
                               "primal optimum has zero wealth in a charged state")
    if not deflator_member(market, h, y, tol=tol):
        raise MembershipFailed(
            "recovered deflator fails the budget test; solver tolerance too "
            "loose for this pairing")
    return h
