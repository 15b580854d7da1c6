"""Brute-force reference values for grading the solvers.

Everything here is exhaustive grid evaluation with its own elementary
implementations of utilities, conjugates and index sums; no numeric code is
shared with the solver modules, so agreement is evidence rather than
tautology. Each answer carries a crude Lipschitz-based grid-error bound.

Desk scale only: at most two tradable dimensions and four states; larger
instances (or grids that would exceed the memory budget) are refused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .ambiguity import (
    AmbiguitySpec,
    CustomGrid,
    EntropicPenalty,
    MeasureFamily,
    MultiplePriors,
    SmoothCriterion,
    TabulatedPenalty,
    Variational,
)
from .errors import ScaleRefused, UnsupportedVariant
from .market import FiniteMarket, admissible_strategy_polytope

_NEG_SENTINEL = -1e300


@dataclass(frozen=True)
class OracleConfig:
    """Grid sizes for the exhaustive references."""

    strategy_grid_per_dim: int = 401
    simplex_grid_resolution: int = 201
    y_grid_points: int = 256
    memory_limit_bytes: int = 1 << 30


@dataclass(frozen=True)
class OracleValue:
    """A brute-force value with its attached grid-error bound."""

    value: float
    grid_bound: float

    def __float__(self) -> float:
        return self.value


# --- elementary ingredients (deliberately local) -----------------------------


def _util_scalar(u, w: float) -> float:
    if u.family == "log":
        return math.log(w) if w > 0 else -math.inf
    if u.family == "power":
        p = u.exponent
        if w <= 0:
            return 0.0 if p > 0 else -math.inf
        return w ** p / p
    xs = [pt[0] for pt in u.points]
    us = [pt[1] for pt in u.points]
    if w < xs[0] or w > xs[-1]:
        raise ScaleRefused("tabulated utility outside its grid in the oracle")
    from bisect import bisect_right

    k = min(max(bisect_right(xs, w) - 1, 0), len(xs) - 2)
    frac = (w - xs[k]) / (xs[k + 1] - xs[k])
    return us[k] + frac * (us[k + 1] - us[k])


def _util_matrix(u, W: np.ndarray) -> np.ndarray:
    out = np.empty(W.shape)
    flat = W.ravel()
    res = out.ravel()
    for i in range(flat.size):
        v = _util_scalar(u, float(flat[i]))
        res[i] = _NEG_SENTINEL if v == -math.inf else v
    return out


def _marginal_at(u, w: float) -> float:
    if w <= 0:
        return math.inf
    if u.family == "log":
        return 1.0 / w
    if u.family == "power":
        return w ** (u.exponent - 1.0)
    xs = [pt[0] for pt in u.points]
    us = [pt[1] for pt in u.points]
    return max((us[k + 1] - us[k]) / (xs[k + 1] - xs[k])
               for k in range(len(xs) - 1))


def _local_lipschitz(u, wealth_row: np.ndarray, cell: float) -> float:
    """Crude local |U'| bound around a wealth profile: marginals are
    evaluated one grid cell below each positive wealth (floored at half)."""
    vals = []
    for w in wealth_row:
        if w > 0:
            vals.append(_marginal_at(u, max(w - cell, 0.5 * w)))
    return max(vals) if vals else 0.0


def _kl_vector(M: np.ndarray, p: np.ndarray) -> np.ndarray:
    out = np.zeros(M.shape[0])
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            qj = M[i, j]
            if qj > 0:
                acc += qj * math.log(qj / p[j])
        out[i] = acc
    return out


def _simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All probability vectors with components at multiples of
    1/(resolution-1)."""
    steps = resolution - 1
    rows = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], steps, n)
    return np.array(rows, dtype=float) / steps


def _strategy_grid(market: FiniteMarket, x: float, per_dim: int,
                   limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Feasible quotient-coordinate grid points and their wealth matrix."""
    poly = admissible_strategy_polytope(market, x)
    k = poly.dim
    if k == 0:
        Z = np.zeros((1, 0))
        return Z, np.full((1, market.n_states), float(x))
    axes = []
    for j in range(k):
        lo, hi = poly.box[j]
        pad = 1e-12 * max(1.0, abs(lo), abs(hi))
        axis = np.linspace(lo - pad, hi + pad, per_dim)
        if not np.any(np.isclose(axis, 0.0, atol=1e-15)):
            axis = np.sort(np.append(axis, 0.0))
        axes.append(axis)
    mesh = np.meshgrid(*axes, indexing="ij")
    Z = np.stack([m.ravel() for m in mesh], axis=1)
    est = Z.shape[0] * market.n_states * 8 * 3
    if est > limit:
        raise ScaleRefused(f"strategy grid needs ~{est/2**20:.0f} MiB")
    W = x + Z @ poly.A.T
    feasible = (W >= -1e-12).all(axis=1)
    return Z[feasible], np.maximum(W[feasible], 0.0)


def _measure_grid(spec, family: MeasureFamily, resolution: int,
                  limit: int) -> np.ndarray:
    if family.kind == "full_simplex":
        n = family.n_states
        if n > 4:
            raise ScaleRefused("simplex grid capped at four states")
        M = _simplex_grid(n, resolution)
    else:
        K = len(family.generators)
        if K > 4:
            raise ScaleRefused("weight grid capped at four generators")
        Wg = _simplex_grid(K, resolution)
        M = Wg @ family.vertex_matrix()
    if M.size * 8 > limit:
        raise ScaleRefused("measure grid exceeds the memory budget")
    return M


def _inner_values(spec, family, M: np.ndarray, utils: np.ndarray,
                  reference: np.ndarray) -> np.ndarray:
    """G(q, E_q[utils]) for every grid measure (sentinel encoding for -inf)."""
    E = M @ utils
    if isinstance(spec, MultiplePriors):
        return E
    if isinstance(spec, Variational):
        if isinstance(spec.penalty, EntropicPenalty):
            return E + _kl_vector(M, reference) / spec.penalty.theta
        pen_P = np.array([m.probabilities for m in spec.penalty.measures])
        gam = np.array(spec.penalty.gammas)
        # cheapest representation of each grid row by the penalty table
        out = np.empty(M.shape[0])
        for i in range(M.shape[0]):
            res = linprog(gam, A_eq=np.vstack([pen_P.T, np.ones(len(gam))]),
                          b_eq=np.concatenate([M[i], [1.0]]),
                          bounds=[(0, None)] * len(gam), method="highs")
            out[i] = E[i] + (res.fun if res.success else np.inf)
        return out
    raise UnsupportedVariant(
        f"oracle has no grid rule for {type(spec).__name__}")


def _smooth_value_local(spec: SmoothCriterion, exps: np.ndarray) -> np.ndarray:
    mu = np.array([w for _, w in spec.mixture])
    if spec.phi_kind == "exponential":
        a = spec.phi_param
        if a == 0.0:
            return exps @ mu
        return -np.log(np.exp(-a * exps) @ mu) / a
    b = spec.phi_param
    return (np.maximum(exps, 0.0) ** b @ mu) ** (1.0 / b)


# --- references ---------------------------------------------------------------


def _check_scale(market: FiniteMarket):
    if market.n_states > 4 or market.strategy_basis.shape[1] > 2:
        raise ScaleRefused("oracle handles at most 4 states and 2 tradable "
                           "dimensions")


def oracle_u(market: FiniteMarket, spec: AmbiguitySpec, family: MeasureFamily,
             u, x: float, cfg: OracleConfig = OracleConfig()) -> OracleValue:
    """Exhaustive max-over-strategies of min-over-measures of the criterion."""
    _check_scale(market)
    if isinstance(spec, CustomGrid):
        raise UnsupportedVariant("oracle does not grade tabulated indices")
    Z, W = _strategy_grid(market, x, cfg.strategy_grid_per_dim,
                          cfg.memory_limit_bytes)
    utils = _util_matrix(u, W)
    if isinstance(spec, SmoothCriterion):
        mixP = np.array([m.probabilities for m, _ in spec.mixture])
        exps = utils @ mixP.T
        vals = np.array([_smooth_value_local(spec, e) for e in exps])
        mgrid_h = 0.0
    else:
        M = _measure_grid(spec, family, cfg.simplex_grid_resolution,
                          cfg.memory_limit_bytes)
        vals = np.empty(W.shape[0])
        for s in range(W.shape[0]):
            vals[s] = _inner_values(spec, family, M, utils[s],
                                    market.reference).min()
        if M.shape[0] == 1:
            mgrid_h = 0.0
        else:
            finite = utils[utils > _NEG_SENTINEL / 2]
            spread = float(finite.max() - finite.min()) if finite.size else 0.0
            spread = min(spread, 10.0 * max(1.0, abs(float(vals.max()))))
            mgrid_h = spread * market.n_states / (cfg.simplex_grid_resolution - 1)
    best = int(np.argmax(vals))
    value = float(vals[best])
    poly = admissible_strategy_polytope(market, x)
    steps = [(poly.box[j, 1] - poly.box[j, 0]) / (cfg.strategy_grid_per_dim - 1)
             for j in range(poly.dim)]
    cell = sum(float(np.abs(poly.A[:, j]).max()) * h
               for j, h in enumerate(steps))
    lip = _local_lipschitz(u, W[best], cell)
    sgrid_h = 0.5 * cell * lip if poly.dim else 0.0
    return OracleValue(value=value, grid_bound=float(sgrid_h + mgrid_h))


def oracle_v(market: FiniteMarket, spec: AmbiguitySpec, family: MeasureFamily,
             u, x: float, y: float,
             cfg: OracleConfig = OracleConfig()) -> OracleValue:
    """Exhaustive dual value: min over grid measures of
    G(q, v_q(y) + x y), with v_q itself gridded through its conjugate
    definition sup_x' (u_q(x') - x' y) on a geometric budget ladder."""
    _check_scale(market)
    if isinstance(spec, (CustomGrid, SmoothCriterion)):
        raise UnsupportedVariant("oracle dual grades index variants only")
    Z, W1 = _strategy_grid(market, 1.0, cfg.strategy_grid_per_dim,
                           cfg.memory_limit_bytes)
    M = _measure_grid(spec, family, cfg.simplex_grid_resolution,
                      cfg.memory_limit_bytes)
    ladder = np.geomspace(1e-6, 1e6, cfg.y_grid_points)
    v = np.full(M.shape[0], -np.inf)
    x_at = np.zeros(M.shape[0])
    for xp in ladder:
        utils = _util_matrix(u, xp * W1)
        uq = np.max(M @ utils.T, axis=1)
        cand = uq - xp * y
        take = cand > v
        v = np.where(take, cand, v)
        x_at = np.where(take, xp, x_at)
    if isinstance(spec, Variational) and isinstance(spec.penalty, EntropicPenalty):
        pen = _kl_vector(M, market.reference) / spec.penalty.theta
    elif isinstance(spec, Variational):
        pen = np.array([_inner_values(spec, family, M[i:i + 1],
                                      np.zeros(market.n_states),
                                      market.reference)[0]
                        for i in range(M.shape[0])])
    else:
        pen = np.zeros(M.shape[0])
    total = v + x * y + pen
    k = int(np.argmin(total))
    value = float(total[k])
    # second-order ladder coarseness near the conjugate maximizer, plus
    # simplex coarseness when the measure grid is non-trivial
    ratio = (1e6 / 1e-6) ** (1.0 / (cfg.y_grid_points - 1)) - 1.0
    bound = (ratio ** 2 / 8.0) * (1.0 + abs(value) + y * float(x_at[k]))
    if M.shape[0] > 1:
        bound += market.n_states / (cfg.simplex_grid_resolution - 1) * \
            max(1.0, abs(value))
    return OracleValue(value=value, grid_bound=float(bound))


# --- bipolar check -------------------------------------------------------------


@dataclass(frozen=True)
class BipolarReport:
    forward_violations: int
    forward_max_excess: float
    reverse_violations: int
    reverse_max_slack: float
    superbudget_rejected: bool
    samples: int


def _martingale_vertices(market: FiniteMarket) -> np.ndarray:
    """Extreme points of {q >= 0 : sum q = 1, S_T' q = S_0} by support
    enumeration (desk scale)."""
    n, d = market.n_states, market.d_assets
    A_full = np.vstack([np.ones(n), market.terminal_prices.T])
    b = np.concatenate([[1.0], market.initial_prices])
    found = {}
    for size in range(1, min(n, d + 2) + 1):
        for supp in combinations(range(n), size):
            As = A_full[:, list(supp)]
            q_s, *_ = np.linalg.lstsq(As, b, rcond=None)
            if (q_s < -1e-10).any():
                continue
            if np.abs(As @ q_s - b).max() > 1e-9 * (1.0 + np.abs(b).max()):
                continue
            q = np.zeros(n)
            q[list(supp)] = np.maximum(q_s, 0.0)
            q = q / q.sum()
            found[tuple(np.round(q, 10))] = q
    if not found:
        raise ScaleRefused("no martingale measures found; market is not "
                           "arbitrage-free")
    return np.array([found[k] for k in sorted(found)])


def oracle_bipolar(market: FiniteMarket, cfg: OracleConfig = OracleConfig(),
                   *, seed: int = 0, samples: int = 100,
                   lp_tol: float = 1e-6) -> BipolarReport:
    """Sample both sides of the attainability/deflator pairing.

    Forward: shaved strategy payoffs must respect every martingale deflator
    budget exactly. Reverse: a non-negative claim passing all gridded
    deflator budgets at budget x must be superhedgeable from x, verified by
    linear programming within ``lp_tol``. Also confirms that a doubled cash
    payoff is rejected by the martingale deflator.
    """
    _check_scale(market)
    rng = np.random.default_rng(seed)
    x = 1.0
    qv = _martingale_vertices(market)
    dens = qv / market.reference[None, :]
    poly = admissible_strategy_polytope(market, x)
    p = market.reference

    fwd_viol = 0
    fwd_excess = 0.0
    for _ in range(samples):
        if poly.dim:
            wmix = rng.dirichlet(np.ones(len(poly.vertices)))
            z = wmix @ poly.vertices
            wealth = np.maximum(x + poly.A @ z, 0.0)
        else:
            wealth = np.full(market.n_states, x)
        g = wealth * rng.uniform(0.2, 1.0, market.n_states)
        pay = np.max(dens @ (p * g))
        excess = pay - x
        if excess > 1e-9:
            fwd_viol += 1
        fwd_excess = max(fwd_excess, excess)

    rev_viol = 0
    rev_slack = 0.0
    d = market.d_assets
    inc = market.price_increments
    for _ in range(samples):
        g = rng.uniform(0.0, 2.0, market.n_states)
        price = np.max(dens @ (p * g))
        if price <= 0:
            continue
        g = g * (x / price)  # passes every gridded deflator budget exactly
        # superhedge: min s with x + pi . increments + s >= g statewise
        c = np.zeros(d + 1)
        c[-1] = 1.0
        A_ub = np.hstack([-inc, -np.ones((market.n_states, 1))])
        b_ub = x - g
        res = linprog(c, A_ub=A_ub, b_ub=b_ub,
                      bounds=[(None, None)] * d + [(0, None)],
                      method="highs")
        slack = float(res.fun) if res.success else math.inf
        if slack > lp_tol:
            rev_viol += 1
        rev_slack = max(rev_slack, slack)

    double_cash = np.full(market.n_states, 2.0 * x)
    superbudget_rejected = bool(np.max(dens @ (p * double_cash)) > x + 1e-9)
    return BipolarReport(forward_violations=fwd_viol,
                         forward_max_excess=float(fwd_excess),
                         reverse_violations=rev_viol,
                         reverse_max_slack=float(rev_slack),
                         superbudget_rejected=superbudget_rejected,
                         samples=samples)
