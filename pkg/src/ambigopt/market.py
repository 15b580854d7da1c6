"""Finite-state one-period market.

A market holds initial prices, a terminal price matrix (one row per state)
and a strictly positive reference probability whose only role is to fix the
null sets. Admissibility of a strategy means non-negative terminal wealth in
every state. No-arbitrage is the existence of a strictly positive martingale
measure, checked by linear programming.

Strategies that produce identical wealth in every state are quotiented out:
solvers work in an orthonormal basis of the row space of the price
increments, in which the admissible set is a bounded polytope whenever the
market is arbitrage-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from . import optim
from .ambiguity import Measure
from .errors import (
    ArbitrageDetected,
    DimensionMismatch,
    Inadmissible,
    MeasureInvariantViolated,
    NegativeDeflator,
    NoArbitrageViolated,
)

_WEALTH_TOL = 1e-12
_NOARB_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class FiniteMarket:
    """One-period market with ``n_states`` states and ``d_assets`` assets."""

    initial_prices: np.ndarray
    terminal_prices: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        s0 = np.asarray(self.initial_prices, dtype=float).copy()
        st = np.atleast_2d(np.asarray(self.terminal_prices, dtype=float)).copy()
        p = np.asarray(self.reference, dtype=float).copy()
        if s0.ndim != 1:
            raise DimensionMismatch("initial prices must be a vector")
        if st.shape[1] != s0.size:
            raise DimensionMismatch(
                f"terminal prices have {st.shape[1]} columns, expected {s0.size}")
        if p.ndim != 1 or p.size != st.shape[0]:
            raise DimensionMismatch("reference length must match the state count")
        if (s0 <= 0).any():
            raise MeasureInvariantViolated("initial prices must be strictly positive")
        if (st < 0).any():
            raise MeasureInvariantViolated("terminal prices must be non-negative")
        if (p <= 0).any():
            raise MeasureInvariantViolated("reference probabilities must be "
                                           "strictly positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise MeasureInvariantViolated("reference probabilities must sum to 1")
        for arr in (s0, st, p):
            arr.flags.writeable = False
        object.__setattr__(self, "initial_prices", s0)
        object.__setattr__(self, "terminal_prices", st)
        object.__setattr__(self, "reference", p)

    @property
    def n_states(self) -> int:
        return self.terminal_prices.shape[0]

    @property
    def d_assets(self) -> int:
        return self.initial_prices.size

    @cached_property
    def price_increments(self) -> np.ndarray:
        """S_T - S_0 per state and asset."""
        return self.terminal_prices - self.initial_prices[None, :]

    @cached_property
    def strategy_basis(self) -> np.ndarray:
        """Orthonormal basis of the row space of the price increments
        (d_assets x rank). Strategies outside this span change no payoff."""
        d = self.d_assets
        if d == 0:
            return np.zeros((0, 0))
        _, sing, vt = np.linalg.svd(self.price_increments, full_matrices=True)
        cut = 1e-12 * (sing[0] if sing.size else 1.0)
        rank = int(np.sum(sing > cut))
        basis = vt[:rank].T
        for j in range(rank):  # deterministic column signs
            k = int(np.argmax(np.abs(basis[:, j])))
            if basis[k, j] < 0:
                basis[:, j] = -basis[:, j]
        return basis

    @cached_property
    def null_directions(self) -> np.ndarray:
        d = self.d_assets
        if d == 0:
            return np.zeros((0, 0))
        _, sing, vt = np.linalg.svd(self.price_increments, full_matrices=True)
        cut = 1e-12 * (sing[0] if sing.size else 1.0)
        rank = int(np.sum(sing > cut))
        null = vt[rank:].T
        for j in range(null.shape[1]):
            k = int(np.argmax(np.abs(null[:, j])))
            if null[k, j] < 0:
                null[:, j] = -null[:, j]
        return null

    @cached_property
    def reduced_increments(self) -> np.ndarray:
        """Price increments expressed in the quotient basis (n_states x rank)."""
        return self.price_increments @ self.strategy_basis

    @cached_property
    def _no_arbitrage_cache(self):
        return check_no_arbitrage(self)

    def assert_no_arbitrage(self) -> Measure:
        ok, witness = self._no_arbitrage_cache
        if not ok:
            raise NoArbitrageViolated(
                "no strictly positive martingale measure exists")
        return witness

    @cached_property
    def _recession_free(self) -> bool:
        _assert_no_recession(self.reduced_increments)
        return True

    @cached_property
    def _unit_vertices(self) -> np.ndarray:
        """Vertices of the admissible set at unit budget, reduced coordinates."""
        A = self.reduced_increments
        if A.shape[1] == 0:
            return np.zeros((1, 0))
        assert self._recession_free
        return optim.polytope_vertices(A, -np.ones(self.n_states))


@dataclass(frozen=True, eq=False)
class Strategy:
    """Asset holdings."""

    holdings: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.holdings, dtype=float).copy()
        if h.ndim != 1 or not np.isfinite(h).all():
            raise DimensionMismatch("holdings must be a finite vector")
        h.flags.writeable = False
        object.__setattr__(self, "holdings", h)


@dataclass(frozen=True, eq=False)
class Payoff:
    """Non-negative terminal wealth per state, with the budget that funded it."""

    wealth: np.ndarray
    budget: float

    def __post_init__(self):
        w = np.asarray(self.wealth, dtype=float).copy()
        if (w < 0).any():
            raise Inadmissible("payoff has a negative component")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        w.flags.writeable = False
        object.__setattr__(self, "wealth", w)


@dataclass(frozen=True, eq=False)
class StrategyPolytope:
    """The admissible strategies at a given budget, in quotient coordinates.

    The constraint system is A z >= -budget (componentwise), where A is the
    reduced increment matrix; ``basis`` lifts quotient coordinates back to
    asset holdings, and ``null_directions`` spans the redundant strategies
    that were quotiented out.
    """

    A: np.ndarray
    budget: float
    basis: np.ndarray
    null_directions: np.ndarray
    vertices: np.ndarray
    box: np.ndarray
    description: str

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def lift(self, z: np.ndarray) -> np.ndarray:
        """Quotient coordinates to asset holdings."""
        return self.basis @ np.asarray(z, dtype=float)

    def wealth(self, x: float, z: np.ndarray) -> np.ndarray:
        return x + self.A @ np.asarray(z, dtype=float)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        if self.dim == 0:
            return np.asarray(z).size == 0
        return bool((self.A @ np.asarray(z, dtype=float) >= -self.budget - tol).all())

    @property
    def center(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


def check_no_arbitrage(market: FiniteMarket):
    """Whether a strictly positive martingale measure exists; returns the
    most interior witness when it does.

    Solves max t subject to q_i >= t, sum q = 1, q' S_T = S_0 and accepts
    when t exceeds 1e-9; the certificate is re-verified against the pricing
    equations before being returned.
    """
    n, d = market.n_states, market.d_assets
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    b_ub = np.zeros(n)
    a_eq = np.zeros((d + 1, n + 1))
    a_eq[0, :n] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[0] = 1.0
    a_eq[1:, :n] = market.terminal_prices.T
    b_eq[1:] = market.initial_prices
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0.0, 1.0)] * n + [(0.0, 1.0)], method="highs")
    if not res.success or res.x is None:
        return False, None
    q, t = res.x[:n], res.x[-1]
    if t < _NOARB_EPS:
        return False, None
    q = q / q.sum()
    price_err = np.abs(market.terminal_prices.T @ q - market.initial_prices)
    scale = 1.0 + np.abs(market.initial_prices)
    if (q < _NOARB_EPS / 2).any() or (price_err > 1e-7 * scale).any():
        return False, None
    return True, Measure(q, market.reference)


def strategy_payoff(market: FiniteMarket, x: float, strategy: Strategy) -> Payoff:
    """Terminal wealth x + pi . (S_T - S_0) per state.

    Components below -1e-12 raise Inadmissible; tiny negatives from floating
    point are clamped to zero.
    """
    if not x > 0:
        raise ValueError("budget must be positive")
    pi = strategy.holdings
    if pi.size != market.d_assets:
        raise DimensionMismatch(
            f"strategy has {pi.size} holdings, market has {market.d_assets} assets")
    wealth = x + market.price_increments @ pi
    worst = float(wealth.min()) if wealth.size else 0.0
    if worst < -_WEALTH_TOL:
        raise Inadmissible(
            f"wealth {worst:.3e} in state {int(np.argmin(wealth))} is negative")
    wealth = np.maximum(wealth, 0.0)
    return Payoff(wealth=wealth, budget=float(x))


def _assert_no_recession(A: np.ndarray) -> None:
    """Reject reduced systems with a recession direction A d >= 0, A d != 0.

    Under no-arbitrage such directions cannot exist; finding one is an
    arbitrage certificate.
    """
    n, k = A.shape
    if k == 0:
        return
    # max sum(A d) subject to 0 <= A d <= 1 is positive iff a direction exists
    c = -A.sum(axis=0)
    res = linprog(c, A_ub=np.vstack([A, -A]),
                  b_ub=np.concatenate([np.ones(n), np.zeros(n)]),
                  bounds=[(None, None)] * k, method="highs")
    if res.success and res.fun is not None and -res.fun > 1e-9:
        raise ArbitrageDetected("admissible set is unbounded: a strategy with "
                                "non-negative, non-zero gains exists")


def admissible_strategy_polytope(market: FiniteMarket, x: float) -> StrategyPolytope:
    """The admissible strategy set {pi : x + pi . increments >= 0 statewise}
    expressed in quotient coordinates, with vertices and a bounding box.

    Null directions (strategies with identically zero gains, such as
    duplicated assets) are quotiented out and reported in the description.
    Raises ArbitrageDetected when the quotient set is unbounded.
    """
    if not x > 0:
        raise ValueError("budget must be positive")
    A = market.reduced_increments
    k = A.shape[1]
    if k == 0:
        vertices = np.zeros((1, 0))
        box = np.zeros((0, 2))
        desc = "zero tradable dimensions; only the cash point"
    else:
        assert market._recession_free
        vertices = market._unit_vertices * x
        box = np.stack([vertices.min(axis=0), vertices.max(axis=0)], axis=1)
        desc = (f"{market.n_states} inequalities in {k} quotient dimensions, "
                f"{vertices.shape[0]} vertices")
    n_null = market.null_directions.shape[1]
    if n_null:
        desc += f"; {n_null} null direction(s) quotiented out"
    return StrategyPolytope(A=A, budget=float(x), basis=market.strategy_basis,
                            null_directions=market.null_directions,
                            vertices=vertices, box=box, description=desc)


def deflator_member(market: FiniteMarket, h, y: float, tol: float = 1e-9) -> bool:
    """Whether the non-negative state vector h prices every unit-budget
    attainable payoff within the budget y.

    The pairing sup over admissible payoffs of E[h X_T] is linear in the
    strategy, so the supremum over the admissible polytope at unit budget is
    attained at a vertex; recession directions were quotiented out and the
    remaining ones contribute nothing because h >= 0.
    """
    h = np.asarray(h, dtype=float)
    if h.size != market.n_states:
        raise DimensionMismatch("deflator length must match the state count")
    if (h < 0).any():
        raise NegativeDeflator("deflator has a negative component")
    if not y > 0:
        raise ValueError("level must be positive")
    ph = market.reference * h
    base = float(ph.sum())
    poly = admissible_strategy_polytope(market, 1.0)
    if poly.dim == 0:
        return base <= y + tol
    coefs = ph @ poly.A
    best = base + float(np.max(poly.vertices @ coefs))
    return best <= y + tol
