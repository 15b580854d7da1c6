import numpy as np
import pytest

from ambigopt import (
    FiniteMarket,
    Measure,
    Strategy,
    admissible_strategy_polytope,
    check_no_arbitrage,
    deflator_member,
    strategy_payoff,
)
from ambigopt.errors import (
    ArbitrageDetected,
    DimensionMismatch,
    Inadmissible,
    MeasureInvariantViolated,
    NegativeDeflator,
)
from conftest import random_no_arbitrage_market


@pytest.fixture
def market():
    return FiniteMarket([1.0], [[2.0], [0.5]], [0.5, 0.5])


class TestConstruction:
    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            FiniteMarket([1.0, 2.0], [[2.0], [0.5]], [0.5, 0.5])

    def test_reference_must_be_positive(self):
        with pytest.raises(MeasureInvariantViolated):
            FiniteMarket([1.0], [[2.0], [0.5]], [1.0, 0.0])

    def test_reference_must_sum_to_one(self):
        with pytest.raises(MeasureInvariantViolated):
            FiniteMarket([1.0], [[2.0], [0.5]], [0.5, 0.6])


class TestNoArbitrage:
    def test_two_state_witness(self, market):
        ok, q = check_no_arbitrage(market)
        assert ok
        # 2q + 0.5(1-q) = 1 has the unique solution q = 1/3
        assert np.allclose(q.probabilities, [1 / 3, 2 / 3], atol=1e-7)

    def test_rising_price_is_arbitrage(self):
        bad = FiniteMarket([1.0], [[2.0], [1.5]], [0.5, 0.5])
        ok, witness = check_no_arbitrage(bad)
        assert not ok and witness is None

    @pytest.mark.parametrize("seed", range(12))
    def test_agreement_with_dominant_strategy_search(self, seed):
        """Brute force: arbitrage exists iff some strategy on a grid has
        non-negative gains everywhere and a strictly positive gain somewhere."""
        rng = np.random.default_rng(seed)
        n, d = 5, 2
        if seed % 3 == 0:
            m = random_no_arbitrage_market(rng, n, d)
        else:
            st = rng.uniform(0.2, 2.0, (n, d))
            s0 = rng.uniform(0.2, 2.0, d)
            p = rng.dirichlet(np.ones(n))
            p = p * 0.8 + 0.2 / n
            m = FiniteMarket(s0, st, p / p.sum())
        ok, _ = check_no_arbitrage(m)
        inc = m.price_increments
        axis = np.linspace(-5, 5, 41)
        found = False
        for a in axis:
            gains = inc @ np.stack([np.full(axis.size, a), axis])
            cand = (gains >= -1e-12).all(axis=0) & (gains.max(axis=0) > 1e-6)
            if cand.any():
                found = True
                break
        if found:
            assert not ok
        if ok:
            assert not found

    def test_witness_is_martingale(self, market):
        _, q = check_no_arbitrage(market)
        pricing = market.terminal_prices.T @ q.probabilities
        assert np.allclose(pricing, market.initial_prices, atol=1e-8)


class TestStrategyPayoff:
    def test_zero_strategy_is_cash(self, market):
        pay = strategy_payoff(market, 2.5, Strategy([0.0]))
        assert np.allclose(pay.wealth, 2.5)

    def test_two_state_example(self, market):
        pay = strategy_payoff(market, 1.0, Strategy([0.5]))
        # 1 + 0.5 (2 - 1) and 1 + 0.5 (0.5 - 1)
        assert np.allclose(pay.wealth, [1.5, 0.75])

    def test_inadmissible_strategy(self, market):
        with pytest.raises(Inadmissible):
            strategy_payoff(market, 1.0, Strategy([-3.0]))

    def test_tiny_negative_clamped(self, market):
        pay = strategy_payoff(market, 1.0, Strategy([2.0 + 1e-13]))
        assert pay.wealth.min() == 0.0


class TestPolytope:
    def test_two_state_interval(self, market):
        poly = admissible_strategy_polytope(market, 1.0)
        # 1 + pi >= 0 and 1 - 0.5 pi >= 0, so pi in [-1, 2]
        assert sorted(v[0] for v in poly.vertices) == pytest.approx([-1.0, 2.0])

    def test_zero_asset_market(self):
        m = FiniteMarket(np.ones(0), np.zeros((2, 0)), [0.5, 0.5])
        poly = admissible_strategy_polytope(m, 1.0)
        assert poly.dim == 0
        assert poly.vertices.shape == (1, 0)

    def test_duplicated_asset_quotiented(self):
        m = FiniteMarket([1.0, 1.0], [[2.0, 2.0], [0.5, 0.5]], [0.5, 0.5])
        poly = admissible_strategy_polytope(m, 1.0)
        assert poly.dim == 1
        assert poly.null_directions.shape == (2, 1)
        assert "null direction" in poly.description
        # the null direction leaves every payoff unchanged
        null = poly.null_directions[:, 0]
        assert np.allclose(m.price_increments @ null, 0.0)

    def test_arbitrage_detected_on_unbounded_set(self):
        bad = FiniteMarket([1.0], [[2.0], [1.5]], [0.5, 0.5])
        with pytest.raises(ArbitrageDetected):
            admissible_strategy_polytope(bad, 1.0)

    def test_scaling_with_budget(self, market):
        v1 = admissible_strategy_polytope(market, 1.0).vertices
        v3 = admissible_strategy_polytope(market, 3.0).vertices
        assert np.allclose(3.0 * v1, v3)


class TestDeflator:
    def test_martingale_density_is_member(self, market):
        _, q = check_no_arbitrage(market)
        z = q.density
        for y in (0.5, 1.0, 3.0):
            assert deflator_member(market, y * z, y)

    def test_scaled_density_fails(self, market):
        _, q = check_no_arbitrage(market)
        assert not deflator_member(market, 2.0 * q.density, 1.0)

    def test_negative_deflator_rejected(self, market):
        with pytest.raises(NegativeDeflator):
            deflator_member(market, np.array([-0.1, 1.0]), 1.0)

    @pytest.mark.parametrize("seed", range(8))
    def test_agreement_with_grid_maximization(self, seed):
        rng = np.random.default_rng(100 + seed)
        m = random_no_arbitrage_market(rng, 3, 1)
        poly = admissible_strategy_polytope(m, 1.0)
        lo, hi = poly.box[0]
        grid = np.linspace(lo, hi, 4001)
        for _ in range(20):
            h = rng.uniform(0, 2.0, 3)
            y = rng.uniform(0.2, 2.0)
            wealth = 1.0 + np.outer(grid, poly.A[:, 0])
            pays = np.clip(wealth, 0, None) @ (m.reference * h)
            brute = pays.max() <= y + 1e-9
            assert deflator_member(m, h, y) == brute


class TestBipolarConsistency:
    @pytest.mark.parametrize("seed", range(4))
    def test_pairing_respects_budget(self, seed):
        """Shaved attainable payoffs against member deflators satisfy the
        budget inequality E[g h] <= x y."""
        rng = np.random.default_rng(200 + seed)
        m = random_no_arbitrage_market(rng, 4, 2)
        poly = admissible_strategy_polytope(m, 1.0)
        _, qmm = check_no_arbitrage(m)
        x = 1.0
        deflators = []
        for _ in range(30):
            y = rng.uniform(0.2, 2.0)
            h = y * qmm.density * rng.uniform(0.3, 1.0)
            if deflator_member(m, h, y):
                deflators.append((h, y))
        assert deflators
        for _ in range(200):
            w = rng.dirichlet(np.ones(len(poly.vertices)))
            z = w @ poly.vertices
            g = np.maximum(x + poly.A @ z, 0.0) * rng.uniform(0.2, 1.0, 4)
            for h, y in deflators:
                assert float(m.reference @ (g * h)) <= x * y + 1e-8

    def test_cash_always_attainable(self, market):
        pay = strategy_payoff(market, 1.7, Strategy([0.0]))
        assert np.allclose(pay.wealth, 1.7)
