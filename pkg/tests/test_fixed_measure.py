import math

import numpy as np
import pytest
from scipy.optimize import minimize

from ambigopt import (
    FiniteMarket,
    Measure,
    admissible_strategy_polytope,
    check_no_arbitrage,
    conjugacy_report,
    conjugate,
    deflator_member,
    dual_value,
    eval_utility,
    log_utility,
    max_expected_utility,
    power_utility,
    recover_deflator,
)
from ambigopt.errors import MembershipFailed, NonpositiveDual
from conftest import random_no_arbitrage_market, reference_measure

LOG = log_utility()
SQRT = power_utility(0.5)


@pytest.fixture
def market():
    return FiniteMarket([1.0], [[2.0], [0.5]], [0.5, 0.5])


@pytest.fixture
def p_measure(market):
    return reference_measure(market)


@pytest.fixture
def mm_measure(market):
    return check_no_arbitrage(market)[1]


class TestPrimal:
    def test_two_state_log(self, market, p_measure, classical_log_value):
        sol = max_expected_utility(market, p_measure, LOG, 1.0)
        assert sol.value == pytest.approx(classical_log_value, abs=1e-12)
        assert sol.strategy.holdings == pytest.approx([0.5], abs=1e-9)
        assert sol.payoff.wealth == pytest.approx([1.5, 0.75], abs=1e-9)
        # first-order condition 0.5/(1+pi) = 0.25/(1-0.5 pi) at pi = 0.5,
        # cross-checked by a strategy grid
        grid = np.linspace(-1, 2, 30001)
        vals = 0.5 * np.log(1 + grid) + 0.5 * np.log(
            np.maximum(1 - 0.5 * grid, 1e-300))
        assert sol.value >= vals.max() - 1e-10

    def test_dirac_pushes_to_boundary(self, market):
        dirac = Measure([1.0, 0.0], market.reference)
        sol = max_expected_utility(market, dirac, LOG, 1.0)
        assert sol.value == pytest.approx(math.log(3.0), abs=1e-9)
        assert sol.payoff.wealth == pytest.approx([3.0, 0.0], abs=1e-8)
        grid = np.linspace(-1 + 1e-9, 2, 30001)
        assert sol.value >= np.log(1 + grid).max() - 1e-10

    def test_martingale_measure_prefers_cash(self, market, mm_measure):
        for u in (LOG, SQRT):
            sol = max_expected_utility(market, mm_measure, u, 1.0)
            assert sol.value == pytest.approx(eval_utility(u, 1.0), abs=1e-9)
            assert np.allclose(sol.payoff.wealth, 1.0, atol=1e-6)

    def test_value_dominates_cash(self, market, p_measure):
        for u in (LOG, SQRT):
            for x in (0.5, 1.0, 4.0):
                sol = max_expected_utility(market, p_measure, u, x)
                assert sol.value >= eval_utility(u, x) - 1e-12

    @pytest.mark.parametrize("seed", range(6))
    def test_kkt_residual_small_on_random_instances(self, seed):
        rng = np.random.default_rng(300 + seed)
        m = random_no_arbitrage_market(rng, int(rng.integers(2, 5)),
                                       int(rng.integers(1, 3)))
        q = reference_measure(m)
        for u in (LOG, SQRT):
            sol = max_expected_utility(m, q, u, 1.0)
            assert sol.kkt_residual <= 1e-8

    def test_concave_monotone_in_budget(self, market, p_measure):
        xs = np.geomspace(0.25, 8.0, 9)
        vals = [max_expected_utility(market, p_measure, LOG, x).value
                for x in xs]
        assert all(b >= a - 1e-8 for a, b in zip(vals, vals[1:]))
        for i in range(1, len(xs) - 1):
            lam = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1])
            chord = (1 - lam) * vals[i - 1] + lam * vals[i + 1]
            assert vals[i] >= chord - 1e-8


class TestDual:
    def test_martingale_log_closed_form(self, market, mm_measure):
        for y in (0.25, 1.0, 4.0):
            assert dual_value(market, mm_measure, LOG, y) == pytest.approx(
                -math.log(y) - 1.0, abs=1e-9)

    def test_shifted_log_closed_form(self, market, p_measure,
                                     classical_log_value):
        # u_p(x) = ln x + c, so v_p(y) = -ln y - 1 + c
        for y in (0.5, 1.0, 2.0):
            want = -math.log(y) - 1.0 + classical_log_value
            assert dual_value(market, p_measure, LOG, y) == pytest.approx(
                want, abs=1e-9)

    def test_nonpositive_level_rejected(self, market, p_measure):
        with pytest.raises(NonpositiveDual):
            dual_value(market, p_measure, LOG, 0.0)

    def test_slope_vanishes_at_infinity(self, market, p_measure):
        big = 1e4
        slope = (dual_value(market, p_measure, LOG, 2 * big)
                 - dual_value(market, p_measure, LOG, big)) / big
        assert abs(slope) < 1e-3

    def test_slope_diverges_at_zero(self, market, p_measure):
        eps = 1e-4
        slope = (dual_value(market, p_measure, LOG, 2 * eps)
                 - dual_value(market, p_measure, LOG, eps)) / eps
        assert slope < -1e3

    def test_primal_slopes(self, market, p_measure):
        eps = 1e-5
        up0 = (max_expected_utility(market, p_measure, LOG, 2 * eps).value
               - max_expected_utility(market, p_measure, LOG, eps).value) / eps
        assert up0 > 1e3
        big = 1e4
        upinf = (max_expected_utility(market, p_measure, LOG, 2 * big).value
                 - max_expected_utility(market, p_measure, LOG, big).value) / big
        assert upinf < 1e-3


class TestConjugacy:
    def test_closed_form_gap(self, market, mm_measure):
        rep = conjugacy_report(market, mm_measure, LOG,
                               [0.1, 0.5, 1.0, 4.0, 10.0],
                               list(np.geomspace(0.1, 10, 9)))
        assert rep.max_gap <= 1e-5
        assert rep.fenchel_margin >= -1e-8

    def test_weak_duality_margin(self, market, p_measure):
        rep = conjugacy_report(market, p_measure, SQRT, [0.5, 1.0, 2.0],
                               list(np.geomspace(0.1, 5, 7)))
        assert rep.fenchel_margin >= -1e-8
        assert rep.max_gap <= 1e-4

    @pytest.mark.parametrize("seed", range(3))
    def test_entropic_tilt_gap_on_random_markets(self, seed):
        rng = np.random.default_rng(400 + seed)
        m = random_no_arbitrage_market(rng, 4, 1)
        # exponentially tilted measure, a generic interior non-reference q
        tilt = np.exp(rng.normal(0, 0.5, 4)) * m.reference
        q = Measure(tilt / tilt.sum(), m.reference)
        rep = conjugacy_report(m, q, LOG, [0.5, 1.0, 2.0],
                               list(np.geomspace(0.2, 5, 7)))
        assert rep.max_gap <= 1e-4
        assert rep.fenchel_margin >= -1e-8


class TestDeflatorRecovery:
    def test_interior_case_budget_binds(self, market, p_measure):
        sol = max_expected_utility(market, p_measure, LOG, 1.0)
        h = recover_deflator(market, p_measure, LOG, sol, sol.multiplier)
        want = p_measure.density / sol.payoff.wealth
        assert np.allclose(h, want, atol=1e-8)
        # complementary slackness: the pairing with the optimal payoff binds
        pay = float(market.reference @ (h * sol.payoff.wealth))
        assert pay == pytest.approx(1.0 * sol.multiplier, abs=1e-9)

    def test_martingale_cash_case(self, market, mm_measure):
        sol = max_expected_utility(market, mm_measure, LOG, 1.0)
        h = recover_deflator(market, mm_measure, LOG, sol, sol.multiplier)
        assert np.allclose(h, mm_measure.density * 1.0, atol=1e-6)

    def test_dirac_support_completion(self, market):
        dirac = Measure([1.0, 0.0], market.reference)
        sol = max_expected_utility(market, dirac, LOG, 1.0)
        h = recover_deflator(market, dirac, LOG, sol, sol.multiplier)
        assert h[1] == 0.0
        assert h[0] == pytest.approx(2.0 / 3.0, abs=1e-8)
        assert deflator_member(market, h, sol.multiplier)

    def test_wrong_level_fails_membership(self, market, p_measure):
        sol = max_expected_utility(market, p_measure, LOG, 1.0)
        with pytest.raises(MembershipFailed):
            recover_deflator(market, p_measure, LOG, sol,
                             0.5 * sol.multiplier)


class TestSupermartingaleDeflatorRoute:
    """The dual value recomputed by direct minimization over support-restricted
    deflators must agree with the conjugate-transform route."""

    @pytest.mark.parametrize("case", ["reference", "dirac"])
    def test_direct_domain_minimization_agrees(self, market, case):
        q = (reference_measure(market) if case == "reference"
             else Measure([1.0, 0.0], market.reference))
        y = 1.0
        via_transform = dual_value(market, q, LOG, y)

        poly = admissible_strategy_polytope(market, 1.0)
        p = market.reference
        z = q.probabilities / p
        live = q.probabilities > 0

        def objective(h):
            # E[Z V(h/Z)] over the support of q
            acc = 0.0
            for i in np.nonzero(live)[0]:
                acc += p[i] * z[i] * conjugate(LOG, max(h[i] / z[i], 1e-12))
            return acc

        cons = []
        for v in poly.vertices:
            wealth = 1.0 + poly.A @ v

            def budget(h, wealth=wealth):
                return y - float(p @ (h * wealth))

            cons.append({"type": "ineq", "fun": budget})
        h0 = np.where(live, z * y, 0.0)
        bounds = [(1e-9, None) if live[i] else (0.0, 0.0)
                  for i in range(market.n_states)]
        res = minimize(objective, h0, bounds=bounds, constraints=cons,
                       method="SLSQP",
                       options={"maxiter": 500, "ftol": 1e-12})
        assert res.success
        assert res.fun == pytest.approx(via_transform, abs=1e-6)
