import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambigopt import (
    asymptotic_elasticity,
    conjugate,
    eval_utility,
    inverse_marginal,
    log_utility,
    marginal,
    power_utility,
    table_utility,
)
from ambigopt.errors import (
    GridOutOfRange,
    NegativeWealth,
    NonpositiveDual,
    NotApplicable,
)

LOG = log_utility()
SQRT = power_utility(0.5)
CRRA2 = power_utility(-1.0)


def test_eval_examples():
    assert eval_utility(LOG, 1.0) == 0.0
    assert eval_utility(SQRT, 4.0) == 4.0  # x^p / p = 2 / 0.5
    assert eval_utility(LOG, 0.0) == -math.inf


def test_zero_wealth_conventions():
    assert eval_utility(SQRT, 0.0) == 0.0
    assert eval_utility(CRRA2, 0.0) == -math.inf


def test_negative_wealth_rejected():
    with pytest.raises(NegativeWealth):
        eval_utility(LOG, -0.1)
    with pytest.raises(NegativeWealth):
        marginal(SQRT, -1.0)


def test_marginal_closed_forms():
    assert marginal(LOG, 2.0) == 0.5
    # power marginal is x^(p-1); at p=0.5, x=4 that is 0.5
    assert marginal(SQRT, 4.0) == pytest.approx(0.5, rel=1e-15)
    # Inada at zero: marginal blows past any bound on a vanishing grid
    for x in np.geomspace(1e-6, 1e-4, 5):
        assert marginal(LOG, x) >= 1e4


def test_inverse_marginal_closed_forms():
    assert inverse_marginal(LOG, 0.5) == 2.0
    assert inverse_marginal(SQRT, 0.5) == pytest.approx(4.0, rel=1e-15)
    with pytest.raises(NonpositiveDual):
        inverse_marginal(LOG, 0.0)


@pytest.mark.parametrize("spec", [LOG, SQRT, CRRA2])
def test_marginal_inverse_round_trip(spec):
    for y in np.geomspace(1e-3, 1e3, 25):
        assert marginal(spec, inverse_marginal(spec, y)) == pytest.approx(
            y, rel=1e-10)


def test_conjugate_examples():
    assert conjugate(LOG, 1.0) == -1.0
    assert conjugate(SQRT, 1.0) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(NonpositiveDual):
        conjugate(SQRT, -2.0)


@pytest.mark.parametrize("spec", [LOG, SQRT, CRRA2])
def test_fenchel_young(spec):
    ys = np.geomspace(0.05, 20, 15)
    xs = np.geomspace(0.05, 20, 15)
    for y in ys:
        v = conjugate(spec, y)
        for x in xs:
            assert eval_utility(spec, x) <= v + x * y + 1e-12 * max(1, abs(v))
        x_star = inverse_marginal(spec, y)
        gap = v + x_star * y - eval_utility(spec, x_star)
        assert abs(gap) <= 1e-8


@given(y=st.floats(min_value=1e-3, max_value=1e3),
       x=st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=300, deadline=None)
def test_fenchel_young_hypothesis(y, x):
    for spec in (LOG, SQRT):
        assert eval_utility(spec, x) <= conjugate(spec, y) + x * y + 1e-10


@pytest.mark.parametrize("spec", [LOG, SQRT, CRRA2])
def test_marginal_strictly_decreasing(spec):
    xs = np.geomspace(0.01, 100, 40)
    marg = [marginal(spec, x) for x in xs]
    assert all(a > b for a, b in zip(marg, marg[1:]))


@pytest.mark.parametrize("spec", [LOG, SQRT, CRRA2])
def test_conjugate_convex_decreasing(spec):
    ys = np.geomspace(0.05, 50, 30)
    vals = [conjugate(spec, y) for y in ys]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    for i in range(1, len(ys) - 1):
        lam = (ys[i] - ys[i - 1]) / (ys[i + 1] - ys[i - 1])
        chord = (1 - lam) * vals[i - 1] + lam * vals[i + 1]
        assert vals[i] <= chord + 1e-10


def test_asymptotic_elasticity_closed_forms():
    assert asymptotic_elasticity(SQRT) == 0.5
    assert asymptotic_elasticity(LOG) == 0.0
    with pytest.raises(NotApplicable):
        asymptotic_elasticity(CRRA2)


def test_asymptotic_elasticity_tabulated_power():
    # sampled power utility on a fine geometric grid recovers the exponent
    p = 0.3
    xs = np.geomspace(1.0, 1e3, 7000)
    points = [(x, x ** p / p) for x in xs]
    spec = table_utility(points)
    assert asymptotic_elasticity(spec) == pytest.approx(0.3, abs=1e-3)


def test_strict_monotonicity_and_concavity_sampled():
    rng = np.random.default_rng(0)
    for spec in (LOG, SQRT, CRRA2):
        xs = np.sort(rng.uniform(0.05, 10, 30))
        us = [eval_utility(spec, x) for x in xs]
        assert all(a < b for a, b in zip(us, us[1:]))
        for _ in range(100):
            x1, x2 = rng.uniform(0.05, 10, 2)
            if abs(x1 - x2) < 1e-6:
                continue
            lam = rng.uniform(0.1, 0.9)
            mid = eval_utility(spec, lam * x1 + (1 - lam) * x2)
            chord = lam * eval_utility(spec, x1) + (1 - lam) * eval_utility(spec, x2)
            assert mid > chord


class TestTabulated:
    POINTS = [(0.5, -0.6931), (1.0, 0.0), (2.0, 0.6931), (4.0, 1.3863),
              (8.0, 2.0794)]

    def test_interpolation_inside(self):
        spec = table_utility(self.POINTS)
        assert eval_utility(spec, 1.0) == 0.0
        assert eval_utility(spec, 1.5) == pytest.approx(0.6931 / 2, abs=1e-12)

    def test_outside_grid_rejected(self):
        spec = table_utility(self.POINTS)
        with pytest.raises(GridOutOfRange):
            eval_utility(spec, 100.0)
        with pytest.raises(GridOutOfRange):
            marginal(spec, 0.1)

    def test_left_difference_marginal(self):
        spec = table_utility(self.POINTS)
        # at a knot the slope of the segment ending there is used
        expected = (0.6931 - 0.0) / (2.0 - 1.0)
        assert marginal(spec, 2.0) == pytest.approx(expected, rel=1e-12)

    def test_marginal_non_increasing_and_inverse(self):
        spec = table_utility(self.POINTS)
        xs = np.linspace(0.6, 7.5, 50)
        marg = [marginal(spec, x) for x in xs]
        assert all(a >= b for a, b in zip(marg, marg[1:]))
        y = marginal(spec, 3.0)
        x = inverse_marginal(spec, y)
        assert marginal(spec, x) == pytest.approx(y, rel=1e-9)

    def test_non_concave_table_rejected(self):
        with pytest.raises(ValueError):
            table_utility([(1.0, 0.0), (2.0, 1.0), (3.0, 2.5)])

    def test_non_monotone_table_rejected(self):
        with pytest.raises(ValueError):
            table_utility([(1.0, 0.0), (2.0, -0.5), (3.0, 0.5)])
