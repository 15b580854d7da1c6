"""Shared fixtures: seeded random arbitrage-free markets and the instance
suites used across the tests."""

from __future__ import annotations

import numpy as np
import pytest

from ambigopt import (
    EntropicPenalty,
    FiniteMarket,
    Measure,
    MeasureFamily,
    MultiplePriors,
    TabulatedPenalty,
    Variational,
)


def random_no_arbitrage_market(rng: np.random.Generator, n: int,
                               d: int) -> FiniteMarket:
    """Market built around a hidden interior martingale measure, so absence
    of arbitrage holds by construction."""
    q_star = rng.dirichlet(np.ones(n)) * 0.8 + 0.2 / n
    st = rng.uniform(0.2, 2.0, (n, d))
    s0 = st.T @ q_star
    p = rng.dirichlet(np.ones(n)) * 0.8 + 0.2 / n
    return FiniteMarket(s0, st, p / p.sum())


def interior_measure(rng: np.random.Generator, reference) -> Measure:
    n = len(reference)
    q = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
    return Measure(q / q.sum(), reference)


def reference_measure(market: FiniteMarket) -> Measure:
    return Measure(market.reference, market.reference)


def singleton_family(market: FiniteMarket) -> MeasureFamily:
    return MeasureFamily.from_generators([reference_measure(market)])


@pytest.fixture(scope="session")
def two_state_market() -> FiniteMarket:
    return FiniteMarket([1.0], [[2.0], [0.5]], [0.5, 0.5])


@pytest.fixture(scope="session")
def classical_log_value() -> float:
    # optimal log investment in the two-state market: holdings 0.5,
    # wealth (1.5, 0.75)
    return 0.5 * float(np.log(1.5) + np.log(0.75))


@pytest.fixture(scope="session")
def random_suite():
    """The 50 seeded random desk-scale instances (markets only)."""
    out = []
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 5))
        d = int(rng.integers(1, 3))
        out.append((seed, random_no_arbitrage_market(rng, n, d)))
    return out


def dichotomy_instances():
    """Instances satisfying the minimax preconditions: non-negative power
    utility for indicator indices, log or power for additive penalties."""
    from ambigopt import log_utility, power_utility

    cases = []
    m2 = FiniteMarket([1.0], [[2.0], [0.5]], [0.5, 0.5])
    full2 = MeasureFamily.full_simplex(m2.reference)
    cases.append(("entropic_log_2state",
                  m2, Variational(penalty=EntropicPenalty(theta=1.0)),
                  full2, log_utility()))
    cases.append(("entropic_power_2state",
                  m2, Variational(penalty=EntropicPenalty(theta=0.5)),
                  full2, power_utility(0.5)))
    cases.append(("mp_full_power_2state", m2,
                  MultiplePriors(family=full2), full2, power_utility(0.5)))

    rng = np.random.default_rng(2024)
    m3 = random_no_arbitrage_market(rng, 3, 2)
    g1 = interior_measure(rng, m3.reference)
    g2 = interior_measure(rng, m3.reference)
    hull = MeasureFamily.from_generators([g1, g2])
    cases.append(("mp_hull_power_3state", m3,
                  MultiplePriors(family=hull), hull, power_utility(0.5)))
    tab = Variational(penalty=TabulatedPenalty(
        measures=(g1, g2), gammas=(0.0, 0.3)))
    cases.append(("table_var_power_3state", m3, tab,
                  MeasureFamily.from_generators([g1, g2]), power_utility(0.5)))

    rng4 = np.random.default_rng(77)
    m4 = random_no_arbitrage_market(rng4, 4, 2)
    full4 = MeasureFamily.full_simplex(m4.reference)
    cases.append(("entropic_log_4state", m4,
                  Variational(penalty=EntropicPenalty(theta=2.0)),
                  full4, log_utility()))
    return cases


@pytest.fixture(scope="session")
def dichotomy_suite():
    return dichotomy_instances()
