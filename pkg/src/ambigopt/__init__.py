"""Solvers and verifiers for risk- and ambiguity-averse utility maximization
on finite-state one-period markets.

The public surface mirrors the problem structure: utility specs (risk
preferences), ambiguity specs (the index behind the robust representation),
finite markets, fixed-measure solvers, robust solvers with duality and
saddle extraction, brute-force references, and a batch CLI.
"""

from .ambiguity import (
    AxiomReport,
    CustomGrid,
    EntropicPenalty,
    Measure,
    MeasureFamily,
    MultiplePriors,
    SmoothCriterion,
    TabulatedPenalty,
    Variational,
    ambiguity_index,
    check_index_axioms,
    default_family,
    index_left_inverse,
    level_set_member,
    penalty_value,
    robust_value,
    smooth_value,
)
from .fixed_measure import (
    ConjugacyReport,
    FixedMeasureSolution,
    conjugacy_report,
    dual_value,
    max_expected_utility,
    recover_deflator,
)
from .instance import Instance, RunBlock, load_instance
from .market import (
    FiniteMarket,
    Payoff,
    Strategy,
    StrategyPolytope,
    admissible_strategy_polytope,
    check_no_arbitrage,
    deflator_member,
    strategy_payoff,
)
from .oracle import (
    BipolarReport,
    OracleConfig,
    OracleValue,
    oracle_bipolar,
    oracle_u,
    oracle_v,
)
from .robust import (
    DualMinimum,
    SolveReport,
    SweepResult,
    SweepRow,
    extract_saddle,
    minimax_check,
    robust_dual_minimize,
    robust_dual_value,
    robust_primal_solve,
    value_sweep,
    worst_case_measure,
)
from .utility import (
    UtilitySpec,
    asymptotic_elasticity,
    conjugate,
    eval_utility,
    inverse_marginal,
    log_utility,
    marginal,
    power_utility,
    table_utility,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
