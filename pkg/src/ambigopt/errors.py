"""Exception hierarchy for the package.

Every error raised by library code derives from :class:`AmbigoptError` so the
CLI can map failures to exit codes without string matching.
"""

from __future__ import annotations


class AmbigoptError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(AmbigoptError):
    """Input arrays have inconsistent shapes."""


class SchemaError(AmbigoptError):
    """An instance file failed validation.

    Carries the dotted path of the offending field so the CLI can name it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


# --- utility -----------------------------------------------------------------

class NegativeWealth(AmbigoptError):
    """Utility evaluated at negative wealth."""


class NonpositiveDual(AmbigoptError):
    """Dual-side quantity evaluated at a non-positive argument."""


class NotApplicable(AmbigoptError):
    """Asymptotic elasticity undefined (utility eventually non-positive)."""


# --- ambiguity ---------------------------------------------------------------

class MeasureInvariantViolated(AmbigoptError):
    """Probability vector fails non-negativity or normalization."""


class GridOutOfRange(AmbigoptError):
    """Evaluation point outside a tabulated grid."""


class DomainError(AmbigoptError):
    """Argument outside the domain of a certainty-equivalent transform."""


class UnsupportedVariant(AmbigoptError):
    """Operation not defined for this ambiguity variant."""


# --- market ------------------------------------------------------------------

class Inadmissible(AmbigoptError):
    """Strategy produces strictly negative wealth in some state."""


class ArbitrageDetected(AmbigoptError):
    """A strategy with non-negative, non-zero gains exists."""


class NoArbitrageViolated(AmbigoptError):
    """Solver precondition failed: market admits no strictly positive
    martingale measure."""


class NegativeDeflator(AmbigoptError):
    """Deflator candidate has a negative component."""


# --- solvers -----------------------------------------------------------------

class Unbounded(AmbigoptError):
    """Objective exceeded the overflow guard; finiteness assumption violated."""


class Infinite(AmbigoptError):
    """Conjugate transform diverged; dual value is +inf."""


class MembershipFailed(AmbigoptError):
    """Recovered deflator failed the membership test."""


class AllInfinite(AmbigoptError):
    """The ambiguity index is +inf over the whole search family."""


class AssumptionViolated(AmbigoptError):
    """Finiteness pre-check failed; the robust problem is ill-posed."""


class PreconditionViolated(AmbigoptError):
    """Minimax interchange preconditions not met; run refused."""


class SaddleInequalityViolated(AmbigoptError):
    """A sampled saddle inequality failed beyond tolerance.

    Signals inner-solver failure rather than a counterexample; carries the
    violating sample as ``witness``.
    """

    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class MonotonicityViolated(AmbigoptError):
    """Value function decreased along an increasing budget grid."""


class ScaleRefused(AmbigoptError):
    """Brute-force reference refused: instance beyond desk scale."""
