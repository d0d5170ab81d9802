"""Exception hierarchy.

Each family carries the process exit code the command line uses for it.
"""

from __future__ import annotations


class PseudoChainError(Exception):
    exit_code = 1


class ValidationError(PseudoChainError, ValueError):
    exit_code = 2


class EndBlockNotSingleton(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NonFiniteParameter(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotABlock(ValidationError):
    pass


class CapExceeded(PseudoChainError):
    exit_code = 3


class NumericalError(PseudoChainError, ArithmeticError):
    exit_code = 4


class ConvergenceFailure(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NonPositiveWeights(NumericalError):
    pass


class Breakdown(NumericalError):
    pass


class FitIllConditioned(NumericalError):
    pass


class NoSignal(PseudoChainError):
    """Probe differences sit below the noise floor: no oversized block seen."""


class NoConsistentSolution(NumericalError):
    pass


class EmptySelection(PseudoChainError):
    pass


class AmbiguousStructure(PseudoChainError):
    pass
