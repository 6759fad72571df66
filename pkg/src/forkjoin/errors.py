"""Exception hierarchy shared across the package."""


class ForkJoinError(Exception):
    """Base class for domain errors raised by this package."""

    code = "domain_error"


class InvalidParams(ForkJoinError, ValueError):
    code = "invalid_params"


class UnstableBranch(InvalidParams):
    code = "unstable_branch"


class NonPositiveRate(InvalidParams):
    code = "non_positive_rate"


class ZeroChannels(InvalidParams):
    code = "zero_channels"


class TooFewEvents(ForkJoinError, ValueError):
    code = "too_few_events"


class EmptyObservation(ForkJoinError, ValueError):
    code = "empty_observation"


class ZeroVariance(ForkJoinError, ValueError):
    code = "zero_variance"


class NoConvergence(ForkJoinError, RuntimeError):
    code = "no_convergence"


class TruncationTooSmall(ForkJoinError, RuntimeError):
    code = "truncation_too_small"


class DegenerateDenominator(ForkJoinError, ZeroDivisionError):
    code = "degenerate_denominator"
