"""Typed failure modes shared across the toolkit."""


class RecircError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(RecircError):
    """A configuration or input value violates its declared invariants."""


class SingularityError(RecircError):
    """Recirculation balance evaluated too close to its pole at s = s_H."""


class NonFiniteStateError(RecircError):
    """An integration step produced NaN or infinite state components."""


class EstimatorFault(RecircError):
    """The filter lost numerical health (factorization or innovation failure)."""


class ComputationFault(RecircError):
    """A numerical analysis routine produced non-finite intermediate values."""


class RunFault(RecircError):
    """A closed-loop run aborted due to a plant or estimator fault."""
