"""Exception types shared across the library."""


class DomainViolation(ValueError):
    """A point lies outside the search domain (or is not a pool candidate)."""


class ParameterError(ValueError):
    """Invalid construction parameters."""


class GpFitError(RuntimeError):
    """Gram matrix could not be factorized even after jitter escalation."""


class SamplingError(RuntimeError):
    """Joint posterior covariance not positive definite after jitter."""


class FlatSurfaceError(RuntimeError):
    """Acquisition surface indistinguishable from its floor; rejection
    sampling cannot make progress.  Callers fall back to uniform sampling."""


class StrategyFailure(RuntimeError):
    """A batch strategy failed for this epoch (e.g. an intermediate GP
    refit diverged).  The repeat is recorded as failed, never dropped."""


class PoolExhausted(RuntimeError):
    """Fewer unevaluated candidates remain than the batch requires."""


class SolverDivergence(RuntimeError):
    """Iterative solver objective grew past its divergence guard."""


class MetricUnavailable(ValueError):
    """A metric was requested that the experiment cannot provide
    (e.g. first-encounter time without a known optimum)."""
