"""Exception and warning types shared across modules."""


class NumericalError(RuntimeError):
    """A computation could not produce a trustworthy number."""


class UnderflowError(NumericalError):
    """State norm or density trace collapsed below the representable floor."""


class DegenerateSteadyStateError(NumericalError):
    """The dominant eigenvalue is not separated from its competitors."""


class ConvergenceError(NumericalError):
    """An iterative or step-halving procedure failed to converge."""


class TrackingError(NumericalError):
    """Eigenvector continuation between neighbouring parameters is ambiguous."""


class ResolutionError(NumericalError):
    """A grid is too coarse for the quantity it is asked to resolve."""


class ConditioningWarning(UserWarning):
    """A result was obtained but some input terms were numerically unreliable."""


class SupportMismatchWarning(UserWarning):
    """Observed counts fall on outcomes the model deems (nearly) impossible."""
