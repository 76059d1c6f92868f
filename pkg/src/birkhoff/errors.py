"""Exception types shared across the toolkit."""


class BirkhoffError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(BirkhoffError):
    """Operands live on phase spaces with different degree-of-freedom counts."""


class ShapeError(BirkhoffError):
    """Input polynomial violates a homogeneity / shape precondition."""


class DomainError(BirkhoffError):
    """Scalar argument outside its admissible range."""


class NotEllipticError(BirkhoffError):
    """Quadratic part has an eigenvalue with nonzero real part."""


class DegenerateFrequencyError(BirkhoffError):
    """Quadratic part has repeated frequency magnitudes."""


class SmallDivisorError(BirkhoffError):
    """A divisor k.omega fell below the resonance guard threshold.

    Attributes
    ----------
    k : tuple of int
        The offending integer vector a - b.
    value : float
        The magnitude |k.omega| that triggered the error.
    degree : int or None
        Homogeneous degree at which the divisor appeared.
    """

    def __init__(self, k, value, degree=None):
        self.k = tuple(int(v) for v in k)
        self.value = float(value)
        self.degree = degree
        where = f" at degree {degree}" if degree is not None else ""
        super().__init__(
            f"small divisor |k.omega| = {value:.3e} for k = {self.k}{where}"
        )


class StepFailureError(BirkhoffError):
    """Implicit integration step failed to converge.

    Attributes
    ----------
    time : float
        Model time at which the step failed.
    """

    def __init__(self, time):
        self.time = float(time)
        super().__init__(f"implicit step failed to converge at t = {time:.6g}")


class ConfigError(BirkhoffError):
    """Experiment configuration is invalid; message carries the field path."""
