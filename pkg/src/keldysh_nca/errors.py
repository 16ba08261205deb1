"""Exception types shared by all modules."""


class KeldyshNcaError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatch(KeldyshNcaError):
    """Operands live on different or non-dual grids."""


class DomainMismatch(KeldyshNcaError):
    """Operation received a signal in the wrong domain (time vs frequency)."""


class OutOfRange(KeldyshNcaError):
    """Evaluation point too close to, or beyond, the grid boundary."""


class BoseZeroFrequency(KeldyshNcaError):
    """Bose occupation requested at (numerically) zero frequency."""


class SingularPropagator(KeldyshNcaError):
    """An undamped pole of a propagator landed on a grid node."""


class NonHermitianPair(KeldyshNcaError):
    """Retarded/advanced pair is not conjugate; spectral function not real."""


class NotConverged(KeldyshNcaError):
    """Fixed-point iteration exhausted max_iter.

    Carries the solve trace and the last iterate for post-mortem use.
    """

    def __init__(self, message, trace=None, greens_function=None):
        super().__init__(message)
        self.trace = trace
        self.greens_function = greens_function


class ParseError(KeldyshNcaError):
    """Malformed configuration file line."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ValidationError(KeldyshNcaError):
    """Configuration value rejected."""

    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason
