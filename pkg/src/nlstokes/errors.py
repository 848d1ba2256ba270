"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 science/assertion, 2 validation, 3 data, 4 internal numerical failure.
"""


class NLStokesError(Exception):
    exit_code = 4


class ValidationError(NLStokesError, ValueError):
    exit_code = 2


class DataError(NLStokesError, ValueError):
    exit_code = 3


class InternalError(NLStokesError, RuntimeError):
    exit_code = 4


class DivergentMoment(ValidationError):
    """A radial moment of a kernel profile is infinite."""


class NormalizationError(ValidationError):
    """A kernel set violates its moment normalization."""


class ConfigError(ValidationError):
    pass


class MissingMollifier(ValidationError):
    pass


class ShapeMismatch(DataError):
    pass


class MeanNotZero(DataError):
    """The zero Fourier mode of an input field does not vanish."""


class HermitianViolation(DataError):
    pass


class AliasingRisk(DataError):
    pass


class NonRealResult(DataError):
    pass


class ZeroFrequency(DataError):
    pass


class DegenerateFit(DataError):
    pass


class QuadratureFailure(InternalError):
    """Adaptive quadrature ran out of panels before reaching tolerance."""


class SingularMode(InternalError):
    """lambda <= 0 or q <= 0 at some mode; indicates a kernel or quadrature bug."""
