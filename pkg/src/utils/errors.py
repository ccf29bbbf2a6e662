"""Exception hierarchy shared by the series engine, the geometry layer and the CLI.

Every exception carries an ``exit_code`` so the command line driver can map a
failure to its documented exit status without a lookup table.
"""


class CRFlatError(Exception):
    """Root of all errors raised by crflat."""

    exit_code = 2


# --- series engine ---------------------------------------------------------


class SeriesError(CRFlatError):
    pass


class NonUnitConstantTerm(SeriesError):
    """Division by a series whose constant term is (numerically) zero."""


class NonPositiveConstantTerm(SeriesError):
    pass


class NotReal(SeriesError):
    pass


class OrderExhausted(SeriesError):
    """A derivative was requested from a series of order 0."""


class NonConjugatePoint(SeriesError):
    pass


class OrderMismatch(SeriesError):
    pass


class IncompatibleShape(SeriesError):
    """An operand does not have the variable support an operation requires."""


# --- geometry --------------------------------------------------------------


class GeometryError(CRFlatError):
    pass


class InvalidGerm(GeometryError):
    """F(0) != 0, F is not real, or F_{1 1bar}(0) is not positive."""


class TwoDegenerate(GeometryError):
    pass


class IndeterminateTerm(GeometryError):
    """S_1 is neither identically zero nor invertible."""


class RhoNotInDisk(GeometryError):
    pass


class RhoCritical(GeometryError):
    pass


class InvariantViolation(GeometryError):
    pass


class ZeroScale(GeometryError):
    pass


class NotInModelForm(GeometryError):
    pass


# --- numeric cross-checks --------------------------------------------------


class QuadratureError(CRFlatError):
    pass


class QuadratureDegenerate(QuadratureError):
    pass


class ResolutionTooLow(QuadratureError):
    pass


class RadiusTooLarge(QuadratureError):
    pass


# --- files -----------------------------------------------------------------


class FormatError(CRFlatError):
    """A JSON file does not follow the expected crflat format."""

    exit_code = 3
