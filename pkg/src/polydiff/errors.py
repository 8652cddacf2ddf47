"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can print it
and map it to an exit status.
"""


class PolydiffError(Exception):
    code = "ERROR"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


class DimensionMismatch(PolydiffError, ValueError):
    code = "DIMENSION_MISMATCH"


class ParseError(PolydiffError, ValueError):
    code = "PARSE_ERROR"


class NotAdmissible(PolydiffError):
    code = "NOT_ADMISSIBLE"


class DegreeViolation(PolydiffError):
    code = "DEGREE_VIOLATION"


class EmptySolution(PolydiffError):
    code = "EMPTY"


class UnknownName(PolydiffError, KeyError):
    code = "UNKNOWN_NAME"

    def __str__(self):
        return Exception.__str__(self)


class ParamOutOfRange(PolydiffError, ValueError):
    code = "PARAM_OUT_OF_RANGE"


class NonExactDivision(PolydiffError):
    code = "NON_EXACT_DIVISION"


class DegenerateAtPoint(PolydiffError):
    code = "DEGENERATE_AT_POINT"


class FiltrationViolation(PolydiffError):
    code = "FILTRATION_VIOLATION"


class ComplexEigenvalue(PolydiffError):
    code = "COMPLEX_EIGENVALUE"


class SingularGram(PolydiffError):
    code = "SINGULAR_GRAM"


class UnsupportedFamily(PolydiffError):
    code = "UNSUPPORTED_FAMILY"


class NonIntegrable(PolydiffError):
    code = "NON_INTEGRABLE"


class DegenerateRegion(PolydiffError):
    code = "DEGENERATE_REGION"


class UnboundedDetected(PolydiffError):
    code = "UNBOUNDED_DETECTED"


class NanState(PolydiffError):
    code = "NAN_STATE"


class PathEscaped(PolydiffError):
    code = "PATH_ESCAPED"


class ClosureFailure(PolydiffError):
    code = "CLOSURE_FAILURE"
