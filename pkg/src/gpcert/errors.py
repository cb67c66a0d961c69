"""Exception hierarchy."""


class GPCertError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(GPCertError):
    """A Cholesky pivot was not positive; the caller may add jitter and retry."""


class NonConvergence(GPCertError):
    """An iterative method hit its iteration cap."""


class Infeasible(GPCertError):
    pass


class Unbounded(GPCertError):
    pass


class DimensionMismatch(GPCertError, ValueError):
    pass


class InvalidInterval(GPCertError, ValueError):
    pass


class UnsupportedLikelihood(GPCertError, ValueError):
    pass


class WrongLikelihood(GPCertError, ValueError):
    pass


class EmptyCandidateSet(GPCertError, ValueError):
    pass


class InfiniteRect(GPCertError, ValueError):
    pass


class SingularConditioning(GPCertError):
    """The determinant enclosure of a conditioning block contains zero."""


class DegenerateRegion(GPCertError, ValueError):
    pass


class ParseError(GPCertError, ValueError):
    def __init__(self, message, row=None, col=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"column {col}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.col = col


class LabelError(GPCertError, ValueError):
    pass


class FormatError(GPCertError, ValueError):
    pass


class EmptyFilter(GPCertError, ValueError):
    pass


class KOutOfRange(GPCertError, ValueError):
    pass
