"""Exceptions raised by the kregcore model.

Provides the following classes:
    * KregError: base class for every error the package raises on purpose.
    * ContractError: a precondition of an operation was violated.
    * DataError: reading or writing a data file failed.
    * UndefinedAtQuery: kernel regression has no value at a query point.
    * EmptyAdmissibleSet: every evaluation point was excluded from an error
    measurement.
"""


class KregError(Exception):
    """Base class for kregcore errors."""


class ContractError(KregError, ValueError):
    """An argument violates the precondition of the operation."""


class DataError(KregError):
    """A data file could not be read, parsed or written."""


class UndefinedAtQuery(KregError):
    """The kernel density at a query is zero, so reg(q) = wkde/kde is
    undefined.

    :param q: the query location (a tuple of floats).
    """

    def __init__(self, q):
        self.q = tuple(float(c) for c in q)
        super().__init__('regression undefined at q=%s (kde is zero)'
                         % (self.q,))


class EmptyAdmissibleSet(KregError):
    """No evaluation point passed the kde threshold and definedness tests."""
