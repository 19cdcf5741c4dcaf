"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation 2, resource 3, unresolved-xi 4.
"""


class MurmurError(Exception):
    """Base class for all package errors."""


class DomainError(MurmurError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceError(MurmurError):
    """A table or argument exceeds the configured memory/size budget."""


class TableLimitError(ResourceError):
    """A precomputed table does not cover a requested argument."""

    def __init__(self, kind, needed, limit):
        super().__init__(f"{kind} table limit {limit} does not cover {needed}")
        self.kind = kind
        self.needed = needed
        self.limit = limit


class UnresolvedXiBranch(MurmurError):
    """xi_Delta was asked for a prime q with q^2 | Delta under the strict policy."""

    def __init__(self, delta, q):
        super().__init__(f"xi branch unresolved for Delta={delta} at q={q} (q^2 | Delta)")
        self.delta = delta
        self.q = q


class UnresolvedXiError(MurmurError):
    """One or more trace-formula terms hit the unresolved xi branch.

    ``terms`` lists the affected ``(N, p, s, Delta)`` tuples in the order found.
    """

    def __init__(self, terms):
        self.terms = list(terms)
        head = ", ".join(str(t) for t in self.terms[:5])
        more = "" if len(self.terms) <= 5 else f" (+{len(self.terms) - 5} more)"
        super().__init__(f"{len(self.terms)} unresolved xi term(s): {head}{more}")

    @property
    def count(self):
        return len(self.terms)


class ConsistencyError(MurmurError, AssertionError):
    """An exact computation produced a value that must be integral but is not."""


class ValidationError(MurmurError, ValueError):
    """Input data failed a structural or consistency check."""

    def __init__(self, message, line=None, record=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.record = record


class ParseError(ValidationError):
    """Malformed input row or file."""


class CacheError(MurmurError):
    """Base for binary table cache failures."""


class CacheFormatError(CacheError):
    """Wrong magic bytes, version or kind."""


class CacheTruncatedError(CacheError):
    """Payload shorter than the header declares."""


class CacheChecksumError(CacheError):
    """Trailing checksum does not match the payload."""
