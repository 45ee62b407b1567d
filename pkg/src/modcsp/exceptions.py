"""Exceptions for modcsp."""


class ModCspError(Exception):
    """Base exception for all modcsp errors."""


class ConfigurationError(ModCspError):
    """Invalid environment, guard configuration or option value."""


class StructureError(ModCspError):
    """Ill-formed structure or mismatched signatures."""


class InstanceError(ModCspError):
    """Ill-formed CSP instance."""


class FormulaError(ModCspError):
    """Ill-typed or misused formula."""


class ParseError(ModCspError):
    """Malformed JSON input or unknown fields."""

    def __init__(
        self,
        message: str,
        source: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        """Initialize with message and optional input location.

        Args:
            message: Error description
            source: Name of the file or document being parsed
            line: 1-based line of the error, when known
            column: 1-based column of the error, when known
        """
        super().__init__(message)
        self.source = source
        self.line = line
        self.column = column


class GuardExceededError(ModCspError):
    """A configured size guard was exceeded."""

    def __init__(
        self, message: str, limit: int | None = None, size: int | None = None
    ) -> None:
        """Initialize with message, the guard limit and the offending size.

        Args:
            message: Error description
            limit: The limit that was enforced
            size: The size that tripped it
        """
        super().__init__(message)
        self.limit = limit
        self.size = size


class PreconditionError(ModCspError):
    """A mathematical precondition of an algorithm does not hold."""

    def __init__(self, message: str, condition: str | None = None) -> None:
        """Initialize with message and the name of the failing condition.

        Args:
            message: Error description
            condition: Short name of the violated condition
        """
        super().__init__(message)
        self.condition = condition


class NotPRigidError(PreconditionError):
    """Structure has an automorphism of order p."""


class FrameError(PreconditionError):
    """Frame construction met a relation that is not rectangular or not preserved."""


class RefinementError(PreconditionError):
    """Refinement is incompatible with the instance or the domains."""


class OracleMismatchError(ModCspError):
    """A fast algorithm disagreed with the brute-force oracle."""

    def __init__(
        self, message: str, expected: int | None = None, actual: int | None = None
    ) -> None:
        """Initialize with message and the two disagreeing values.

        Args:
            message: Error description
            expected: Value computed by the oracle
            actual: Value computed by the algorithm under test
        """
        super().__init__(message)
        self.expected = expected
        self.actual = actual
