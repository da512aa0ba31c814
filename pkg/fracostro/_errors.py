"""Exception hierarchy shared by the library, the CLI and the HTTP surface.

Every error carries an ``exit_code`` for the command-line contract and a short
``kind`` used in single-line JSON diagnostics.
"""


class FracError(Exception):
    """Base exception for fractional-mechanics errors."""

    exit_code = 1
    kind = "error"

    def json(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class DomainError(FracError, ValueError):
    """Argument outside the domain of an operation."""

    exit_code = 2
    kind = "domain"


class OffLadderError(DomainError):
    """Exponent that does not sit on the alpha ladder."""

    kind = "off_ladder"


class DslError(FracError):
    """Base exception for Lagrangian DSL errors."""

    exit_code = 2
    kind = "dsl"


class ParseError(DslError):
    """Syntax error in DSL text."""

    kind = "syntax"

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(DslError):
    kind = "unknown_identifier"


class IndexOutOfRangeError(DslError):
    kind = "index_out_of_range"


class UnboundVariableError(DslError):
    kind = "unbound_variable"


class EvaluationError(DslError):
    kind = "evaluation"


class DerivationError(FracError):
    """Base exception for symbolic derivation failures."""

    exit_code = 3
    kind = "derivation"


class SingularLegendreError(DerivationError):
    """Lagrangian is not invertible in its highest coordinate."""

    kind = "singular_legendre"


class NonQuadraticError(DerivationError):
    kind = "non_quadratic"


class UnsupportedError(DerivationError):
    kind = "unsupported"


class BoundaryError(FracError):
    """Inconsistent boundary data."""

    exit_code = 2
    kind = "boundary"


class SingularSystemError(FracError):
    """Singular, resonant or numerically unreliable linear system."""

    exit_code = 4
    kind = "singular"


class SystemTooLargeError(FracError):
    exit_code = 4
    kind = "too_large"


class NotPositiveDefiniteError(FracError):
    exit_code = 4
    kind = "not_positive_definite"


class ConfigError(FracError):
    """Invalid or unreadable run configuration."""

    exit_code = 2
    kind = "config"
