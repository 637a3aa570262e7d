"""Exception hierarchy shared across the package."""


class SecondVarError(Exception):
    """Base class for all errors raised by this package."""


class ExprSyntaxError(SecondVarError):
    """Source text does not conform to the expression grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(SecondVarError):
    """An identifier is neither a variable, a constant, nor a declared parameter."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}' at offset {position}")
        self.name = name
        self.position = position


class ExprDomainError(SecondVarError):
    """Evaluation left the real domain (log/sqrt of a negative, division by zero)."""

    def __init__(self, message: str, subterm: str):
        super().__init__(f"{message} in '{subterm}'")
        self.subterm = subterm


class SingularCoefficientError(SecondVarError):
    """A coefficient evaluated to a non-finite value."""


class IntegrationFailure(SecondVarError):
    """The accessory-equation integrator could not reach the right endpoint."""

    def __init__(self, message: str, x: float):
        super().__init__(f"{message} (reached x = {x:.6g})")
        self.x = x


class DegenerateBasisError(SecondVarError):
    """Solution basis cannot satisfy the left-endpoint slope conditions."""


class InfeasibleLengthError(SecondVarError):
    """Prescribed arc length does not exceed the chord length."""


class ProblemFileError(SecondVarError):
    """Problem file is missing sections/keys or contains unparsable values."""
