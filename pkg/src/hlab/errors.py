"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for all errors raised by this package."""


class FormulaSyntaxError(LabError):
    """Raised by the parser; carries the offset of the offending token."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SignatureMismatchError(LabError):
    """Unknown symbol, arity mismatch, or duplicate symbol name."""


class FreeVariableError(LabError):
    """Declared object/parameter variables do not match the formula's free variables."""


class EvaluationError(LabError):
    """Missing variable binding or malformed assignment during evaluation."""


class EmptyFamilyError(LabError):
    """A family spec whose size filter produces no structures."""


class NotOneDimensionalError(LabError):
    """Counting envelope cannot be satisfied at the configured ceiling.

    Carries the worst offending observations for diagnosis.
    """

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class ClassificationGapError(LabError):
    """A solution count fell strictly between the algebraic bound and the
    measure envelope; surfaces a defect in the profile."""


class EnumerationBudgetError(LabError):
    """Full enumeration of a parameter space would exceed the configured budget."""


class ConfigRejectedError(LabError):
    """Greedy configuration violates a precondition (measure floor too high,
    or an avoid formula is not uniformly algebraic on the family)."""


class ThresholdNotMetError(LabError):
    """Strict build requested on a structure below the size threshold."""


class StructureTooSmallError(LabError):
    """The greedy ran out of eligible elements (or the universe is degenerate)."""


class ExperimentConfigError(LabError):
    """Invalid or incomplete experiment configuration file."""
