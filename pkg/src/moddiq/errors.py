"""Exception hierarchy shared by every moddiq module."""


class ModdiqError(Exception):
    """Base class for all library errors."""


class DomainMismatch(ModdiqError, ValueError):
    pass


class ExponentOverflow(ModdiqError, OverflowError):
    pass


class NotWeakPermissible(ModdiqError, ValueError):
    """A prime divides the denominator of some coefficient."""

    def __init__(self, p, poly=None):
        self.p = p
        self.poly = poly
        super().__init__(f"prime {p} divides a denominator of {poly}")


class NotPermissible(ModdiqError, ValueError):
    """A prime is unusable for a candidate (denominator or leading coefficient vanishes)."""

    def __init__(self, p, reason=""):
        self.p = p
        super().__init__(f"prime {p} is not permissible: {reason}")


class UnitIdeal(ModdiqError, ValueError):
    """Raised where a proper ideal is required but 1 is in the ideal."""


class InvalidMIS(ModdiqError, ValueError):
    pass


class HypothesisViolated(ModdiqError, ValueError):
    pass


class RadicalUnavailable(ModdiqError, RuntimeError):
    pass


class PrimeExhaustion(ModdiqError, RuntimeError):
    pass


class ModularFailure(ModdiqError, RuntimeError):
    """The modular loop ran out of rounds without a certified answer.

    ``diagnostics`` is a dict describing the last round (stage, primes, reason).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DeadlineExceeded(ModdiqError, TimeoutError):
    pass


class ParseError(ModdiqError, ValueError):
    """Syntax or semantic error in an ideal file, annotated with line/column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
