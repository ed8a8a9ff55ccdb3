"""Exception hierarchy for the interpreter."""


class FormletError(Exception):
    """Base class for every error raised by formlet."""

    def __init__(self, message, origin=None):
        self.origin = origin
        if origin:
            message = f"{origin}: {message}"
        super().__init__(message)


class DenominatorVanishesAtZero(FormletError):
    pass


class IndexArityViolation(FormletError):
    pass


class UnboundWildcard(FormletError):
    pass


class PreprocessorError(FormletError):
    pass


class UnknownPreprocessorVariable(PreprocessorError):
    pass


class UnknownProcedure(PreprocessorError):
    pass


class UnterminatedProcedure(PreprocessorError):
    pass


class RecursionDepthExceeded(PreprocessorError):
    pass


class FormSyntaxError(FormletError):
    pass


class UnknownName(FormletError):
    pass


class RepeatDivergence(FormletError):
    def __init__(self, cap, origin=None):
        self.cap = cap
        super().__init__(f"repeat block did not converge within {cap} passes", origin)


class GoldenParseError(FormletError):
    pass
