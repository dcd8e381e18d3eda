"""Exception hierarchy shared by every module of the package."""


class GaBPError(Exception):
    """Base class for all errors raised by gabprate."""


class SingularMatrix(GaBPError):
    pass


class NonPositiveDiagonal(GaBPError):
    pass


class ZeroDiagonal(GaBPError):
    pass


class NotWeaklyDominant(GaBPError):
    pass


class NotGeneralizedDD(GaBPError):
    pass


class NonPositiveLambda(GaBPError):
    """An edge weight of the bound recursion came out non-positive.

    Unreachable when the dominance precondition holds; raised as an
    internal consistency check.
    """


class DegenerateFit(GaBPError):
    """The error trajectory hit exact zero inside the fit window."""


class TreeTooLarge(GaBPError):
    pass


class GenerationFailed(GaBPError):
    pass


class ParseError(GaBPError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingDiagonal(ParseError):
    pass


class NonSquare(ParseError):
    pass


class NumericalFailure(GaBPError):
    """A message divisor collapsed towards zero.

    ``edge`` is the offending directed edge ``(i, j)`` or ``(i, i)`` when
    the node quantity ``a_i`` itself collapsed.
    """

    def __init__(self, round, edge, value=None):
        self.round = round
        self.edge = edge
        self.value = value
        super().__init__(f"divisor collapse at round {round}, edge {edge} (value={value!r})")


class IrreducibilityWarning(UserWarning):
    pass


class ConfigError(GaBPError):
    """Invalid experiment configuration or command-line combination."""
