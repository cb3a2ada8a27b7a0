"""Exception hierarchy shared across the package."""


class PrilError(Exception):
    """Base class for all errors raised by this package."""


class MapFormatError(PrilError, ValueError):
    """A map file does not follow the tile-grid format."""


class RaggedRows(MapFormatError):
    pass


class BadChar(MapFormatError):
    def __init__(self, char, row, col):
        self.char, self.row, self.col = char, row, col
        super().__init__(f"bad tile {char!r} at row {row}, col {col}")


class MissingGoal(MapFormatError):
    pass


class MultipleGoals(MapFormatError):
    pass


class MissingStart(MapFormatError):
    pass


class MultipleStarts(MapFormatError):
    pass


class SingularSystem(PrilError, ArithmeticError):
    """A linear system that must be nonsingular for gamma < 1 was not."""


class DivergedLoss(PrilError, FloatingPointError):
    def __init__(self, iteration, loss):
        self.iteration, self.loss = iteration, loss
        super().__init__(f"non-finite loss {loss!r} at iteration {iteration}")


class DegenerateBatch(PrilError):
    pass


class TooFewStates(PrilError, ValueError):
    pass


class UnknownBudget(PrilError, KeyError):
    pass


class BudgetTooSmall(PrilError, ValueError):
    pass


class NonFiniteGradient(PrilError, FloatingPointError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"non-finite gradient for example {index}")


class LPError(PrilError):
    """The LP engine could not return an optimal vertex."""

    def __init__(self, status, message=""):
        self.status = status
        super().__init__(message or status)


class ZeroVector(PrilError, ValueError):
    pass


class EmptyGroup(PrilError, ValueError):
    pass


class TooFewRuns(PrilError, ValueError):
    pass


class ConfigError(PrilError, ValueError):
    pass


class IoError(PrilError, OSError):
    """An output artifact could not be written."""
