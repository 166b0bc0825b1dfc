"""Exception hierarchy shared by every module of the package."""


class ShortSkewError(Exception):
    """Base class for all package errors."""


class SchemaError(ShortSkewError, ValueError):
    """Input file is missing a required column or is otherwise malformed."""


class DuplicateError(ShortSkewError, ValueError):
    """Two rows share a key that must be unique."""


class EmptyInputError(ShortSkewError, ValueError):
    """An input file or vector carries no data rows."""


class InsufficientDataError(ShortSkewError, ValueError):
    """Too few observations for the requested computation."""


class DomainError(ShortSkewError, ValueError):
    """Argument outside its admissible domain."""


class ShapeError(ShortSkewError, ValueError):
    """Arrays that must align have different lengths."""


class SingularDesignError(ShortSkewError, ValueError):
    """Design matrix is not of full column rank."""


class UnderdeterminedError(ShortSkewError, ValueError):
    """Fewer rows than columns in a regression design."""


class CollinearityError(SingularDesignError):
    """A named regressor is (numerically) a combination of the others."""

    def __init__(self, column: str, message: str | None = None) -> None:
        self.column = column
        super().__init__(message or f"regressor {column!r} is collinear with the fixed effects "
                         "and remaining regressors")


class NumericalOverflowError(ShortSkewError, ArithmeticError):
    """A recursion produced a non-finite value."""

    def __init__(self, index: int, message: str | None = None) -> None:
        self.index = index
        super().__init__(message or f"non-finite value at index {index}")


class UndefinedStatisticError(ShortSkewError, ValueError):
    """Statistic is undefined for the input, e.g. zero variance."""


class DegenerateSampleError(ShortSkewError, ValueError):
    """Sample has zero dispersion, so a test statistic cannot be formed."""


class InconsistentEventError(ShortSkewError, ValueError):
    """An add/delete event is illegal given the current list state."""

    def __init__(self, stock_id: str, date, action: str) -> None:
        self.stock_id = stock_id
        self.date = date
        self.action = action
        state = "already on" if action == "add" else "not on"
        super().__init__(f"cannot {action} {stock_id} on {date}: stock is {state} the list")


class ConfigError(ShortSkewError, ValueError):
    """Invalid simulation or run configuration."""


class DependencyError(ShortSkewError, RuntimeError):
    """A pipeline stage needs an artifact that an upstream stage has not produced."""

    def __init__(self, stage: str, missing: str) -> None:
        self.stage = stage
        self.missing = missing
        super().__init__(f"missing {missing}; run the {stage!r} stage first")
