"""Exception classes.  Each class maps to one CLI exit code."""


class DegenerateEKError(Exception):
    exit_code = 1


class ParseError(DegenerateEKError):
    """Malformed input document."""

    exit_code = 3

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class InvariantError(DegenerateEKError):
    """Input parsed but violates a stated invariant."""

    exit_code = 4

    def __init__(self, invariant, message, point=None):
        self.invariant = invariant
        self.point = point
        prefix = f"[{invariant}]"
        if point is not None:
            prefix += f" critical point {point}"
        super().__init__(f"{prefix}: {message}")


class ConvergenceError(DegenerateEKError):
    """A numerical procedure did not reach its tolerance."""

    exit_code = 5


class ResolutionError(ConvergenceError):
    """A grid-based count changed between resolutions n and 2n."""


class FloorError(ConvergenceError):
    """Eigenvalue data fell below the floating point floor."""

    def __init__(self, message, usable_h=()):
        self.usable_h = tuple(usable_h)
        super().__init__(message)


class AssumptionError(DegenerateEKError):
    """A modelling assumption needed by a formula does not hold."""

    exit_code = 6

    def __init__(self, clause, message):
        self.clause = clause
        super().__init__(f"{clause}: {message}")
