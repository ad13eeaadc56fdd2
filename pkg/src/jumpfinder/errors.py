"""Exception hierarchy shared by the library and the CLI."""


class JumpFinderError(Exception):
    """Base class for all library errors."""


class EmptyWindow(JumpFinderError):
    """No observation receives positive kernel weight."""


class NoValidGridPoint(JumpFinderError):
    """Every grid point of the search region had an undefined one-sided estimate."""


class AllCandidatesFailed(JumpFinderError):
    """No bandwidth candidate produced a detection on the original sample."""


class InvalidConfig(JumpFinderError, ValueError):
    pass


class SingularFit(JumpFinderError):
    """Local linear fit has fewer than two distinct design points."""


class ParseError(JumpFinderError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class NonPositivePredictor(ParseError):
    pass


class EmptyAfterFilter(ParseError):
    pass
