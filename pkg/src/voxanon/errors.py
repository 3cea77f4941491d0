"""Exception and warning types shared across the package."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class FormatError(ValueError):
    """A file did not match its documented line format.

    ``path`` and ``lineno`` are filled in when known so the CLI can print
    ``file:line`` diagnostics.
    """

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        self.message = message
        super().__init__(self.__str__())

    def __str__(self):
        where = ""
        if self.path is not None:
            where = f"{self.path}:"
            if self.lineno is not None:
                where += f"{self.lineno}:"
            where += " "
        return f"{where}{self.message}"


class DegenerateResultWarning(UserWarning):
    """A metric fell back to its documented degenerate value."""
