class InvariantViolation(RuntimeError):
    """An exactness check inside the pipeline failed."""


class FormatError(ValueError):
    """Malformed input file; carries the file name and line number when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": self.message, "file": self.path, "line": self.line}
