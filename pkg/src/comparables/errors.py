"""Exception types shared across the package."""


class ComparablesError(Exception):
    """Base class for all package errors."""


class SchemaError(ComparablesError):
    """Invalid schema definition."""


class MissingColumn(ComparablesError):
    def __init__(self, name: str):
        super().__init__(f"missing column: {name!r}")
        self.name = name


class ParseError(ComparablesError):
    def __init__(self, row: int, column: str, detail: str = ""):
        msg = f"cannot parse row {row}, column {column!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.row = row
        self.column = column


class EmptyDataset(ComparablesError):
    pass


class DegenerateAttribute(ComparablesError):
    def __init__(self, name: str):
        super().__init__(f"attribute {name!r} has zero variance")
        self.name = name


class UnknownLevel(ComparablesError):
    def __init__(self, attribute: str, value: str):
        super().__init__(f"value {value!r} is not a declared level of {attribute!r}")
        self.attribute = attribute
        self.value = value


class DimensionMismatch(ComparablesError):
    pass


class RemoteUnavailable(ComparablesError):
    pass


class KTooLarge(ComparablesError):
    pass


class EmptyInput(ComparablesError):
    pass


class TooFewSamples(ComparablesError):
    pass


class OutOfDomain(ComparablesError):
    pass


class NoDifference(ComparablesError):
    pass


class Diverged(ComparablesError):
    pass


class ZeroWidthInterval(ComparablesError):
    pass


class ConfigError(ComparablesError):
    pass
