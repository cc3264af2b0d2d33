"""Exception hierarchy shared by the services, the CLI and the HTTP layer.

Every class carries the process exit code the CLI maps it to.
"""


class Orient3DError(Exception):
    exit_code = 1


# usage
class ParameterError(Orient3DError, ValueError):
    exit_code = 2


class DomainError(ParameterError):
    pass


class ResourceLimitError(ParameterError):
    pass


# data / format
class DataError(Orient3DError, ValueError):
    exit_code = 3


class DimensionError(DataError):
    pass


class StructureError(DataError):
    pass


class FormatError(DataError):
    pass


class VersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


# numeric
class StabilityError(Orient3DError, ArithmeticError):
    exit_code = 4
