"""Exceptions raised by edgeplanner.

Every exception carries the process exit code used by the command line
interface.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""


class EdgePlannerError(Exception):
    """Base class of all edgeplanner errors."""

    exit_code = 1


class ConfigError(EdgePlannerError):
    """Invalid configuration value or unknown configuration key."""

    exit_code = 2

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"`{key}`: {message}")


class TraceFormatError(EdgePlannerError):
    """Malformed CSV/JSON artifact."""

    exit_code = 2

    def __init__(self, path, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}, line {line}: {message}")


class EmptyDatasetError(EdgePlannerError):
    """No labeled instances left after filtering idle rows."""

    exit_code = 2


class NoDenseAreasError(EdgePlannerError):
    """Clustering found no dense area to train a predictor on."""

    exit_code = 2


class StreamOrderError(EdgePlannerError):
    """Trigger stream is not ordered by time."""

    exit_code = 2


class ArtifactIOError(EdgePlannerError):
    """An input file is missing or an output file cannot be written."""

    exit_code = 3


class InvariantError(EdgePlannerError):
    """A resource or ledger invariant of the MEC model was violated."""

    exit_code = 4
