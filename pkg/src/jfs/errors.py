"""Exception hierarchy shared by all jfs modules.

File-system failures (unreadable files, unwritable paths) are reported with
the built-in ``OSError`` family; everything domain-specific lives here.
"""


class JfsError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(JfsError):
    """Masks or rasters that must share dimensions do not."""


class UndefinedRegionError(JfsError):
    """A metric was requested over an empty evaluation region."""


class EmptyAggregateError(JfsError):
    """An aggregate (mean) over zero values was requested."""


class InvalidClassError(JfsError):
    """A class id that is reserved or out of range was used."""


class RleFormatError(JfsError):
    """A run-length stream or container is corrupt."""


class FormatError(JfsError):
    """An input file is not in a supported format."""


class MissingEntryError(JfsError):
    """A listed dataset entry has no backing file, or a mask index gap."""


class DuplicateEntryError(JfsError):
    """An image id appears more than once in a split."""


class GenerationError(JfsError):
    """The synthetic generator could not satisfy its configuration."""


class SupportPoolError(JfsError):
    """Not enough eligible support images for the requested pairing."""


class GroupError(JfsError):
    """A group selection cannot be satisfied by the available samples."""


class BackendError(JfsError):
    """A segmentation backend failed while serving a prediction."""

    def __init__(self, message: str, support_index: int | None = None):
        super().__init__(message)
        self.support_index = support_index


class ContractViolationError(BackendError):
    """A backend returned a prediction that violates the backend contract."""


class SpawnError(BackendError):
    """An external backend process could not be started."""


class ProtocolError(BackendError):
    """An external backend spoke the wire protocol incorrectly."""
