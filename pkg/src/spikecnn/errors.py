"""Exception types shared across the package."""


class SpikeCnnError(Exception):
    """Base class for all package-specific failures."""


class IdxFormatError(SpikeCnnError):
    """Malformed IDX file."""


class BadMagicError(IdxFormatError):
    """IDX magic number does not match the expected format."""


class TruncatedFileError(IdxFormatError):
    """IDX file ends before the declared payload."""


class CountMismatchError(IdxFormatError):
    """Image and label files declare different item counts."""


class DegenerateInputError(SpikeCnnError):
    """Input carries no usable signal (constant image, empty stream, ...)."""


class InvalidParameterError(SpikeCnnError):
    """Parameter outside its legal domain."""


class InvalidGeometryError(SpikeCnnError):
    """Shapes that cannot be tiled/convolved/pooled as requested."""


class ConfigError(SpikeCnnError):
    """Bad run configuration (unknown key, out-of-domain value, ...)."""


class StageOrderError(SpikeCnnError):
    """A pipeline stage was requested before its prerequisite completed."""

    def __init__(self, missing_stage: str):
        self.missing_stage = missing_stage
        super().__init__(f"stage '{missing_stage}' has not completed yet")


class ArchiveError(SpikeCnnError):
    """Model archive cannot be read."""


class ArchiveVersionError(ArchiveError):
    """Archive was written by an unknown format version."""


class ArchiveChecksumError(ArchiveError):
    """A section's CRC32 does not match its payload."""


class ArchiveTruncatedError(ArchiveError):
    """Archive ends in the middle of a section."""
