"""Exception hierarchy shared by every hapticid module."""


class HapticError(Exception):
    """Base class for all errors raised by hapticid."""


class PlyParseError(HapticError):
    """Malformed PLY header or element data."""


class UnsupportedPlyError(HapticError):
    """Valid PLY that uses a feature this reader does not handle."""


class MeshError(HapticError):
    """Mesh violates a structural invariant (bad index, degenerate face)."""


class MissedGraspError(HapticError):
    """At least one finger ray found no surface."""


class ObjectUnreachableError(HapticError):
    """Too few poses on the grid produced a valid grasp."""


class DegeneratePairError(HapticError):
    """Two contacts coincide, so the pair feature is undefined."""


class TableFormatError(HapticError):
    """Table file is truncated, corrupt or not a table file."""


class TableVersionError(TableFormatError):
    """Table file was written by an unsupported format version."""


class QuantizerMismatchError(HapticError):
    """Tables were built with a different method or quantizer."""


class EmptyTableSetError(HapticError):
    """Attempt to persist or use an empty set of tables."""


class TableMismatchError(HapticError):
    """Tables passed together do not share method and quantizer."""


class DegeneratePosteriorError(HapticError):
    """Every posterior product underflowed to zero."""


class NoValidPoseError(HapticError):
    """The active policy has no admissible pose left."""


class MissingPoseRecordsError(HapticError):
    """Tables were trained without per-pose key retention."""


class ContactFileError(HapticError):
    """Malformed contact file."""


class ConfigError(HapticError):
    """Invalid experiment configuration."""
