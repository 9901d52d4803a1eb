"""Exception taxonomy. The CLI maps each class to a distinct exit code."""


class GeoBlockError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(GeoBlockError):
    """A call was made with structurally invalid arguments (empty sets, unknown names)."""


class WindowRangeError(GeoBlockError):
    """An index or window falls outside the extent of the data it addresses."""


class DataError(GeoBlockError):
    """Numeric payload violates its invariants (NaN/Inf, negative mass)."""


class ConfigError(GeoBlockError):
    """A configuration object is inconsistent with itself or with the data."""


class StateError(GeoBlockError):
    """A decoder operation was invoked in a state that does not admit it."""


class DumpError(GeoBlockError):
    """Base class for attention-dump I/O failures."""


class DumpFormatError(DumpError):
    """Bad magic or malformed/inconsistent header fields."""


class DumpVersionError(DumpError):
    """Recognized file, unknown version (kept distinct for forward compatibility)."""


class DumpTruncationError(DumpError):
    """Declared payload size disagrees with the actual file length."""


class DumpCorruptionError(DumpError):
    """Checksum mismatch: bytes were altered after writing."""
