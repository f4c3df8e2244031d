"""Exception hierarchy shared by the lattice, operator, training and pipeline layers."""


class PermutoError(Exception):
    """Base class for every error raised by permutofilt."""


class InvalidFeatureError(PermutoError, ValueError):
    """Feature vectors are non-finite, empty or have inconsistent dimension."""


class SizeOverflowError(PermutoError, OverflowError):
    """A lattice filter or operator would exceed addressable size."""


class ShapeMismatchError(PermutoError, ValueError):
    """Array shapes of operands do not agree."""


class LabelOutOfRangeError(PermutoError, ValueError):
    """A class label is negative or not smaller than the number of labels."""


class StateMissingError(PermutoError, RuntimeError):
    """Backward pass requested without the recorded forward states."""


class CacheMissingError(PermutoError, RuntimeError):
    """Backward pass requested on a kernel built without its distance cache."""


class EmptyInputError(PermutoError, ValueError):
    """An operation received zero points."""


class EmptySegmentError(PermutoError, ValueError):
    """A segment id in 0..M-1 owns no point."""


class RecipeMismatchError(PermutoError, ValueError):
    """A feature recipe does not fit the image it is applied to."""


class EmptyDatasetError(PermutoError, ValueError):
    """Training was requested on an empty dataset."""


class FormatError(PermutoError, ValueError):
    """A file does not follow the expected binary or text layout."""


class ConfigError(PermutoError, ValueError):
    """A configuration file or override is malformed."""


class ParameterError(PermutoError, ValueError):
    """A numeric parameter lies outside its valid range."""
