"""Exception hierarchy shared across the package.

Usage problems (bad config, bad arguments) raise ConfigError; everything
else derives from SignFeatError and maps to the data/model exit code in
the CLI.
"""


class SignFeatError(Exception):
    """Base class for all package errors."""


class ConfigError(SignFeatError):
    """Invalid configuration: unknown key, bad value, malformed file."""


# imageio ------------------------------------------------------------------

class UnsupportedFormatError(SignFeatError):
    """File is not a PNG or JPEG payload."""


class CorruptImageError(SignFeatError):
    """File looks like an image but cannot be decoded."""


class ZeroDimensionError(SignFeatError):
    """Requested resize target has a zero dimension."""


class EmptyDatasetError(SignFeatError):
    """Dataset root contains no class subdirectories."""


class EmptyClassError(SignFeatError):
    """A class directory contains no usable images."""


# orb ----------------------------------------------------------------------

class ImageTooSmallError(SignFeatError):
    """Image is smaller than the operation's minimum footprint."""


class OutOfBoundsError(SignFeatError):
    """A patch or window does not fit inside the image."""


class InsufficientPatchesError(SignFeatError):
    """Too few training patches for pattern learning."""


class PoolExhaustedError(SignFeatError):
    """Greedy test selection cannot reach the requested count."""


# bovw ---------------------------------------------------------------------

class InvalidKError(SignFeatError):
    """Cluster count must be a positive integer."""


class TooFewDistinctPointsError(SignFeatError):
    """Fewer distinct points than requested clusters."""


class DimensionMismatchError(SignFeatError):
    """Vector width does not match the model."""


class RaggedRowsError(SignFeatError):
    """A CSV row deviates from the header width."""


# cart ---------------------------------------------------------------------

class EmptyNodeError(SignFeatError):
    """Impurity of an empty count vector is undefined."""


class EmptyTrainingSetError(SignFeatError):
    """Cannot fit a tree on zero samples."""


class LabelOutOfRangeError(SignFeatError):
    """A label is negative or >= the declared class count."""


class ClassTooSmallError(SignFeatError):
    """A class has too few samples for a stratified split."""


class EmptyEvaluationSetError(SignFeatError):
    """Cannot evaluate on zero samples."""


# cli / pipeline -----------------------------------------------------------

class MissingInputError(SignFeatError):
    """A required artifact is absent from the work directory."""


class MissingDescriptorsError(MissingInputError):
    """Descriptor CSVs have not been extracted yet."""


class MissingCodebookError(MissingInputError):
    """codebook.json has not been fitted yet."""


class MissingModelError(MissingInputError):
    """tree.json has not been trained yet."""


class WorkdirLockedError(SignFeatError):
    """Another invocation holds the work directory lock."""
