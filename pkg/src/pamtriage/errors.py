"""Exception taxonomy shared across the pipeline.

Every error raised on a contract violation derives from ``PamTriageError``
so callers (CLI, HTTP service) can map failures uniformly.
"""


class PamTriageError(Exception):
    """Base class for all pipeline errors."""


# --- audio ingest ---

class UnsupportedFormat(PamTriageError):
    """WAV container holds a codec or sample width we do not read."""


class CorruptHeader(PamTriageError):
    """RIFF/WAVE header is malformed or truncated."""


class EmptyFile(PamTriageError):
    """File has no bytes or no audio frames."""


class ClippingError(PamTriageError):
    """Too many out-of-range samples to clamp silently."""


# --- features ---

class RateMismatch(PamTriageError):
    """Sample rate of the input does not match the configured rate."""


class BandCountMismatch(PamTriageError):
    """Mel matrix has a band count the embedding provider cannot consume."""


class DimensionMismatch(PamTriageError):
    """Vector dimensionality differs from what the consumer expects."""


class ParseError(PamTriageError):
    """A serialized artifact could not be decoded."""


class DuplicateSnippetRef(PamTriageError):
    """Two rows claim the same (clip_id, index)."""


# --- reduction ---

class TooFewPoints(PamTriageError):
    """Not enough points for the requested neighborhood size."""


# --- detection ---

class TemplateTooLong(PamTriageError):
    """Template has more samples than the clip it is matched against."""


class UnknownClip(PamTriageError):
    """Event references a clip absent from the manifest."""


# --- classification ---

class ClassTooSmall(PamTriageError):
    """A class has too few examples for a stratified split."""


class SingleClassInput(PamTriageError):
    """Training set contains fewer than two distinct classes."""


class NonFiniteLoss(PamTriageError):
    """Training loss became NaN/Inf; aborted with diagnostics."""


class UnknownClass(PamTriageError):
    """Class name not present in the model's class list."""


# --- evaluation ---

class RefMismatch(PamTriageError):
    """Predictions and truth do not cover the same snippet set."""


class EmptyGrid(PamTriageError):
    """Threshold sweep called with no thresholds."""


# --- label store ---

class UnknownSnippet(PamTriageError):
    """Label references a snippet absent from the manifest."""


class IllegalTransition(PamTriageError):
    """Label state change not allowed by the review-state machine."""


class NoClassSurvives(PamTriageError):
    """min_count filtering removed every requested class."""
