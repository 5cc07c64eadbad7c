"""Exception hierarchy shared across the package.

Every domain error derives from :class:`CubescoreError` so callers (CLI,
service) can distinguish validation failures from genuine I/O or programming
errors with a single except clause.
"""


class CubescoreError(Exception):
    """Base class for all domain errors raised by cubescore."""


class MalformedJson(CubescoreError):
    """Input text is not parseable JSON."""


class SchemaViolation(CubescoreError):
    """JSON parsed but a required field is missing or has the wrong type."""


class InvariantViolation(CubescoreError):
    """A value breaks a data-model invariant (order, range, finiteness)."""


class UnlabeledSample(CubescoreError):
    """An operation requiring labels met a sample without one."""


class ClassTooSmall(CubescoreError):
    """A class has too few samples for the requested split or fold count."""


class TooShort(CubescoreError):
    """Trajectory has fewer points than feature extraction requires."""


class TooFewSegments(CubescoreError):
    """Length normalization needs at least two segment rows."""


class DegenerateVector(CubescoreError):
    """Cosine similarity is undefined for a zero-magnitude vector."""


class SampleExtractionError(CubescoreError):
    """Per-sample failure inside a batch operation; carries the sample id."""

    def __init__(self, sample_id: str, cause: CubescoreError):
        super().__init__(f"sample {sample_id!r}: {cause}")
        self.sample_id = sample_id
        self.cause = cause


class EmptyInput(CubescoreError):
    """An operation received an empty collection it cannot work with."""


class DimensionMismatch(CubescoreError):
    """Array shape does not match the model or operation contract."""


class ShapeMismatch(CubescoreError):
    """Feature matrices in one batch do not share a single shape."""


class EmptyTrainingSet(CubescoreError):
    """Training or fitting was requested with no training samples."""


class EmptyEvalSet(CubescoreError):
    """Evaluation was requested with no samples."""


class LengthMismatch(CubescoreError):
    """Paired vectors have different lengths."""


class DegenerateVariance(CubescoreError):
    """Correlation is undefined for a constant input vector."""


class MissingMetadata(CubescoreError):
    """A sample lacks the metadata field a grouping or correlation needs."""


class ModelFormatError(CubescoreError):
    """Model artifact is unreadable, version-incompatible, or inconsistent."""
