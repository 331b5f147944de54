class JobError(Exception):
    """Base class for export-job failures."""


class JobFormatError(JobError):
    """The job description itself is malformed."""


class EncodeError(JobError):
    """An encoder failed or produced an unusable vector."""


class DimensionError(JobError):
    """Embedding dimension changed mid-job."""


class LabelError(JobError):
    """Alignment label outside the phone alphabet."""
