"""Exception hierarchy shared by all modules.

Two broad categories, mirrored by distinct CLI exit codes: inputs that
cannot be read or decoded (DataFormatError) and computations whose
preconditions do not hold (PreconditionError).
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(ToolkitError):
    """An input file is missing, unreadable, or violates its format."""


class ManifestError(DataFormatError):
    """Manifest line cannot be parsed or violates a record invariant."""


class EmbeddingFormatError(DataFormatError):
    """Embeddings file violates the EMB1 binary layout or row invariants."""


class LexiconError(DataFormatError):
    """Pronouncing dictionary file cannot be parsed."""


class PreconditionError(ToolkitError):
    """A computation was invoked on inputs that violate its preconditions."""


class SplitError(PreconditionError):
    """A split policy is infeasible for the given manifest."""


class OovError(PreconditionError):
    """An out-of-vocabulary token occurred under the `error` policy."""
