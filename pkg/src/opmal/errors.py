"""Exception types raised by the opmal pipeline."""


class OpmalError(Exception):
    """Base class for all pipeline errors."""


class UnrecognizedDialect(OpmalError):
    """Neither listing dialect reached a majority; the file should be quarantined."""


class BadManifest(OpmalError):
    """Manifest file is missing, unreadable, or has a malformed row."""


class MalformedMatrixFile(OpmalError):
    """Feature-matrix file violates the on-disk schema.

    Carries the 1-based line number of the offending record.
    """

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class MalformedModelFile(OpmalError):
    """Model file is truncated, version-mismatched, or structurally invalid."""


class ModelSchemaMismatch(OpmalError):
    """Sample vocabulary digest differs from the model's and strict mode is on."""


class EmptyCorpus(OpmalError):
    """Curation removed every sample; the configuration is wrong for this corpus."""


class EmptyTrainingSet(OpmalError):
    """A learner was asked to train on zero samples."""


class AllZeroCounts(OpmalError):
    """Entropy of a class-count vector whose entries are all zero is undefined."""


class SingleClassError(OpmalError):
    """An operation that needs both classes saw only one."""


class LengthMismatch(OpmalError):
    """Prediction and truth vectors have different lengths."""


class BadK(OpmalError):
    """Fold count outside [2, n]."""
