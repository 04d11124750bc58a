"""Exception hierarchy. Every error raised on purpose by qmal derives from QmalError."""


class QmalError(Exception):
    """Base class for all documented qmal errors."""


class PeFormatError(QmalError, ValueError):
    pass


class MissingMzMagic(PeFormatError):
    pass


class MissingPeSignature(PeFormatError):
    pass


class TruncatedHeader(PeFormatError):
    pass


class EmptySpan(QmalError, ValueError):
    pass


class TooFewRows(QmalError, ValueError):
    pass


class DegenerateData(UserWarning):
    """Warning: fewer than k directions carry variance; trailing components are a completion."""


class DimensionMismatch(QmalError, ValueError):
    pass


class AngleOutOfRange(QmalError, ValueError):
    pass


class QubitOutOfRange(QmalError, IndexError):
    pass


class SameQubit(QmalError, ValueError):
    pass


class EmptyBatch(QmalError, ValueError):
    pass


class EmptyDataset(QmalError, ValueError):
    pass


class SingleClassData(QmalError, ValueError):
    pass


class MissingModel(QmalError, KeyError):
    pass


class LengthMismatch(QmalError, ValueError):
    pass


class EmptyInput(QmalError, ValueError):
    pass


class EmptyManifest(QmalError, ValueError):
    pass
